#pragma once

// Maximum-likelihood fitting of AffineMixture models by the EM algorithm for
// truncated normal mixtures.
//
// The M step for the location maps is a single sweep of the fixed-point
// updates obtained from the score equations of the complete-data
// log-likelihood: each update is a responsibility-weighted regression in which
// the wind coordinate is corrected by the hazard term
// (phi(t)/Phi(t)) * Sigma e_1 / sigma_W, t = mu_W / sigma_W. The forecasts are
// centred at their responsibility-weighted mean before the sweep (A + B f =
// (A + B fbar) + B (f - fbar)), which leaves the model unchanged but keeps the
// alternating intercept/slope updates well conditioned when forecasts are far
// from zero (temperatures in K).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bivcal/bma.hpp"
#include "bivcal/data.hpp"

namespace bivcal {

struct EmConfig {
    int max_iter = 500;
    double tol_loglik = 1e-6;   // relative change of the log-likelihood over one cycle
    double tol_param = 1e-6;    // largest absolute parameter change over one cycle
    double min_weight = 1e-4;   // per-member weight floor, renormalized afterwards
    double sigma_floor = 1e-8;  // eigenvalue floor of the scale matrix
    /// Backtrack the scale update toward the previous scale whenever it would
    /// lower the expected complete-data log-likelihood.
    bool safeguard_scale = true;

    void validate() const {
        if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
        if (!(tol_loglik > 0.0) || !(tol_param > 0.0) || !(min_weight > 0.0) || !(sigma_floor > 0.0)) {
            throw InvalidArgument("EM tolerances and floors must be positive");
        }
    }
};

/// N cases of M member forecasts and one observation, in D dimensions.
template <int D>
struct TrainingSet {
    std::size_t members = 0;
    std::vector<Vec<D>> forecasts;  // case-major, N * members
    std::vector<Vec<D>> observations;

    std::size_t size() const noexcept { return observations.size(); }
    const Vec<D>& forecast(std::size_t i, std::size_t m) const { return forecasts[i * members + m]; }
};

inline TrainingSet<2> training_set(std::span<const ForecastCase> cases) {
    TrainingSet<2> set;
    if (!cases.empty()) set.members = cases.front().members.size();
    set.forecasts.reserve(cases.size() * set.members);
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        if (c.members.size() != set.members) throw InvalidArgument("inconsistent member count in window");
        if (c.obs(0) < 0.0) throw InvalidArgument("negative wind observation at case " + std::to_string(i));
        set.forecasts.insert(set.forecasts.end(), c.members.begin(), c.members.end());
        set.observations.push_back(c.obs);
    }
    return set;
}

inline TrainingSet<2> training_set(const TrainingWindow& window) {
    return training_set(window.cases);
}

/// One coordinate (0 = wind, 1 = temperature) of every case.
inline TrainingSet<1> marginal_training_set(std::span<const ForecastCase> cases, int coordinate) {
    TrainingSet<1> set;
    if (!cases.empty()) set.members = cases.front().members.size();
    for (const auto& c : cases) {
        if (c.members.size() != set.members) throw InvalidArgument("inconsistent member count in window");
        for (const auto& f : c.members) set.forecasts.push_back(Vec<1>(f(coordinate)));
        set.observations.push_back(Vec<1>(c.obs(coordinate)));
    }
    return set;
}

template <int D>
struct LocationScale {
    std::vector<Vec<D>> intercepts;
    std::vector<Mat<D>> slopes;
    Mat<D> scale;
};

struct EmDiagnostics {
    int iterations = 0;
    std::vector<double> loglik_trace;  // index 0 is the initialization
    bool converged = false;
    int best_iter = 0;
    bool init_fallback = false;
    std::vector<std::string> warnings;
};

template <int D>
struct EmState {
    AffineMixture<D> model;
    Eigen::MatrixXd responsibilities;  // N x M (member-expanded)
    double loglik = 0.0;
    int iteration = 0;
};

template <int D>
struct FitResult {
    AffineMixture<D> model;
    EmDiagnostics diagnostics;
};

namespace detail {

template <int D>
void check_set(const AffineMixture<D>& model, const TrainingSet<D>& set) {
    if (set.size() == 0) throw InvalidArgument("empty training set");
    if (set.members != model.member_count()) {
        throw InvalidArgument("training set has " + std::to_string(set.members) + " members, model expects " +
                              std::to_string(model.member_count()));
    }
}

/// log(w_m) + log g(x_i | A + B f_im, Sigma), N x M.
template <int D>
Eigen::MatrixXd component_log_terms(const AffineMixture<D>& model, const TrainingSet<D>& set) {
    const ScaleKernel<D> kernel(model.scale, model.truncated, false);
    const std::size_t n = set.size();
    const std::size_t m_count = set.members;
    Eigen::MatrixXd terms(n, m_count);
    std::vector<double> log_w(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        const double w = model.member_weight(m);
        log_w[m] = w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < m_count; ++m) {
            terms(i, m) = std::isinf(log_w[m])
                              ? log_w[m]
                              : log_w[m] + kernel.log_density(set.observations[i], model.location(m, set.forecast(i, m)));
        }
    }
    return terms;
}

struct EStepResult {
    Eigen::MatrixXd responsibilities;
    double loglik;
};

template <int D>
EStepResult e_step_with_loglik(const AffineMixture<D>& model, const TrainingSet<D>& set) {
    Eigen::MatrixXd z = component_log_terms<D>(model, set);
    double loglik = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double top = z.row(i).maxCoeff();
        if (!std::isfinite(top)) throw DegenerateLikelihood(static_cast<std::size_t>(i));
        double s = 0.0;
        for (Eigen::Index m = 0; m < z.cols(); ++m) {
            z(i, m) = std::exp(z(i, m) - top);
            s += z(i, m);
        }
        z.row(i) /= s;
        loglik += top + std::log(s);
    }
    return {std::move(z), loglik};
}

template <int D>
double max_abs_change(const AffineMixture<D>& a, const AffineMixture<D>& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.weights.size(); ++k) d = std::max(d, std::abs(a.weights[k] - b.weights[k]));
    for (std::size_t p = 0; p < a.intercepts.size(); ++p) {
        d = std::max(d, (a.intercepts[p] - b.intercepts[p]).cwiseAbs().maxCoeff());
        d = std::max(d, (a.slopes[p] - b.slopes[p]).cwiseAbs().maxCoeff());
    }
    return std::max(d, (a.scale - b.scale).cwiseAbs().maxCoeff());
}

template <int D>
bool all_finite(const AffineMixture<D>& model) {
    for (double w : model.weights) if (!std::isfinite(w)) return false;
    for (const auto& a : model.intercepts) if (!a.allFinite()) return false;
    for (const auto& b : model.slopes) if (!b.allFinite()) return false;
    return model.scale.allFinite();
}

}  // namespace detail

/// Observed-data log-likelihood sum_i log sum_m w_m g(x_i | A + B f_im, Sigma).
template <int D>
double log_likelihood(const AffineMixture<D>& model, const TrainingSet<D>& set) {
    detail::check_set(model, set);
    return detail::e_step_with_loglik<D>(model, set).loglik;
}

inline double log_likelihood(const BmaModel& model, const TrainingWindow& window) {
    return log_likelihood<2>(model, training_set(window));
}

/// Responsibilities z_im = w_m g_im / sum_j w_j g_ij (rows sum to one).
template <int D>
Eigen::MatrixXd e_step(const AffineMixture<D>& model, const TrainingSet<D>& set) {
    detail::check_set(model, set);
    return detail::e_step_with_loglik<D>(model, set).responsibilities;
}

inline Eigen::MatrixXd e_step(const BmaModel& model, const TrainingWindow& window) {
    return e_step<2>(model, training_set(window));
}

/// Per-group weights: the mean responsibility of the group's members,
/// sum_i sum_{m in k} z_im / (N M_k). Singleton groups give column means.
inline std::vector<double> m_step_weights(const Eigen::MatrixXd& z, const GroupSpec& groups) {
    if (static_cast<std::size_t>(z.cols()) != groups.member_count()) {
        throw InvalidArgument("responsibility columns do not match the group spec");
    }
    const double n = static_cast<double>(z.rows());
    std::vector<double> weights(groups.group_count(), 0.0);
    for (std::size_t k = 0; k < groups.group_count(); ++k) {
        double s = 0.0;
        for (std::size_t m : groups.group(k).members) s += z.col(static_cast<Eigen::Index>(m)).sum();
        weights[k] = s / (n * static_cast<double>(groups.group_size(k)));
    }
    return weights;
}

/// Raises every weight to `floor` and rescales so that sum_k M_k w_k = 1.
inline std::vector<double> floor_weights(std::vector<double> weights, const GroupSpec& groups, double floor) {
    double mass = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        weights[k] = std::max(weights[k], floor);
        mass += static_cast<double>(groups.group_size(k)) * weights[k];
    }
    for (double& w : weights) w /= mass;
    return weights;
}

/// Expected complete-data log-likelihood sum_i sum_m z_im [log w_m + log g_im].
template <int D>
double expected_complete_loglik(const AffineMixture<D>& model, const Eigen::MatrixXd& z,
                                const TrainingSet<D>& set) {
    detail::check_set(model, set);
    const Eigen::MatrixXd terms = detail::component_log_terms<D>(model, set);
    double s = 0.0;
    for (Eigen::Index i = 0; i < terms.rows(); ++i) {
        for (Eigen::Index m = 0; m < terms.cols(); ++m) {
            if (z(i, m) > 0.0) s += z(i, m) * terms(i, m);
        }
    }
    return s;
}

/// One sweep of the intercept, slope and scale updates given responsibilities.
/// Full mode updates each group's map from that group's members; parsimonious
/// mode pools all members into the shared map. The scale is symmetrized and
/// eigenvalue-floored at `config.sigma_floor`.
template <int D>
LocationScale<D> m_step_location_scale(const AffineMixture<D>& model, const Eigen::MatrixXd& z,
                                       const TrainingSet<D>& set, const EmConfig& config = {}) {
    detail::check_set(model, set);
    const ScaleKernel<D> kernel(model.scale, model.truncated, false);
    const Vec<D>& coupling = kernel.coupling();
    const std::size_t n = set.size();
    const std::size_t m_count = set.members;

    LocationScale<D> out{model.intercepts, model.slopes, model.scale};
    for (std::size_t p = 0; p < model.parameter_set_count(); ++p) {
        const Vec<D>& a_old = model.intercepts[p];
        const Mat<D>& b_old = model.slopes[p];

        double mass = 0.0;
        Vec<D> centre = Vec<D>::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < m_count; ++m) {
                if (model.parameter_set_of_member(m) != p) continue;
                mass += z(i, m);
                centre += z(i, m) * set.forecast(i, m);
            }
        }
        if (!(mass > 1e-300)) continue;  // no responsibility mass: keep the previous map
        centre /= mass;

        // Intercept of the centred map, hazard terms at the previous locations.
        Vec<D> acc = Vec<D>::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < m_count; ++m) {
                if (model.parameter_set_of_member(m) != p || z(i, m) == 0.0) continue;
                const Vec<D>& f = set.forecast(i, m);
                const double h = kernel.hazard(a_old + b_old * f);
                acc += z(i, m) * ((set.observations[i] - b_old * (f - centre)) - h * coupling);
            }
        }
        const Vec<D> centred_intercept = acc / mass;

        // Slope, hazard terms at the locations with the new intercept.
        Mat<D> cross = Mat<D>::Zero();
        Mat<D> gram = Mat<D>::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < m_count; ++m) {
                if (model.parameter_set_of_member(m) != p || z(i, m) == 0.0) continue;
                const Vec<D> fc = set.forecast(i, m) - centre;
                const double h = kernel.hazard(centred_intercept + b_old * fc);
                cross += z(i, m) * ((set.observations[i] - centred_intercept) - h * coupling) * fc.transpose();
                gram += z(i, m) * fc * fc.transpose();
            }
        }
        const double trace = gram.trace();
        if (!(trace > 0.0) || linalg::eigenvalues<D>(gram).minCoeff() < 1e-12 * trace) {
            throw RankDeficient("singular forecast Gram matrix in parameter set " + std::to_string(p));
        }
        out.slopes[p] = cross * gram.inverse();
        out.intercepts[p] = centred_intercept - out.slopes[p] * centre;
    }

    // Scale: corrected scatter around the new locations; hazard terms use the
    // new locations and the previous scale.
    Mat<D> scatter = Mat<D>::Zero();
    const Mat<D> coupling_outer = coupling * coupling.transpose();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < m_count; ++m) {
            if (z(i, m) == 0.0) continue;
            const std::size_t p = model.parameter_set_of_member(m);
            const Vec<D> mu = out.intercepts[p] + out.slopes[p] * set.forecast(i, m);
            const Vec<D> r = set.observations[i] - mu;
            scatter += z(i, m) * (r * r.transpose());
            if (model.truncated) {
                scatter += z(i, m) * (mu(0) * kernel.hazard(mu) / kernel.sigma_w()) * coupling_outer;
            }
        }
    }
    const Mat<D> candidate = linalg::floor_eigenvalues<D>(scatter / static_cast<double>(n), config.sigma_floor);
    out.scale = candidate;

    if (config.safeguard_scale && model.truncated) {
        AffineMixture<D> trial = model;
        trial.intercepts = out.intercepts;
        trial.slopes = out.slopes;
        const double before = expected_complete_loglik<D>(trial, z, set);
        trial.scale = candidate;
        double after = expected_complete_loglik<D>(trial, z, set);
        double step = 1.0;
        while (!(after >= before) && step > 1e-6) {
            step *= 0.5;
            trial.scale = linalg::symmetrize<D>((1.0 - step) * model.scale + step * candidate);
            after = expected_complete_loglik<D>(trial, z, set);
        }
        out.scale = after >= before ? trial.scale : model.scale;
    }
    return out;
}

/// Starting values: per-parameter-set least-squares regression of the
/// observations on the members, the sample covariance of the observations as
/// scale, equal weights. A set whose regression is rank deficient falls back
/// to A = mean(x - f), B = I and sets `*fallback`.
template <int D>
AffineMixture<D> initialize(const TrainingSet<D>& set, const GroupSpec& groups, Mode mode, bool truncated,
                            const EmConfig& config = {}, bool* fallback = nullptr) {
    if (set.size() == 0) throw InvalidArgument("empty training set");
    if (set.members != groups.member_count()) throw InvalidArgument("training set does not match the group spec");
    AffineMixture<D> model;
    model.groups = groups;
    model.mode = mode;
    model.truncated = truncated;
    model.weights.assign(groups.group_count(), 1.0 / static_cast<double>(groups.member_count()));
    if (fallback) *fallback = false;

    const std::size_t n = set.size();
    for (std::size_t p = 0; p < model.parameter_set_count(); ++p) {
        double count = 0.0;
        Vec<D> fbar = Vec<D>::Zero();
        Vec<D> xbar = Vec<D>::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < set.members; ++m) {
                if (model.parameter_set_of_member(m) != p) continue;
                count += 1.0;
                fbar += set.forecast(i, m);
                xbar += set.observations[i];
            }
        }
        fbar /= count;
        xbar /= count;
        Mat<D> sff = Mat<D>::Zero();
        Mat<D> sxf = Mat<D>::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < set.members; ++m) {
                if (model.parameter_set_of_member(m) != p) continue;
                const Vec<D> fc = set.forecast(i, m) - fbar;
                sff += fc * fc.transpose();
                sxf += (set.observations[i] - xbar) * fc.transpose();
            }
        }
        const double trace = sff.trace();
        if (trace > 0.0 && linalg::eigenvalues<D>(sff).minCoeff() >= 1e-12 * trace) {
            const Mat<D> slope = sff.ldlt().solve(sxf.transpose()).transpose();
            model.slopes.push_back(slope);
            model.intercepts.push_back(xbar - slope * fbar);
        } else {
            model.slopes.push_back(Mat<D>::Identity());
            model.intercepts.push_back(xbar - fbar);
            if (fallback) *fallback = true;
        }
    }

    Vec<D> mean = Vec<D>::Zero();
    for (const auto& x : set.observations) mean += x;
    mean /= static_cast<double>(n);
    Mat<D> cov = Mat<D>::Zero();
    for (const auto& x : set.observations) cov += (x - mean) * (x - mean).transpose();
    if (n > 1) cov /= static_cast<double>(n - 1);
    model.scale = linalg::floor_eigenvalues<D>(cov, config.sigma_floor);
    return model;
}

/// Number of free parameters of a model with the given structure.
template <int D>
std::size_t parameter_count(const GroupSpec& groups, Mode mode) {
    const std::size_t sets = mode == Mode::full ? groups.group_count() : 1;
    return sets * (D + D * D) + D * (D + 1) / 2 + (groups.group_count() - 1);
}

/// Runs EM cycles (E step, weight update with floor, one location/scale
/// sweep) until the relative log-likelihood change or the parameter change
/// falls below tolerance, or `max_iter` cycles. Returns the iterate with the
/// highest observed log-likelihood, the initialization included.
template <int D>
FitResult<D> fit(const TrainingSet<D>& set, const GroupSpec& groups, Mode mode, bool truncated,
                 const EmConfig& config = {}, const std::optional<AffineMixture<D>>& init = std::nullopt) {
    config.validate();
    if (set.size() == 0) throw InvalidArgument("empty training window");

    FitResult<D> result;
    EmDiagnostics& diag = result.diagnostics;
    EmState<D> state;
    if (init) {
        state.model = *init;
        if (!(state.model.groups == groups) || state.model.mode != mode) {
            throw InvalidArgument("initial model does not match the requested structure");
        }
    } else {
        state.model = initialize<D>(set, groups, mode, truncated, config, &diag.init_fallback);
    }
    state.model.validate();
    detail::check_set(state.model, set);

    if (2 * set.size() < parameter_count<D>(groups, mode)) {
        diag.warnings.push_back("training window has " + std::to_string(set.size()) + " cases for " +
                                std::to_string(parameter_count<D>(groups, mode)) + " parameters");
    }

    auto evaluated = detail::e_step_with_loglik<D>(state.model, set);
    state.responsibilities = std::move(evaluated.responsibilities);
    state.loglik = evaluated.loglik;
    diag.loglik_trace.push_back(state.loglik);
    result.model = state.model;
    double best = state.loglik;

    for (state.iteration = 1; state.iteration <= config.max_iter; ++state.iteration) {
        AffineMixture<D> next = state.model;
        next.weights = floor_weights(m_step_weights(state.responsibilities, groups), groups, config.min_weight);
        LocationScale<D> ls = m_step_location_scale<D>(next, state.responsibilities, set, config);
        next.intercepts = std::move(ls.intercepts);
        next.slopes = std::move(ls.slopes);
        next.scale = ls.scale;
        if (!detail::all_finite(next)) {
            throw Divergence("non-finite parameters at EM iteration " + std::to_string(state.iteration));
        }

        evaluated = detail::e_step_with_loglik<D>(next, set);
        const double change = detail::max_abs_change(state.model, next);
        const double previous = state.loglik;
        state.model = std::move(next);
        state.responsibilities = std::move(evaluated.responsibilities);
        state.loglik = evaluated.loglik;
        diag.loglik_trace.push_back(state.loglik);
        diag.iterations = state.iteration;
        if (state.loglik > best) {
            best = state.loglik;
            result.model = state.model;
            diag.best_iter = state.iteration;
        }
        if (std::abs(state.loglik - previous) < config.tol_loglik * std::max(1.0, std::abs(previous)) ||
            change < config.tol_param) {
            diag.converged = true;
            break;
        }
    }
    return result;
}

inline FitResult<2> fit(const TrainingWindow& window, const GroupSpec& groups, Mode mode,
                        const EmConfig& config = {}, const std::optional<BmaModel>& init = std::nullopt) {
    return fit<2>(training_set(window), groups, mode, true, config, init);
}

}  // namespace bivcal
