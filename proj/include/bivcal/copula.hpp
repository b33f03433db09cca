#pragma once

// Gaussian copula baseline: univariate BMA margins (truncated normal mixture
// for wind, normal mixture for temperature) tied together by one latent
// correlation estimated over a historical period.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <span>
#include <vector>

#include "bivcal/em.hpp"

namespace bivcal {

enum class Variable { wind = 0, temp = 1 };

/// Univariate BMA model. `truncated` selects the truncated-normal family
/// (support [0, inf)) over the normal family.
using UniBmaModel = AffineMixture<1>;

struct CopulaModel {
    UniBmaModel wind_margin;
    UniBmaModel temp_margin;
    double latent_corr = 0.0;
};

inline FitResult<1> fit_margin(std::span<const ForecastCase> cases, Variable variable, const GroupSpec& groups,
                               const EmConfig& config = {}, Mode mode = Mode::full) {
    const int coordinate = static_cast<int>(variable);
    return fit<1>(marginal_training_set(cases, coordinate), groups, mode, variable == Variable::wind, config);
}

inline FitResult<1> fit_margin(const TrainingWindow& window, Variable variable, const GroupSpec& groups,
                               const EmConfig& config = {}, Mode mode = Mode::full) {
    return fit_margin(window.cases, variable, groups, config, mode);
}

namespace detail {

struct MarginComponent {
    double weight;
    double mu;
};

inline std::vector<MarginComponent> margin_components(const UniBmaModel& m, std::span<const double> f) {
    if (f.size() != m.member_count()) throw InvalidArgument("member count does not match the margin model");
    std::vector<MarginComponent> out;
    out.reserve(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double w = m.member_weight(i);
        if (w > 0.0) out.push_back({w, m.location(i, Vec<1>(f[i]))(0)});
    }
    return out;
}

// Component CDF; truncated components are computed from upper tails.
inline double component_cdf(bool truncated, double mu, double sigma, double x) {
    const double z = (x - mu) / sigma;
    if (!truncated) return std_normal_cdf(z);
    if (x < 0.0) return 0.0;
    return 1.0 - std_normal_cdf(-z) / std_normal_cdf(mu / sigma);
}

inline double component_pdf(bool truncated, double mu, double sigma, double x) {
    if (truncated && x < 0.0) return 0.0;
    const double d = std_normal_pdf((x - mu) / sigma) / sigma;
    return truncated ? d / std_normal_cdf(mu / sigma) : d;
}

inline double component_quantile(bool truncated, double mu, double sigma, double p) {
    if (!truncated) return mu + sigma * std_normal_quantile(p);
    const double z = -std_normal_quantile((1.0 - p) * std_normal_cdf(mu / sigma));
    return std::max(0.0, mu + sigma * z);
}

}  // namespace detail

inline double margin_cdf(const UniBmaModel& m, std::span<const double> f, double x) {
    const double sigma = std::sqrt(m.scale(0, 0));
    double s = 0.0;
    for (const auto& c : detail::margin_components(m, f)) {
        s += c.weight * detail::component_cdf(m.truncated, c.mu, sigma, x);
    }
    return std::clamp(s, 0.0, 1.0);
}

inline double margin_pdf(const UniBmaModel& m, std::span<const double> f, double x) {
    const double sigma = std::sqrt(m.scale(0, 0));
    double s = 0.0;
    for (const auto& c : detail::margin_components(m, f)) {
        s += c.weight * detail::component_pdf(m.truncated, c.mu, sigma, x);
    }
    return s;
}

/// Exact mixture mean.
inline double margin_mean(const UniBmaModel& m, std::span<const double> f) {
    const double sigma = std::sqrt(m.scale(0, 0));
    double s = 0.0;
    for (const auto& c : detail::margin_components(m, f)) {
        s += c.weight * (m.truncated ? c.mu + sigma * normal_hazard(c.mu / sigma) : c.mu);
    }
    return s;
}

/// A univariate margin evaluated for one member vector.
class MarginMixture {
public:
    MarginMixture(const UniBmaModel& m, std::span<const double> f)
        : sigma_(std::sqrt(m.scale(0, 0))), truncated_(m.truncated) {
        for (const auto& c : detail::margin_components(m, f)) {
            const double scaled = truncated_ ? c.weight / std_normal_cdf(c.mu / sigma_) : c.weight;
            comps_.push_back({c.weight, c.mu, scaled});
            mass_ += c.weight;
        }
    }

    double cdf(double x) const { return cdf_pdf(x).first; }
    double pdf(double x) const { return cdf_pdf(x).second; }

    /// CDF and density in one pass over the components.
    std::pair<double, double> cdf_pdf(double x) const {
        if (truncated_ && x < 0.0) return {0.0, 0.0};
        double upper = 0.0, lower = 0.0, density = 0.0;
        for (const auto& c : comps_) {
            const double z = (x - c.mu) / sigma_;
            if (truncated_) {
                upper += c.scaled * std_normal_cdf(-z);
            } else {
                lower += c.weight * std_normal_cdf(z);
            }
            density += c.scaled * std_normal_pdf(z);
        }
        return {truncated_ ? mass_ - upper : lower, density / sigma_};
    }

    /// Smallest and largest component quantile at p; the mixture quantile lies between.
    std::pair<double, double> bracket(double p) const {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& c : comps_) {
            const double q = detail::component_quantile(truncated_, c.mu, sigma_, p);
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
        return {lo, hi};
    }

    double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("margin_quantile requires p in (0, 1)");
        auto [lo, hi] = bracket(p);
        // Guard the bracket against rounding in the component quantiles.
        const double pad = 1e-7 * (1.0 + std::abs(lo) + std::abs(hi));
        while (cdf(lo) > p && lo > -1e300) lo -= pad + (hi - lo);
        while (cdf(hi) < p && hi < 1e300) hi += pad + (hi - lo);
        if (truncated_) lo = std::max(lo, 0.0);
        return solve(p, lo, hi, 0.5 * (lo + hi));
    }

    /// Newton steps on cdf(x) = p from x0 inside [lo, hi] with cdf(lo) <= p <= cdf(hi).
    /// Steps leaving the bracket fall back to bisection; stops once the step
    /// or the bracket is below 1e-9.
    double solve(double p, double lo, double hi, double x) const {
        for (int iter = 0; iter < 200 && hi - lo > 1e-9; ++iter) {
            const auto [c, d] = cdf_pdf(x);
            const double g = c - p;
            if (g == 0.0) return x;
            if (g < 0.0) lo = x; else hi = x;
            double next = d > 0.0 ? x - g / d : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - x) < 1e-10) return next;
            x = next;
        }
        return x;
    }

private:
    struct Component {
        double weight;
        double mu;
        double scaled;  // weight over the truncation mass
    };
    std::vector<Component> comps_;
    double sigma_;
    bool truncated_;
    double mass_ = 0.0;
};

/// Inverse of margin_cdf, bracketed by the component quantiles.
inline double margin_quantile(const UniBmaModel& m, std::span<const double> f, double p) {
    return MarginMixture(m, f).quantile(p);
}

namespace detail {

/// Quantiles of many probabilities: a CDF table on a grid narrows each
/// bracket before the shared solver runs.
class QuantileTable {
public:
    QuantileTable(const MarginMixture& mix, double p_min, double p_max, std::size_t points = 1025) : mix_(mix) {
        const double lo = mix.bracket(p_min).first;
        const double hi = mix.bracket(p_max).second;
        x_.resize(points);
        c_.resize(points);
        for (std::size_t i = 0; i < points; ++i) {
            x_[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
            c_[i] = mix.cdf(x_[i]);
        }
    }

    double operator()(double p) const {
        const auto it = std::upper_bound(c_.begin(), c_.end(), p);
        if (it == c_.begin() || it == c_.end()) return mix_.quantile(p);
        const auto i = static_cast<std::size_t>(it - c_.begin());
        const double t = (p - c_[i - 1]) / (c_[i] - c_[i - 1]);
        return mix_.solve(p, x_[i - 1], x_[i], x_[i - 1] + t * (x_[i] - x_[i - 1]));
    }

private:
    const MarginMixture& mix_;
    std::vector<double> x_, c_;
};

}  // namespace detail

inline constexpr double kCdfClamp = 1e-9;
inline constexpr double kMaxLatentCorr = 0.999;

/// Latent Gaussian pair (Phi^-1(F_wind(x_W)), Phi^-1(F_temp(x_T))) of one
/// verified case, CDF values clamped to [1e-9, 1 - 1e-9].
inline Vec2 latent_pair(const ForecastCase& c, const UniBmaModel& wind, const UniBmaModel& temp) {
    std::vector<double> fw, ft;
    for (const auto& f : c.members) {
        fw.push_back(f(0));
        ft.push_back(f(1));
    }
    const double uw = std::clamp(margin_cdf(wind, fw, c.obs(0)), kCdfClamp, 1.0 - kCdfClamp);
    const double ut = std::clamp(margin_cdf(temp, ft, c.obs(1)), kCdfClamp, 1.0 - kCdfClamp);
    return {std_normal_quantile(uw), std_normal_quantile(ut)};
}

/// Pearson correlation of latent pairs, clamped to +-0.999.
inline double latent_correlation(std::span<const Vec2> pairs) {
    std::vector<Vec2> valid;
    for (const auto& z : pairs) if (z.allFinite()) valid.push_back(z);
    if (valid.size() < 10) {
        throw InsufficientHistory("latent correlation needs at least 10 valid pairs, got " +
                                  std::to_string(valid.size()));
    }
    Vec2 mean = Vec2::Zero();
    for (const auto& z : valid) mean += z;
    mean /= static_cast<double>(valid.size());
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& z : valid) {
        const Vec2 d = z - mean;
        sxx += d(0) * d(0);
        syy += d(1) * d(1);
        sxy += d(0) * d(1);
    }
    const double denom = std::sqrt(sxx * syy);
    const double r = denom > 0.0 ? sxy / denom : 0.0;
    return std::clamp(r, -kMaxLatentCorr, kMaxLatentCorr);
}

/// Margins fitted for one historical date together with that date's cases.
struct MarginHistory {
    std::span<const ForecastCase> cases;
    UniBmaModel wind;
    UniBmaModel temp;
};

inline double estimate_latent_corr(std::span<const MarginHistory> history) {
    std::vector<Vec2> pairs;
    for (const auto& h : history) {
        for (const auto& c : h.cases) pairs.push_back(latent_pair(c, h.wind, h.temp));
    }
    return latent_correlation(pairs);
}

/// Latent bivariate normal with correlation `latent_corr`, each coordinate
/// mapped through Phi and the margin's quantile function.
inline std::vector<Vec2> copula_sample(const CopulaModel& cm, std::span<const Vec2> f, std::size_t n,
                                       RandomStream& rng) {
    if (std::abs(cm.latent_corr) >= 1.0) throw InvalidArgument("latent correlation must lie in (-1, 1)");
    std::vector<double> fw, ft;
    for (const auto& v : f) {
        fw.push_back(v(0));
        ft.push_back(v(1));
    }
    const double rho = cm.latent_corr;
    const double comp = std::sqrt(1.0 - rho * rho);
    constexpr double eps = 1e-15;
    const MarginMixture wind(cm.wind_margin, fw), temp(cm.temp_margin, ft);
    const detail::QuantileTable qw(wind, eps, 1.0 - eps), qt(temp, eps, 1.0 - eps);
    std::vector<Vec2> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = rho * z1 + comp * rng.normal();
        const double u1 = std::clamp(std_normal_cdf(z1), eps, 1.0 - eps);
        const double u2 = std::clamp(std_normal_cdf(z2), eps, 1.0 - eps);
        out.emplace_back(qw(u1), qt(u2));
    }
    return out;
}

inline std::vector<Vec2> copula_sample(const CopulaModel& cm, const std::vector<Vec2>& f, std::size_t n,
                                       RandomStream& rng) {
    return copula_sample(cm, std::span<const Vec2>(f), n, rng);
}

inline Vec2 copula_mean(const CopulaModel& cm, std::span<const Vec2> f) {
    std::vector<double> fw, ft;
    for (const auto& v : f) {
        fw.push_back(v(0));
        ft.push_back(v(1));
    }
    return {margin_mean(cm.wind_margin, fw), margin_mean(cm.temp_margin, ft)};
}

}  // namespace bivcal
