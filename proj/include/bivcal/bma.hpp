#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "bivcal/dists.hpp"
#include "bivcal/groups.hpp"
#include "bivcal/median.hpp"

namespace bivcal {

/// full: one affine location map per group. parsimonious: a single map shared by all members.
enum class Mode { full, parsimonious };

inline std::string_view to_string(Mode mode) {
    return mode == Mode::full ? "full" : "parsimonious";
}

inline Mode parse_mode(std::string_view name) {
    if (name == "full") return Mode::full;
    if (name == "parsimonious") return Mode::parsimonious;
    throw InvalidArgument("unknown mode '" + std::string(name) + "'");
}

/// BMA mixture sum_m w_m g(x | A + B f_m, Sigma) with affine component
/// locations and a common scale matrix. Weights are stored per group: every
/// member of group k carries weight `weights[k]`, and the total mass is
/// sum_k M_k * weights[k] = 1.
template <int D>
struct AffineMixture {
    GroupSpec groups;
    Mode mode = Mode::full;
    bool truncated = true;
    std::vector<double> weights;
    std::vector<Vec<D>> intercepts;
    std::vector<Mat<D>> slopes;
    Mat<D> scale = Mat<D>::Identity();

    std::size_t member_count() const noexcept { return groups.member_count(); }

    std::size_t parameter_set_count() const noexcept {
        return mode == Mode::full ? groups.group_count() : 1;
    }

    std::size_t parameter_set_of_group(std::size_t group) const noexcept {
        return mode == Mode::full ? group : 0;
    }

    std::size_t parameter_set_of_member(std::size_t member) const {
        return parameter_set_of_group(groups.group_of(member));
    }

    double member_weight(std::size_t member) const { return weights[groups.group_of(member)]; }

    Vec<D> location(std::size_t member, const Vec<D>& forecast) const {
        const std::size_t p = parameter_set_of_member(member);
        return intercepts[p] + slopes[p] * forecast;
    }

    double total_mass() const {
        double s = 0.0;
        for (std::size_t k = 0; k < groups.group_count(); ++k) {
            s += static_cast<double>(groups.group_size(k)) * weights[k];
        }
        return s;
    }

    void validate() const {
        if (groups.group_count() == 0) throw InvalidArgument("model has no groups");
        if (weights.size() != groups.group_count()) throw InvalidArgument("one weight per group required");
        if (intercepts.size() != parameter_set_count() || slopes.size() != parameter_set_count()) {
            throw InvalidArgument("intercept/slope count does not match the mode");
        }
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weights must be nonnegative");
        }
        if (std::abs(total_mass() - 1.0) > 1e-9) throw InvalidArgument("mixture weights do not sum to one");
        linalg::require_valid_scale<D>(scale);
    }
};

using BmaModel = AffineMixture<2>;
using ForecastVector = std::vector<Vec2>;

namespace detail {

template <int D>
void check_members(const AffineMixture<D>& model, std::span<const Vec<D>> f) {
    if (f.size() != model.member_count()) {
        throw InvalidArgument("forecast has " + std::to_string(f.size()) + " members, model expects " +
                              std::to_string(model.member_count()));
    }
}

}  // namespace detail

template <int D>
double predictive_pdf(const AffineMixture<D>& model, std::span<const Vec<D>> f, const Vec<D>& x) {
    detail::check_members(model, f);
    const ScaleKernel<D> kernel(model.scale, model.truncated);
    double density = 0.0;
    for (std::size_t m = 0; m < f.size(); ++m) {
        const double w = model.member_weight(m);
        if (w == 0.0) continue;
        density += w * std::exp(kernel.log_density(x, model.location(m, f[m])));
    }
    return density;
}

template <int D>
double predictive_pdf(const AffineMixture<D>& model, const std::vector<Vec<D>>& f, const Vec<D>& x) {
    return predictive_pdf<D>(model, std::span<const Vec<D>>(f), x);
}

/// Component selection by weight, then a draw from that component.
template <int D>
std::vector<Vec<D>> predictive_sample(const AffineMixture<D>& model, std::span<const Vec<D>> f,
                                      std::size_t n, RandomStream& rng) {
    detail::check_members(model, f);
    const ScaleKernel<D> kernel(model.scale, model.truncated);
    std::vector<double> cumulative(f.size());
    std::vector<Vec<D>> locations(f.size());
    double acc = 0.0;
    for (std::size_t m = 0; m < f.size(); ++m) {
        acc += model.member_weight(m);
        cumulative[m] = acc;
        locations[m] = model.location(m, f[m]);
    }
    std::vector<Vec<D>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * acc;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), f.size() - 1);
        while (model.member_weight(m) == 0.0 && m > 0) --m;  // u landed on a zero-width interval
        out.push_back(kernel.draw(locations[m], rng));
    }
    return out;
}

template <int D>
std::vector<Vec<D>> predictive_sample(const AffineMixture<D>& model, const std::vector<Vec<D>>& f,
                                      std::size_t n, RandomStream& rng) {
    return predictive_sample<D>(model, std::span<const Vec<D>>(f), n, rng);
}

/// Exact mixture mean: weighted sum of the component truncated means.
template <int D>
Vec<D> predictive_mean(const AffineMixture<D>& model, std::span<const Vec<D>> f) {
    detail::check_members(model, f);
    const ScaleKernel<D> kernel(model.scale, model.truncated);
    Vec<D> mean = Vec<D>::Zero();
    for (std::size_t m = 0; m < f.size(); ++m) {
        mean += model.member_weight(m) * kernel.moments(model.location(m, f[m])).mean;
    }
    return mean;
}

template <int D>
Vec<D> predictive_mean(const AffineMixture<D>& model, const std::vector<Vec<D>>& f) {
    return predictive_mean<D>(model, std::span<const Vec<D>>(f));
}

inline constexpr std::size_t kDefaultMedianSample = 10000;

/// Geometric median of an `n_sample` draw from the predictive distribution.
template <int D>
Vec<D> predictive_median(const AffineMixture<D>& model, std::span<const Vec<D>> f, RandomStream& rng,
                         std::size_t n_sample = kDefaultMedianSample) {
    if (n_sample < 1000) throw InvalidArgument("predictive_median needs at least 1000 draws");
    const auto draws = predictive_sample<D>(model, f, n_sample, rng);
    return geometric_median<D>(std::span<const Vec<D>>(draws));
}

template <int D>
Vec<D> predictive_median(const AffineMixture<D>& model, const std::vector<Vec<D>>& f, RandomStream& rng,
                         std::size_t n_sample = kDefaultMedianSample) {
    return predictive_median<D>(model, std::span<const Vec<D>>(f), rng, n_sample);
}

}  // namespace bivcal
