#pragma once

// Normal distributions whose first coordinate (wind speed) is truncated from
// below at zero. D = 2 is the joint wind/temperature law; D = 1 gives the
// univariate truncated normal (or the plain normal with truncation off) used
// for copula margins.

#include <cmath>
#include <limits>
#include <vector>

#include "bivcal/linalg.hpp"
#include "bivcal/normal.hpp"
#include "bivcal/random.hpp"

namespace bivcal {

template <int D>
struct Moments {
    Vec<D> mean;
    Mat<D> cov;
};

using Moments2 = Moments<2>;

/// Precomputed quantities of a common scale matrix, shared by every
/// component location that uses it.
template <int D>
class ScaleKernel {
    static_assert(D == 1 || D == 2, "only 1 and 2 dimensions are supported");

public:
    explicit ScaleKernel(const Mat<D>& scale, bool truncated = true, bool validate = true)
        : scale_(scale), truncated_(truncated) {
        if (validate) linalg::require_valid_scale<D>(scale);
        Eigen::LLT<Mat<D>> llt(scale);
        if (llt.info() != Eigen::Success || !scale.allFinite()) {
            throw InvalidDistribution("scale matrix is not positive definite");
        }
        chol_ = llt.matrixL();
        inverse_ = llt.solve(Mat<D>::Identity());
        log_det_ = 2.0 * chol_.diagonal().array().log().sum();
        sigma_w_ = std::sqrt(scale(0, 0));
        coupling_ = scale.col(0) / sigma_w_;
    }

    const Mat<D>& scale() const noexcept { return scale_; }
    const Mat<D>& inverse() const noexcept { return inverse_; }
    const Mat<D>& cholesky() const noexcept { return chol_; }
    double log_det() const noexcept { return log_det_; }
    bool truncated() const noexcept { return truncated_; }
    /// Standard deviation of the (untruncated) wind coordinate.
    double sigma_w() const noexcept { return sigma_w_; }
    /// Sigma e_1 / sigma_W: the direction in which truncation moves the mean.
    const Vec<D>& coupling() const noexcept { return coupling_; }

    /// Standardized truncation point mu_W / sigma_W.
    double standardized(const Vec<D>& location) const { return location(0) / sigma_w_; }

    /// phi(t)/Phi(t) at t = mu_W / sigma_W, or 0 when truncation is off.
    double hazard(const Vec<D>& location) const {
        return truncated_ ? normal_hazard(standardized(location)) : 0.0;
    }

    double log_density(const Vec<D>& x, const Vec<D>& location) const {
        if (truncated_ && x(0) < 0.0) return -std::numeric_limits<double>::infinity();
        const Vec<D> r = x - location;
        const double quad = r.dot(inverse_ * r);
        double value = -D * kLogSqrt2Pi - 0.5 * log_det_ - 0.5 * quad;
        if (truncated_) value -= std_normal_log_cdf(standardized(location));
        return value;
    }

    Moments<D> moments(const Vec<D>& location) const {
        if (!truncated_) return {location, scale_};
        const double t = standardized(location);
        const double h = normal_hazard(t);
        Moments<D> m;
        m.mean = location + h * coupling_;
        m.cov = scale_ - (t * h + h * h) * coupling_ * coupling_.transpose();
        return m;
    }

    Vec<D> draw(const Vec<D>& location, RandomStream& rng) const {
        if (!truncated_) return location + chol_ * standard_normal(rng);
        const double t = standardized(location);
        if (std_normal_cdf(t) >= 0.05) {
            for (;;) {
                Vec<D> x = location + chol_ * standard_normal(rng);
                if (x(0) >= 0.0) return x;
            }
        }
        // Wind marginal by inverse CDF on the upper tail, then the rest conditionally.
        const double z = -std_normal_quantile(rng.uniform() * std_normal_cdf(t));
        Vec<D> x;
        x(0) = std::max(0.0, location(0) + sigma_w_ * z);
        if constexpr (D == 2) {
            const double slope = scale_(0, 1) / scale_(0, 0);
            const double resid_var = scale_(1, 1) - slope * scale_(0, 1);
            x(1) = location(1) + slope * (x(0) - location(0)) + std::sqrt(std::max(resid_var, 0.0)) * rng.normal();
        }
        return x;
    }

private:
    static Vec<D> standard_normal(RandomStream& rng) {
        Vec<D> n;
        for (int i = 0; i < D; ++i) n(i) = rng.normal();
        return n;
    }

    Mat<D> scale_;
    Mat<D> inverse_;
    Mat<D> chol_;
    Vec<D> coupling_;
    double log_det_ = 0.0;
    double sigma_w_ = 0.0;
    bool truncated_ = true;
};

/// Normal law N(location, scale) restricted to {x_W >= 0} and renormalized
/// by Phi(mu_W / sigma_W). Immutable.
template <int D>
class TruncatedNormal {
public:
    TruncatedNormal(const Vec<D>& location, const Mat<D>& scale, bool truncated = true)
        : location_(location), kernel_(scale, truncated) {
        if (!location.allFinite()) throw InvalidDistribution("location is not finite");
    }

    const Vec<D>& location() const noexcept { return location_; }
    const Mat<D>& scale() const noexcept { return kernel_.scale(); }
    bool truncated() const noexcept { return kernel_.truncated(); }
    const ScaleKernel<D>& kernel() const noexcept { return kernel_; }

    double log_pdf(const Vec<D>& x) const { return kernel_.log_density(x, location_); }
    double pdf(const Vec<D>& x) const { return std::exp(log_pdf(x)); }
    Moments<D> moments() const { return kernel_.moments(location_); }
    Vec<D> draw(RandomStream& rng) const { return kernel_.draw(location_, rng); }

private:
    Vec<D> location_;
    ScaleKernel<D> kernel_;
};

using TruncBivNormal = TruncatedNormal<2>;

template <int D>
double pdf(const TruncatedNormal<D>& d, const Vec<D>& x) {
    return d.pdf(x);
}

template <int D>
Moments<D> moments(const TruncatedNormal<D>& d) {
    return d.moments();
}

template <int D>
std::vector<Vec<D>> sample(const TruncatedNormal<D>& d, std::size_t n, RandomStream& rng) {
    if (n < 1) throw InvalidArgument("sample size must be at least 1");
    std::vector<Vec<D>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(d.draw(rng));
    return out;
}

}  // namespace bivcal
