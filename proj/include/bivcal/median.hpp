#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "bivcal/linalg.hpp"

namespace bivcal {

/// Sum of Euclidean distances from `y` to the points.
template <int D>
double median_objective(std::span<const Vec<D>> points, const Vec<D>& y) {
    double s = 0.0;
    for (const auto& p : points) s += (p - y).norm();
    return s;
}

namespace detail {

// Subgradient optimality of the anchor `points[j]`: the pull of the other
// points must not exceed the number of points sitting exactly on it.
template <int D>
bool anchor_is_optimal(std::span<const Vec<D>> points, std::size_t j) {
    const Vec<D>& a = points[j];
    Vec<D> pull = Vec<D>::Zero();
    double multiplicity = 0.0;
    for (const auto& p : points) {
        const double d = (p - a).norm();
        if (d == 0.0) {
            multiplicity += 1.0;
        } else {
            pull += (p - a) / d;
        }
    }
    return pull.norm() <= multiplicity;
}

}  // namespace detail

/// Geometric (spatial) median by Weiszfeld iteration started at the
/// coordinate-wise mean. When the iterate sits on a data point the plain
/// update is undefined; the point is accepted if the subgradient condition
/// holds, otherwise a step halved from 0.5 toward the update on the remaining
/// points is taken. Stops when the iterate moves less than `tol`.
template <int D>
Vec<D> geometric_median(std::span<const Vec<D>> points, double tol = 1e-9, int max_iter = 1000) {
    if (points.empty()) throw InvalidArgument("geometric_median of an empty point set");
    if (points.size() == 1) return points.front();

    Vec<D> y = Vec<D>::Zero();
    for (const auto& p : points) y += p;
    y /= static_cast<double>(points.size());

    for (int iter = 0; iter < max_iter; ++iter) {
        Vec<D> weighted = Vec<D>::Zero();
        double inverse_sum = 0.0;
        double total = 0.0;
        double nearest = std::numeric_limits<double>::infinity();
        std::size_t nearest_index = 0;
        std::size_t coincident = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double d = (points[i] - y).norm();
            total += d;
            if (d < nearest) {
                nearest = d;
                nearest_index = i;
            }
            if (d == 0.0) {
                ++coincident;
                continue;
            }
            weighted += points[i] / d;
            inverse_sum += 1.0 / d;
        }
        if (inverse_sum == 0.0) return y;  // all points coincide with y

        const double mean_distance = total / static_cast<double>(points.size());
        if (nearest < 0.1 * mean_distance && detail::anchor_is_optimal<D>(points, nearest_index)) {
            return points[nearest_index];
        }

        const Vec<D> update = weighted / inverse_sum;
        Vec<D> next = update;
        if (coincident > 0) {
            const double current = median_objective<D>(points, y);
            const Vec<D> step = update - y;
            double alpha = 0.5;
            next = y + alpha * step;
            while (alpha > 1e-12 && median_objective<D>(points, next) >= current) {
                alpha *= 0.5;
                next = y + alpha * step;
            }
            if (alpha <= 1e-12) return y;
        }
        const double moved = (next - y).norm();
        y = next;
        if (moved < tol) break;
    }
    return y;
}

template <int D>
Vec<D> geometric_median(const std::vector<Vec<D>>& points, double tol = 1e-9, int max_iter = 1000) {
    return geometric_median<D>(std::span<const Vec<D>>(points), tol, max_iter);
}

}  // namespace bivcal
