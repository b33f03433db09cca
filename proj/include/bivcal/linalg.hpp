#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "bivcal/errors.hpp"

namespace bivcal {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
template <int D>
using Mat = Eigen::Matrix<double, D, D>;

using Vec2 = Vec<2>;
using Mat2 = Mat<2>;

namespace linalg {

template <int D>
Mat<D> symmetrize(const Mat<D>& m) {
    return 0.5 * (m + m.transpose());
}

template <int D>
Vec<D> eigenvalues(const Mat<D>& m) {
    if constexpr (D == 1) {
        return m;
    } else {
        Eigen::SelfAdjointEigenSolver<Mat<D>> solver;
        solver.computeDirect(symmetrize<D>(m), Eigen::EigenvaluesOnly);
        return solver.eigenvalues();
    }
}

/// A scale matrix is accepted when it is finite, symmetric and its smallest
/// eigenvalue is at least 1e-10 times its trace.
template <int D>
bool is_valid_scale(const Mat<D>& m, double relative_floor = 1e-10) {
    if (!m.allFinite()) return false;
    const double trace = m.trace();
    if (!(trace > 0.0)) return false;
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * trace) return false;
    return eigenvalues<D>(m).minCoeff() >= relative_floor * trace;
}

template <int D>
void require_valid_scale(const Mat<D>& m) {
    if (!is_valid_scale<D>(m)) {
        throw InvalidDistribution("scale matrix is not symmetric positive definite");
    }
}

/// Symmetrizes and raises every eigenvalue to at least `floor`.
template <int D>
Mat<D> floor_eigenvalues(const Mat<D>& m, double floor) {
    const Mat<D> s = symmetrize<D>(m);
    if constexpr (D == 1) {
        return Mat<D>::Constant(std::max(s(0, 0), floor));
    } else {
        Eigen::SelfAdjointEigenSolver<Mat<D>> solver;
        solver.computeDirect(s);
        Vec<D> values = solver.eigenvalues().cwiseMax(floor);
        const Mat<D>& vectors = solver.eigenvectors();
        return symmetrize<D>(vectors * values.asDiagonal() * vectors.transpose());
    }
}

}  // namespace linalg
}  // namespace bivcal
