#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>

#include "cwr/error.hpp"

namespace cwr {

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = VectorT<double>;
using Matrix = MatrixT<double>;

/// Condition-number bound above which a local fit is retried with a ridge.
inline constexpr double kConditionLimit = 1e12;
/// Fallback ridge, relative to trace(X'WX) / (B + 1).
inline constexpr double kFallbackRidgeFactor = 1e-8;

template <typename Scalar>
struct LocalSolution {
    VectorT<Scalar> beta;
    bool regularized = false;
};

namespace detail {

inline std::string fit_label(std::string_view label) {
    return label.empty() ? std::string("weighted fit") : std::string(label);
}

template <typename DX, typename DY, typename DW>
void check_wls_inputs(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& y,
                      const Eigen::MatrixBase<DW>& w, std::string_view label) {
    if (y.size() != X.rows() || w.size() != X.rows())
        throw DimensionError(fit_label(label) + ": design has " + std::to_string(X.rows()) + " rows but y has " +
                             std::to_string(y.size()) + " and w has " + std::to_string(w.size()));
    if (X.cols() == 0) throw DimensionError(fit_label(label) + ": design has no columns");
    if (!X.allFinite() || !y.allFinite()) throw InputError(fit_label(label) + ": non-finite design or response");
    if (!w.allFinite() || (w.array() < 0).any())
        throw ParameterError(fit_label(label) + ": weights must be finite and nonnegative");
    if (!(w.array() > 0).any()) throw DegenerateWeightsError(fit_label(label) + ": all weights are zero");
}

}  // namespace detail

/// Weighted least squares, argmin_b sum_i w_i (y_i - X_i b)^2 + ridge |b|^2.
///
/// Solved by column-pivoted Householder QR of the row-scaled design
/// sqrt(W) X (augmented with sqrt(ridge) I when ridge > 0), so X'WX is never
/// formed. Throws SingularityError when ridge is zero and the weighted design
/// is rank deficient.
template <typename DX, typename DY, typename DW>
VectorT<typename DX::Scalar> solve_wls(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& y,
                                       const Eigen::MatrixBase<DW>& w, double ridge = 0.0,
                                       std::string_view label = {}) {
    using Scalar = typename DX::Scalar;
    detail::check_wls_inputs(X, y, w, label);
    if (!(ridge >= 0.0) || !std::isfinite(ridge))
        throw ParameterError(detail::fit_label(label) + ": ridge must be finite and nonnegative");

    const Eigen::Index p = X.cols();
    const Eigen::Index extra = ridge > 0.0 ? p : 0;
    MatrixT<Scalar> A(X.rows() + extra, p);
    VectorT<Scalar> b(X.rows() + extra);
    const auto sw = w.array().sqrt().matrix().eval();
    A.topRows(X.rows()) = sw.asDiagonal() * X;
    b.head(X.rows()) = sw.cwiseProduct(y);
    if (extra) {
        A.bottomRows(p) = std::sqrt(static_cast<Scalar>(ridge)) * MatrixT<Scalar>::Identity(p, p);
        b.tail(p).setZero();
    }
    Eigen::ColPivHouseholderQR<MatrixT<Scalar>> qr(A);
    if (qr.rank() < p)
        throw SingularityError(detail::fit_label(label) + ": X'WX is singular (rank " + std::to_string(qr.rank()) +
                               " < " + std::to_string(p) + ")");
    return qr.solve(b);
}

/// Ordinary least squares; identical to solve_wls with unit weights.
template <typename DX, typename DY>
VectorT<typename DX::Scalar> fit_ols(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& y,
                                     std::string_view label = {}) {
    return solve_wls(X, y, VectorT<typename DX::Scalar>::Ones(X.rows()), 0.0, label);
}

template <typename DX, typename DB>
VectorT<typename DX::Scalar> predict(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DB>& beta) {
    if (X.cols() != beta.size())
        throw DimensionError("design has " + std::to_string(X.cols()) + " columns but beta has " +
                             std::to_string(beta.size()) + " entries");
    return X * beta;
}

/// Solves the p x p normal equations gram * b = moment for a local fit.
///
/// The system is Jacobi-equilibrated (unit diagonal) before an LDLT
/// factorization. If the reciprocal condition estimate of the equilibrated
/// system is below 1 / kConditionLimit, the solve is repeated with
/// ridge = kFallbackRidgeFactor * trace(gram) / p and the result is flagged.
template <typename DG, typename DM>
LocalSolution<typename DG::Scalar> solve_normal_equations(const Eigen::MatrixBase<DG>& gram,
                                                          const Eigen::MatrixBase<DM>& moment,
                                                          std::string_view label = {}) {
    using Scalar = typename DG::Scalar;
    const Eigen::Index p = gram.rows();
    if (gram.cols() != p || moment.size() != p)
        throw DimensionError(detail::fit_label(label) + ": normal equations are not square");
    const Scalar trace = gram.trace();
    if (!(trace > Scalar(0)) || !std::isfinite(static_cast<double>(trace)))
        throw DegenerateWeightsError(detail::fit_label(label) + ": no positive weight reaches this location");

    VectorT<Scalar> inv_scale(p);
    for (Eigen::Index a = 0; a < p; ++a) {
        const Scalar g = gram(a, a);
        inv_scale(a) = g > Scalar(0) ? Scalar(1) / std::sqrt(g) : Scalar(1);
    }
    MatrixT<Scalar> eq = inv_scale.asDiagonal() * gram * inv_scale.asDiagonal();
    const VectorT<Scalar> rhs = inv_scale.cwiseProduct(moment);

    LocalSolution<Scalar> out;
    Eigen::LDLT<MatrixT<Scalar>> ldlt(eq);
    // rcond() treats an exactly zero pivot as a pseudo-inverse, so the pivot
    // ratio is checked as well.
    const Scalar limit = Scalar(1) / static_cast<Scalar>(kConditionLimit);
    const bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                    ldlt.vectorD().minCoeff() > limit * ldlt.vectorD().maxCoeff() && ldlt.rcond() >= limit;
    if (!ok) {
        const Scalar ridge = static_cast<Scalar>(kFallbackRidgeFactor) * trace / static_cast<Scalar>(p);
        eq.diagonal() += ridge * inv_scale.cwiseAbs2();
        ldlt.compute(eq);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw SingularityError(detail::fit_label(label) + ": X'WX is singular even after ridge fallback");
        out.regularized = true;
    }
    out.beta = inv_scale.cwiseProduct(ldlt.solve(rhs));
    if (!out.beta.allFinite())
        throw SingularityError(detail::fit_label(label) + ": non-finite coefficients");
    return out;
}

/// Weighted fit with the near-singularity ridge fallback used for local
/// models. Returns the coefficients and whether the ridge was applied.
template <typename DX, typename DY, typename DW>
LocalSolution<typename DX::Scalar> solve_local_wls(const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DY>& y,
                                                   const Eigen::MatrixBase<DW>& w, std::string_view label = {}) {
    using Scalar = typename DX::Scalar;
    detail::check_wls_inputs(X, y, w, label);
    const MatrixT<Scalar> wx = w.asDiagonal() * X;
    const MatrixT<Scalar> gram = X.transpose() * wx;
    const VectorT<Scalar> moment = wx.transpose() * y;
    return solve_normal_equations(gram, moment, label);
}

/// Root mean squared difference.
template <typename DA, typename DB>
double rmse(const Eigen::MatrixBase<DA>& actual, const Eigen::MatrixBase<DB>& predicted) {
    if (actual.size() != predicted.size())
        throw DimensionError("rmse: length mismatch (" + std::to_string(actual.size()) + " vs " +
                             std::to_string(predicted.size()) + ")");
    if (actual.size() == 0) throw DimensionError("rmse: empty input");
    return std::sqrt(static_cast<double>((actual - predicted).squaredNorm()) / static_cast<double>(actual.size()));
}

}  // namespace cwr
