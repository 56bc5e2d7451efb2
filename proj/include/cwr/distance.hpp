#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cwr/error.hpp"

namespace cwr {

/// Projected planar coordinates, one row per observation: column 0 is the
/// easting u, column 1 the northing v, both in meters.
template <typename Scalar>
using CoordinatesT = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;
using Coordinates = CoordinatesT<double>;

/// Pairwise distances; rows index queries (or the first set), columns index
/// training observations.
template <typename Scalar>
using DistanceMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using DistanceMatrix = DistanceMatrixT<double>;

enum class Normalization { max_scale, none };

/// How the kernel distance is assembled: `rate` = 1 is purely geographic,
/// `rate` = 0 purely attribute-based.
struct DistanceSpec {
    double rate = 1.0;
    std::vector<std::string> attribute_columns;
    Normalization normalization = Normalization::max_scale;

    void validate() const {
        if (!(rate >= 0.0 && rate <= 1.0))
            throw ParameterError("blend rate must lie in [0, 1], got " + std::to_string(rate));
        if (rate < 1.0 && attribute_columns.empty())
            throw ParameterError("blend rate below 1 requires at least one attribute column");
    }

    bool uses_attributes() const { return rate < 1.0; }
};

/// Divisors applied to geographic and attribute distances. Fitted once on
/// training pairs and reused for query-to-training distances.
struct DistanceScales {
    double geo = 1.0;
    double attr = 1.0;
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
    if (!m.allFinite())
        throw InputError(std::string(what) + " contains non-finite values");
}

}  // namespace detail

/// Euclidean distance between every row of `a` and every row of `b`.
template <typename DA, typename DB>
DistanceMatrixT<typename DA::Scalar> geographic_distances(const Eigen::MatrixBase<DA>& a,
                                                          const Eigen::MatrixBase<DB>& b) {
    using Scalar = typename DA::Scalar;
    if (a.cols() != 2 || b.cols() != 2)
        throw DimensionError("coordinates must have exactly two columns (u, v)");
    detail::require_finite(a, "coordinates");
    detail::require_finite(b, "coordinates");
    DistanceMatrixT<Scalar> d(a.rows(), b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
        d.col(j) = ((a.col(0).array() - b(j, 0)).square() + (a.col(1).array() - b(j, 1)).square()).sqrt();
    }
    return d;
}

/// Pairwise distances within one set; exactly symmetric with a zero diagonal.
template <typename D>
DistanceMatrixT<typename D::Scalar> geographic_distances(const Eigen::MatrixBase<D>& a) {
    auto d = geographic_distances(a, a);
    d.template triangularView<Eigen::StrictlyLower>() = d.transpose().eval();
    d.diagonal().setZero();
    return d;
}

/// Euclidean distance in (already standardized) attribute space.
template <typename DA, typename DB>
DistanceMatrixT<typename DA::Scalar> attribute_distances(const Eigen::MatrixBase<DA>& a,
                                                         const Eigen::MatrixBase<DB>& b) {
    using Scalar = typename DA::Scalar;
    if (a.cols() != b.cols())
        throw DimensionError("attribute vectors differ in length: " + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.cols()));
    detail::require_finite(a, "attributes");
    detail::require_finite(b, "attributes");
    DistanceMatrixT<Scalar> d(a.rows(), b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
        d.col(j) = (a.rowwise() - b.row(j)).rowwise().norm();
    }
    return d;
}

template <typename D>
DistanceMatrixT<typename D::Scalar> attribute_distances(const Eigen::MatrixBase<D>& a) {
    auto d = attribute_distances(a, a);
    d.template triangularView<Eigen::StrictlyLower>() = d.transpose().eval();
    d.diagonal().setZero();
    return d;
}

/// Convex blend `rate * geo + (1 - rate) * attr`. The endpoints return the
/// corresponding input unchanged, and every entry stays within the pair's
/// [min, max] even under rounding.
template <typename DG, typename DA>
DistanceMatrixT<typename DG::Scalar> blend_distances(const Eigen::MatrixBase<DG>& geo,
                                                     const Eigen::MatrixBase<DA>& attr, double rate) {
    using Scalar = typename DG::Scalar;
    if (!(rate >= 0.0 && rate <= 1.0))
        throw ParameterError("blend rate must lie in [0, 1], got " + std::to_string(rate));
    if (geo.rows() != attr.rows() || geo.cols() != attr.cols())
        throw DimensionError("geographic and attribute distance matrices differ in shape");
    if (rate == 1.0) return geo;
    if (rate == 0.0) return attr;
    const Scalar r = static_cast<Scalar>(rate);
    DistanceMatrixT<Scalar> out = r * geo.array() + (Scalar(1) - r) * attr.array();
    return out.cwiseMax(geo.cwiseMin(attr)).cwiseMin(geo.cwiseMax(attr));
}

namespace detail {

/// exp(-t) for t = (d / h)^2 >= 0. Results below the smallest normal number
/// are flushed to zero: the vectorized exp clamps its argument, which would
/// otherwise give every far point the same tiny nonzero weight.
template <typename D>
DistanceMatrixT<typename D::Scalar> kernel_from_scaled_square(const Eigen::ArrayBase<D>& t) {
    using Scalar = typename D::Scalar;
    static const Scalar cutoff = -std::log(std::numeric_limits<Scalar>::min());
    return (t < cutoff).select((-t).exp(), Scalar(0)).matrix();
}

}  // namespace detail

/// Gaussian kernel exp(-d^2 / h^2), applied entry-wise.
template <typename D>
DistanceMatrixT<typename D::Scalar> gaussian_weights(const Eigen::MatrixBase<D>& d, double bandwidth) {
    using Scalar = typename D::Scalar;
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw ParameterError("bandwidth must be positive and finite, got " + std::to_string(bandwidth));
    const Scalar h = static_cast<Scalar>(bandwidth);
    return detail::kernel_from_scaled_square((d.array() / h).square());
}

/// Largest entry, or 1 when the matrix is empty or all zero.
template <typename D>
double max_scale(const Eigen::MatrixBase<D>& d) {
    if (d.size() == 0) return 1.0;
    const double m = static_cast<double>(d.maxCoeff());
    return (m > 0.0 && std::isfinite(m)) ? m : 1.0;
}

inline DistanceScales fit_scales(const DistanceMatrix& geo_train, const DistanceMatrix& attr_train,
                                 Normalization mode) {
    if (mode == Normalization::none) return {};
    return {max_scale(geo_train), attr_train.size() ? max_scale(attr_train) : 1.0};
}

}  // namespace cwr
