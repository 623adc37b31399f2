#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "stesn/errors.hpp"
#include "stesn/field.hpp"

namespace stesn {

/// Principal-component basis of one variable: Z_t ~ basis * coeff_t + mean.
/// Basis columns are orthonormal leading left singular vectors of the
/// row-centered N x T value matrix; the sign of each column is fixed so its
/// largest-magnitude entry is positive.
struct BasisDecomposition {
  Eigen::MatrixXd basis;            // N x P, orthonormal columns
  Eigen::MatrixXd coefficients;     // P x T, scores of the training data
  int retained = 0;                 // P
  Eigen::VectorXd singular_values;  // length min(N,T), descending
  Eigen::VectorXd column_mean;      // length N, per-location mean over time
  std::vector<Location> locations;  // training grid, for reconstruction
  std::string variable_name;
};

namespace detail {

inline void fix_signs(Eigen::MatrixXd& u) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0.0) u.col(j) = -u.col(j);
  }
}

}  // namespace detail

/// Fits the leading `retained` principal components of a field.
inline BasisDecomposition fit_pca(const SpatioTemporalField& field,
                                  int retained) {
  const Eigen::Index n = field.n_locations();
  const Eigen::Index t = field.n_times();
  const Eigen::Index rank = std::min(n, t);
  if (retained < 1 || retained > rank)
    throw ValidationError("retained components must be in 1.." +
                          std::to_string(rank) + ", got " +
                          std::to_string(retained));

  BasisDecomposition out;
  out.retained = retained;
  out.locations = field.locations();
  out.variable_name = field.name();
  out.column_mean = field.values().rowwise().mean();
  const Eigen::MatrixXd centered =
      field.values().colwise() - out.column_mean;

  if (rank <= 2000) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
    out.singular_values = svd.singularValues();
    out.basis = svd.matrixU().leftCols(retained);
  } else {
    // Eigendecomposition of the smaller Gram matrix; same subspace, cheaper
    // for very tall/wide data.
    const bool tall = n >= t;
    const Eigen::MatrixXd gram = tall ? (centered.transpose() * centered).eval()
                                      : (centered * centered.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    out.singular_values = es.eigenvalues()
                              .reverse()
                              .cwiseMax(0.0)
                              .cwiseSqrt();
    if (tall) {
      out.basis.resize(n, retained);
      for (int j = 0; j < retained; ++j) {
        const Eigen::VectorXd v = es.eigenvectors().col(t - 1 - j);
        out.basis.col(j) = centered * v / out.singular_values[j];
      }
    } else {
      out.basis.resize(n, retained);
      for (int j = 0; j < retained; ++j)
        out.basis.col(j) = es.eigenvectors().col(n - 1 - j);
    }
  }
  detail::fix_signs(out.basis);
  out.coefficients = out.basis.transpose() * centered;
  return out;
}

/// Scores of new data in an existing basis.
inline Eigen::MatrixXd project(const BasisDecomposition& decomp,
                               const SpatioTemporalField& field) {
  if (field.n_locations() != decomp.basis.rows())
    throw ValidationError("basis fitted on " +
                          std::to_string(decomp.basis.rows()) +
                          " locations, field has " +
                          std::to_string(field.n_locations()));
  return decomp.basis.transpose() *
         (field.values().colwise() - decomp.column_mean);
}

/// basis * coefficients + mean, as a raw value matrix.
inline Eigen::MatrixXd reconstruct_values(const BasisDecomposition& decomp,
                                          const Eigen::MatrixXd& coefficients) {
  if (coefficients.rows() != decomp.retained)
    throw ValidationError("coefficient matrix has " +
                          std::to_string(coefficients.rows()) +
                          " rows, basis retains " +
                          std::to_string(decomp.retained));
  return (decomp.basis * coefficients).colwise() + decomp.column_mean;
}

/// Back-transformation to the spatial scale. Time labels default to 0..T'-1
/// when the coefficients do not correspond to the training times.
inline SpatioTemporalField reconstruct(const BasisDecomposition& decomp,
                                       const Eigen::MatrixXd& coefficients,
                                       std::vector<TimeLabel> times = {}) {
  Eigen::MatrixXd values = reconstruct_values(decomp, coefficients);
  if (times.empty()) {
    times.reserve(static_cast<std::size_t>(coefficients.cols()));
    for (Eigen::Index j = 0; j < coefficients.cols(); ++j)
      times.push_back(TimeLabel::index(j));
  }
  return SpatioTemporalField(decomp.locations, std::move(times),
                             std::move(values), decomp.variable_name);
}

}  // namespace stesn
