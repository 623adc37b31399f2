#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <vector>

#include "stesn/basis.hpp"
#include "stesn/field.hpp"
#include "stesn/rng.hpp"

using stesn::BasisDecomposition;
using stesn::SpatioTemporalField;
using stesn::ValidationError;

namespace {

SpatioTemporalField make_field(const Eigen::MatrixXd& values) {
  std::vector<stesn::Location> locs;
  for (int i = 0; i < values.rows(); ++i)
    locs.push_back({static_cast<double>(i), 0.0});
  std::vector<stesn::TimeLabel> times;
  for (int j = 0; j < values.cols(); ++j)
    times.push_back(stesn::TimeLabel::index(j));
  return {std::move(locs), std::move(times), values, "x"};
}

Eigen::MatrixXd random_matrix(int n, int t, std::uint64_t seed) {
  stesn::Rng rng(seed);
  Eigen::MatrixXd m(n, t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j) m(i, j) = rng.normal();
  return m;
}

// Independent route to the singular values: eigendecomposition of the Gram
// matrix of the centered data.
Eigen::VectorXd gram_singular_values(const Eigen::MatrixXd& values) {
  const Eigen::VectorXd mean = values.rowwise().mean();
  const Eigen::MatrixXd centered = values.colwise() - mean;
  const Eigen::MatrixXd gram = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  return es.eigenvalues().reverse().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

TEST_CASE("rank-1 field reconstructs exactly with one component") {
  stesn::Rng rng(5);
  Eigen::VectorXd u(8), v(12);
  for (int i = 0; i < 8; ++i) u[i] = rng.normal();
  for (int j = 0; j < 12; ++j) v[j] = rng.normal();
  u.normalize();
  Eigen::MatrixXd values = u * v.transpose();
  // keep the column means zero so rank stays 1 after centering
  values.colwise() -= values.rowwise().mean().eval();

  auto field = make_field(values);
  const BasisDecomposition decomp = stesn::fit_pca(field, 1);
  const Eigen::MatrixXd rec =
      stesn::reconstruct_values(decomp, decomp.coefficients);
  CHECK((rec - values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("full-rank retention reproduces the field") {
  auto field = make_field(random_matrix(9, 14, 6));
  const BasisDecomposition decomp = stesn::fit_pca(field, 9);
  const Eigen::MatrixXd rec =
      stesn::reconstruct_values(decomp, decomp.coefficients);
  CHECK((rec - field.values()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("retained out of range is rejected") {
  auto field = make_field(random_matrix(5, 8, 7));
  CHECK_THROWS_AS(stesn::fit_pca(field, 0), ValidationError);
  CHECK_THROWS_AS(stesn::fit_pca(field, 6), ValidationError);
}

TEST_CASE("orthonormality and descending singular values") {
  auto field = make_field(random_matrix(30, 25, 8));
  const BasisDecomposition decomp = stesn::fit_pca(field, 10);
  const Eigen::MatrixXd gram = decomp.basis.transpose() * decomp.basis;
  CHECK((gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() <
        1e-10);
  for (int j = 1; j < decomp.singular_values.size(); ++j)
    CHECK(decomp.singular_values[j - 1] >= decomp.singular_values[j]);
  CHECK(decomp.singular_values.minCoeff() >= 0.0);
}

TEST_CASE("reconstruction SSE equals the discarded spectrum") {
  // independent oracle: Gram-matrix eigendecomposition
  for (std::uint64_t seed : {1, 2, 3}) {
    auto field = make_field(random_matrix(100, 70, seed));
    const Eigen::VectorXd sv = gram_singular_values(field.values());
    const BasisDecomposition decomp = stesn::fit_pca(field, 5);

    CHECK((decomp.singular_values.head(5) - sv.head(5)).cwiseAbs().maxCoeff() <
          1e-6 * sv[0]);

    const Eigen::MatrixXd rec =
        stesn::reconstruct_values(decomp, decomp.coefficients);
    const double sse = (rec - field.values()).squaredNorm();
    const double expected = sv.tail(sv.size() - 5).squaredNorm();
    CHECK(sse == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("sign convention makes the decomposition deterministic") {
  auto field = make_field(random_matrix(20, 15, 9));
  const BasisDecomposition decomp = stesn::fit_pca(field, 4);
  for (int j = 0; j < 4; ++j) {
    Eigen::Index imax = 0;
    decomp.basis.col(j).cwiseAbs().maxCoeff(&imax);
    CHECK(decomp.basis(imax, j) > 0.0);
  }
}

TEST_CASE("project recovers the stored coefficients") {
  auto field = make_field(random_matrix(12, 20, 10));
  const BasisDecomposition decomp = stesn::fit_pca(field, 3);
  const Eigen::MatrixXd scores = stesn::project(decomp, field);
  CHECK((scores - decomp.coefficients).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("projecting the broadcast mean gives zero coefficients") {
  auto field = make_field(random_matrix(12, 20, 11));
  const BasisDecomposition decomp = stesn::fit_pca(field, 3);
  const Eigen::MatrixXd mean_broadcast =
      decomp.column_mean.replicate(1, field.n_times());
  const Eigen::MatrixXd scores =
      stesn::project(decomp, field.with_values(mean_broadcast));
  CHECK(scores.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("project then reconstruct is idempotent on the basis span") {
  auto field = make_field(random_matrix(15, 18, 12));
  const BasisDecomposition decomp = stesn::fit_pca(field, 4);
  const Eigen::MatrixXd rec =
      stesn::reconstruct_values(decomp, decomp.coefficients);
  const Eigen::MatrixXd scores2 =
      stesn::project(decomp, field.with_values(rec));
  CHECK((scores2 - decomp.coefficients).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("reconstruct with zero coefficients gives the mean field") {
  auto field = make_field(random_matrix(10, 10, 13));
  const BasisDecomposition decomp = stesn::fit_pca(field, 2);
  const Eigen::MatrixXd rec = stesn::reconstruct_values(
      decomp, Eigen::MatrixXd::Zero(2, 3));
  for (int j = 0; j < 3; ++j)
    CHECK((rec.col(j) - decomp.column_mean).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("unit coefficient reconstructs one basis column plus mean") {
  auto field = make_field(random_matrix(10, 10, 14));
  const BasisDecomposition decomp = stesn::fit_pca(field, 2);
  Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(2, 1);
  e1(0, 0) = 1.0;
  const Eigen::MatrixXd rec = stesn::reconstruct_values(decomp, e1);
  CHECK((rec.col(0) - decomp.basis.col(0) - decomp.column_mean)
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("dimension mismatches are rejected") {
  auto field = make_field(random_matrix(10, 10, 15));
  const BasisDecomposition decomp = stesn::fit_pca(field, 2);
  auto wrong = make_field(random_matrix(11, 10, 16));
  CHECK_THROWS_AS(stesn::project(decomp, wrong), ValidationError);
  CHECK_THROWS_AS(stesn::reconstruct_values(decomp, Eigen::MatrixXd::Zero(3, 4)),
                  ValidationError);
}
