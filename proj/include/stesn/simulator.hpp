#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "stesn/errors.hpp"
#include "stesn/field.hpp"
#include "stesn/rng.hpp"

namespace stesn {

/// Parameters of the synthetic data-generating mechanism: two AR(1) Gaussian
/// process covariates with Gaussian-bump means on a unit-square lattice, a
/// spatio-temporal random effect, white noise, and a linear response driven by
/// the second covariate only.
struct SimConfig {
  int grid_side = 10;  ///< N = grid_side^2
  int t_len = 70;
  double sigma_z = 0.2;
  double sigma_delta = 0.2;
  double sigma_eps = 0.2;
  double phi_z = 0.1;
  double phi_delta = 0.1;
  double rho_z = 0.8;
  double rho_delta = 0.8;
  double beta = 1.0;
  int n_datasets = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (grid_side < 2) throw ValidationError("grid_side must be >= 2");
    if (t_len < 1) throw ValidationError("T must be >= 1");
    if (sigma_z <= 0.0 || sigma_delta <= 0.0 || sigma_eps <= 0.0)
      throw ValidationError("sigma parameters must be > 0");
    if (phi_z <= 0.0 || phi_delta <= 0.0)
      throw ValidationError("phi parameters must be > 0");
    if (n_datasets < 1) throw ValidationError("n_datasets must be >= 1");
  }
};

/// Equally spaced grid_side x grid_side lattice spanning [0,1]^2, row-major.
inline std::vector<Location> lattice_locations(int grid_side) {
  if (grid_side < 2) throw ValidationError("grid_side must be >= 2");
  std::vector<Location> out;
  out.reserve(static_cast<std::size_t>(grid_side) * grid_side);
  const double step = 1.0 / (grid_side - 1);
  for (int i = 0; i < grid_side; ++i)
    for (int j = 0; j < grid_side; ++j)
      out.push_back({i * step, j * step});
  return out;
}

/// Squared exponential kernel: sigma^2 * exp(-||s_i - s_j||^2 / (2 phi^2)).
inline Eigen::MatrixXd sq_exp_covariance(const std::vector<Location>& locations,
                                         double phi, double sigma) {
  if (phi <= 0.0 || sigma <= 0.0)
    throw ValidationError("phi and sigma must be > 0");
  const auto n = static_cast<Eigen::Index>(locations.size());
  Eigen::MatrixXd cov(n, n);
  const double s2 = sigma * sigma;
  const double inv = 1.0 / (2.0 * phi * phi);
  for (Eigen::Index i = 0; i < n; ++i) {
    cov(i, i) = s2;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = locations[static_cast<std::size_t>(i)].x -
                        locations[static_cast<std::size_t>(j)].x;
      const double dy = locations[static_cast<std::size_t>(i)].y -
                        locations[static_cast<std::size_t>(j)].y;
      cov(i, j) = cov(j, i) = s2 * std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
  return cov;
}

/// Gaussian-bump mean of covariate k at time t (1-indexed): sd 6, centered at
/// t=20 for k=1 and t=45 for k=2.
inline double mean_function(int k, int t) {
  if (k != 1 && k != 2) throw ValidationError("covariate index must be 1 or 2");
  const double center = (k == 1) ? 20.0 : 45.0;
  const double d = t - center;
  return std::exp(-d * d / 72.0) / (std::sqrt(2.0 * std::numbers::pi) * 6.0);
}

/// Lower-triangular factor of a PSD matrix, with a small diagonal jitter
/// before factorization; eigendecomposition fallback for near-singular
/// kernels.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols())
    throw ValidationError("covariance must be square");
  if (!cov.isApprox(cov.transpose(), 1e-12))
    throw ValidationError("covariance must be symmetric");
  Eigen::MatrixXd jittered = cov;
  const double scale = cov.diagonal().maxCoeff();
  jittered.diagonal().array() += 1e-10 * scale;
  Eigen::LLT<Eigen::MatrixXd> llt(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jittered);
  if (es.eigenvalues().minCoeff() < -1e-8 * std::max(scale, 1.0))
    throw ValidationError("covariance is not positive semidefinite");
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// mean + L z with z standard normal; one draw per coordinate.
inline Eigen::VectorXd sample_mvn_with_factor(const Eigen::VectorXd& mean,
                                              const Eigen::MatrixXd& factor,
                                              Rng& rng) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + factor * z;
}

inline Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& cov, Rng& rng) {
  if (cov.rows() != mean.size())
    throw ValidationError("covariance sized " + std::to_string(cov.rows()) +
                          ", mean sized " + std::to_string(mean.size()));
  return sample_mvn_with_factor(mean, psd_factor(cov), rng);
}

/// Nonstationary AR(1) recursion with spatially correlated innovations:
/// column 1 is mu_1 + eta_1, later columns mu_t + rho * previous + eta_t.
/// `mean_series` may be empty for a zero mean. Innovations are recorded in
/// `innovations_out` when given (column t-1 holds eta_t).
inline Eigen::MatrixXd simulate_ar_process(
    const Eigen::MatrixXd& mean_series, double rho, const Eigen::MatrixXd& cov,
    int t_len, Rng& rng, Eigen::MatrixXd* innovations_out = nullptr) {
  if (t_len < 1) throw ValidationError("T must be >= 1");
  const Eigen::Index n = cov.rows();
  if (mean_series.size() != 0 &&
      (mean_series.rows() != n || mean_series.cols() != t_len))
    throw ValidationError("mean series must be N x T or empty");
  const Eigen::MatrixXd factor = psd_factor(cov);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  auto mean_at = [&](int t) -> Eigen::VectorXd {
    return mean_series.size() == 0 ? zero : mean_series.col(t - 1).eval();
  };

  Eigen::MatrixXd out(n, t_len);
  if (innovations_out) innovations_out->resize(n, t_len);
  for (int t = 1; t <= t_len; ++t) {
    const Eigen::VectorXd eta = sample_mvn_with_factor(zero, factor, rng);
    if (innovations_out) innovations_out->col(t - 1) = eta;
    if (t == 1)
      out.col(0) = mean_at(1) + eta;
    else
      out.col(t - 1) = mean_at(t) + rho * out.col(t - 2) + eta;
  }
  return out;
}

/// One simulated dataset; the random-effect and noise draws are retained so
/// tests can rebuild the response exactly.
struct SimDataset {
  SpatioTemporalField z1;
  SpatioTemporalField z2;
  SpatioTemporalField zy;
  Eigen::MatrixXd delta;
  Eigen::MatrixXd eps;
  SimConfig config;
  int dataset_index = 0;
};

/// Simulates one dataset. Sub-draws use disjoint named streams derived from
/// (seed, dataset_index), so datasets are reproducible under any schedule.
inline SimDataset simulate_dataset(const SimConfig& config, int dataset_index) {
  config.validate();
  if (dataset_index < 0) throw ValidationError("dataset index must be >= 0");
  const auto idx = static_cast<std::uint64_t>(dataset_index);

  std::vector<Location> locations = lattice_locations(config.grid_side);
  const auto n = static_cast<Eigen::Index>(locations.size());
  const int t_len = config.t_len;

  const Eigen::MatrixXd cov_z =
      sq_exp_covariance(locations, config.phi_z, config.sigma_z);
  const Eigen::MatrixXd cov_delta =
      sq_exp_covariance(locations, config.phi_delta, config.sigma_delta);

  Eigen::MatrixXd mean1(n, t_len), mean2(n, t_len);
  for (int t = 1; t <= t_len; ++t) {
    mean1.col(t - 1).setConstant(mean_function(1, t));
    mean2.col(t - 1).setConstant(mean_function(2, t));
  }

  Rng rng_z1 = derive_stream(config.seed, {idx, 1});
  Rng rng_z2 = derive_stream(config.seed, {idx, 2});
  Rng rng_delta = derive_stream(config.seed, {idx, 3});
  Rng rng_eps = derive_stream(config.seed, {idx, 4});

  Eigen::MatrixXd z1 =
      simulate_ar_process(mean1, config.rho_z, cov_z, t_len, rng_z1);
  Eigen::MatrixXd z2 =
      simulate_ar_process(mean2, config.rho_z, cov_z, t_len, rng_z2);
  Eigen::MatrixXd delta = simulate_ar_process({}, config.rho_delta, cov_delta,
                                              t_len, rng_delta);
  Eigen::MatrixXd eps(n, t_len);
  for (Eigen::Index j = 0; j < t_len; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      eps(i, j) = config.sigma_eps * rng_eps.normal();

  Eigen::MatrixXd zy = config.beta * z2 + delta + eps;

  std::vector<TimeLabel> times;
  times.reserve(static_cast<std::size_t>(t_len));
  for (int t = 1; t <= t_len; ++t) times.push_back(TimeLabel::index(t));

  return SimDataset{
      SpatioTemporalField(locations, times, std::move(z1), "Z1"),
      SpatioTemporalField(locations, times, std::move(z2), "Z2"),
      SpatioTemporalField(std::move(locations), std::move(times), std::move(zy),
                          "ZY"),
      std::move(delta),
      std::move(eps),
      config,
      dataset_index};
}

}  // namespace stesn
