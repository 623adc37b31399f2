#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stesn/errors.hpp"
#include "stesn/rng.hpp"

namespace stesn {

/// Tuning parameters of a single-layer echo state network. Only the output
/// coefficients are estimated; everything here is pre-specified or sampled.
struct EsnHyperparams {
  int n_h = 50;            ///< hidden units
  double a_w = 0.1;        ///< half-width of the uniform for W entries
  double a_u = 0.1;        ///< half-width of the uniform for U entries
  double pi_w = 0.1;       ///< inclusion probability for W entries
  double pi_u = 0.1;       ///< inclusion probability for U entries
  double nu = 0.35;        ///< memory scaling in [0, 1]
  double lambda_r = 0.1;   ///< ridge penalty > 0
  int tau = 1;             ///< forecast lead >= 1
  int tau_star = 1;        ///< embedding lag >= 1
  int m = 1;               ///< embedding length >= 0
  bool quadratic = false;  ///< add squared hidden units to the output stage
  std::uint64_t seed = 0;

  /// Earliest 1-indexed time with a full embedding history.
  int first_forecast_time() const { return 1 + tau + m * tau_star; }

  void validate() const {
    if (n_h < 1) throw ValidationError("n_h must be >= 1");
    if (a_w < 0.0 || a_u < 0.0) throw ValidationError("a_w, a_u must be >= 0");
    if (pi_w <= 0.0 || pi_w > 1.0 || pi_u <= 0.0 || pi_u > 1.0)
      throw ValidationError("pi_w, pi_u must be in (0, 1]");
    if (nu < 0.0 || nu > 1.0) throw ValidationError("nu must be in [0, 1]");
    if (lambda_r <= 0.0) throw ValidationError("lambda_r must be > 0");
    if (tau < 1) throw ValidationError("tau must be >= 1");
    if (tau_star < 1) throw ValidationError("tau_star must be >= 1");
    if (m < 0) throw ValidationError("m must be >= 0");
  }
};

/// Largest absolute eigenvalue. Dense eigendecomposition up to 200x200;
/// larger matrices fall back to power iteration on M'M.
inline double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    throw ValidationError("spectral radius requires a square matrix");
  if (!m.allFinite())
    throw ValidationError("spectral radius requires finite entries");
  if (m.rows() <= 200) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  const Eigen::MatrixXd g = m.transpose() * m;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd w = g * v;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    w /= next;
    if (std::abs(next - lambda) <= 1e-10 * next) {
      lambda = next;
      break;
    }
    lambda = next;
    v = std::move(w);
  }
  return std::sqrt(lambda);
}

/// The fixed random weight matrices of the hidden stage.
struct Reservoir {
  Eigen::MatrixXd w;  // n_h x n_h, recurrent
  Eigen::MatrixXd u;  // n_h x P(m+1), input
  // 1 where the Bernoulli inclusion fired; structural zeros elsewhere.
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> w_mask;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> u_mask;
  double lambda_w = 0.0;  // spectral radius of w
};

namespace detail {

inline void sample_sparse_uniform(
    Eigen::MatrixXd& m,
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& mask,
    double half_width, double inclusion_prob, Rng& rng) {
  // Row-major traversal; the draw order is part of the determinism contract.
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (rng.bernoulli(inclusion_prob)) {
        mask(i, j) = 1;
        m(i, j) = rng.uniform(-half_width, half_width);
      } else {
        mask(i, j) = 0;
        m(i, j) = 0.0;
      }
    }
  }
}

}  // namespace detail

/// Samples W and U per the sparse uniform-with-point-mass scheme. Resamples
/// internally (fresh draws from the same stream) up to 10 times if the
/// recurrent matrix comes out with zero spectral radius.
inline Reservoir sample_reservoir(const EsnHyperparams& hp, int input_dim) {
  hp.validate();
  if (input_dim < 1) throw ValidationError("input_dim must be >= 1");
  const int embed_dim = input_dim * (hp.m + 1);

  Rng rng = derive_stream(hp.seed, {0x7265737672ULL});  // reservoir stream
  Reservoir r;
  r.w.resize(hp.n_h, hp.n_h);
  r.w_mask.resize(hp.n_h, hp.n_h);
  r.u.resize(hp.n_h, embed_dim);
  r.u_mask.resize(hp.n_h, embed_dim);

  for (int attempt = 0; attempt < 10; ++attempt) {
    detail::sample_sparse_uniform(r.w, r.w_mask, hp.a_w, hp.pi_w, rng);
    detail::sample_sparse_uniform(r.u, r.u_mask, hp.a_u, hp.pi_u, rng);
    r.lambda_w = spectral_radius(r.w);
    if (r.lambda_w > 0.0) return r;
  }
  throw ValidationError("degenerate reservoir: spectral radius of W is zero");
}

/// Zeroes the input-matrix columns belonging to one variable slice across all
/// embedding segments. Used to construct reservoirs that provably ignore a
/// variable.
inline void zero_input_columns(Reservoir& r, int slice_offset, int slice_count,
                               int input_dim, int m) {
  for (int seg = 0; seg <= m; ++seg) {
    r.u.middleCols(seg * input_dim + slice_offset, slice_count).setZero();
    r.u_mask.middleCols(seg * input_dim + slice_offset, slice_count).setZero();
  }
}

/// Embedding vector at 1-indexed time t: [x_{t-tau}; x_{t-tau-tau*}; ...;
/// x_{t-tau-m*tau*}].
inline Eigen::VectorXd build_embedding(const Eigen::MatrixXd& inputs, int t,
                                       int tau, int tau_star, int m) {
  const auto p = inputs.rows();
  const int earliest = 1 + tau + m * tau_star;
  if (t < earliest)
    throw ValidationError("insufficient history at time " + std::to_string(t) +
                          "; earliest feasible time is " +
                          std::to_string(earliest));
  if (t > inputs.cols())
    throw ValidationError("time " + std::to_string(t) + " beyond input span " +
                          std::to_string(inputs.cols()));
  Eigen::VectorXd embed(p * (m + 1));
  for (int seg = 0; seg <= m; ++seg)
    embed.segment(seg * p, p) = inputs.col(t - tau - seg * tau_star - 1);
  return embed;
}

/// Runs the tanh hidden-state recursion over all feasible times. Column j of
/// the result is h_t for t = first_forecast_time + j; the state one step
/// before the first feasible time is the zero vector.
inline Eigen::MatrixXd run_hidden_states(const Reservoir& r,
                                         const EsnHyperparams& hp,
                                         const Eigen::MatrixXd& inputs) {
  const int fft = hp.first_forecast_time();
  const auto t_total = static_cast<int>(inputs.cols());
  if (t_total < fft)
    throw ValidationError("need at least " + std::to_string(fft) +
                          " times, got " + std::to_string(t_total));
  if (r.lambda_w <= 0.0)
    throw ValidationError("degenerate reservoir: spectral radius of W is zero");
  const double scale = hp.nu / r.lambda_w;
  const Eigen::MatrixXd w_eff = scale * r.w;

  Eigen::MatrixXd hidden(hp.n_h, t_total - fft + 1);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(hp.n_h);
  for (int t = fft; t <= t_total; ++t) {
    h = (w_eff * h + r.u * build_embedding(inputs, t, hp.tau, hp.tau_star, hp.m))
            .array()
            .tanh();
    hidden.col(t - fft) = h;
  }
  return hidden;
}

/// A fitted echo state network. Immutable; forecasting is const and
/// thread-safe.
struct EsnModel {
  EsnHyperparams hyperparams;
  Reservoir reservoir;
  // Q x n_h for the linear output stage, Q x 2*n_h for the quadratic one
  // (left half multiplies h_t, right half h_t squared elementwise).
  Eigen::MatrixXd output_coefficients;
  int input_dim = 0;
  int output_dim = 0;
  Eigen::MatrixXd hidden_states;  // training h_t, feasible times only
  int first_forecast_time = 0;
  double sigma2_eps = 0.0;  ///< mean squared training residual

  Eigen::MatrixXd v1() const {
    return output_coefficients.leftCols(hyperparams.n_h);
  }
  Eigen::MatrixXd v2() const {
    if (!hyperparams.quadratic)
      throw ValidationError("linear model has no quadratic coefficients");
    return output_coefficients.rightCols(hyperparams.n_h);
  }
};

namespace detail {

inline Eigen::MatrixXd output_regressors(const Eigen::MatrixXd& hidden,
                                         bool quadratic) {
  if (!quadratic) return hidden;
  Eigen::MatrixXd reg(2 * hidden.rows(), hidden.cols());
  reg.topRows(hidden.rows()) = hidden;
  reg.bottomRows(hidden.rows()) = hidden.cwiseAbs2();
  return reg;
}

}  // namespace detail

/// Ridge-fits the output stage on a caller-supplied reservoir.
inline EsnModel fit_with_reservoir(const EsnHyperparams& hp,
                                   Reservoir reservoir,
                                   const Eigen::MatrixXd& inputs,
                                   const Eigen::MatrixXd& outputs) {
  hp.validate();
  if (inputs.cols() != outputs.cols())
    throw ValidationError("inputs span " + std::to_string(inputs.cols()) +
                          " times, outputs " + std::to_string(outputs.cols()));
  const int fft = hp.first_forecast_time();
  const auto t_total = static_cast<int>(inputs.cols());
  const auto q = static_cast<int>(outputs.rows());
  if (t_total < fft + q)
    throw ValidationError("need at least " + std::to_string(fft + q) +
                          " times to fit, got " + std::to_string(t_total));

  EsnModel model;
  model.hyperparams = hp;
  model.reservoir = std::move(reservoir);
  model.input_dim = static_cast<int>(inputs.rows());
  model.output_dim = q;
  model.first_forecast_time = fft;
  model.hidden_states = run_hidden_states(model.reservoir, hp, inputs);

  const Eigen::MatrixXd h =
      detail::output_regressors(model.hidden_states, hp.quadratic);
  const Eigen::MatrixXd y_used = outputs.rightCols(t_total - fft + 1);
  Eigen::MatrixXd gram = h * h.transpose();
  gram.diagonal().array() += hp.lambda_r;

  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        gram, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > 1e12)
      throw ValidationError(
          "ridge system is ill-conditioned; increase lambda_r");
  }

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw ValidationError("ridge system is ill-conditioned; increase lambda_r");
  model.output_coefficients =
      llt.solve(h * y_used.transpose()).transpose();

  const Eigen::MatrixXd resid = y_used - model.output_coefficients * h;
  model.sigma2_eps = resid.squaredNorm() /
                     static_cast<double>(resid.rows() * resid.cols());
  return model;
}

/// Samples a reservoir from the hyperparameters' seed, then fits.
inline EsnModel fit(const EsnHyperparams& hp, const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& outputs) {
  return fit_with_reservoir(hp, sample_reservoir(hp, static_cast<int>(inputs.rows())),
                            inputs, outputs);
}

/// Point forecasts over all feasible times of the given input history.
/// Column j is the forecast for t = first_forecast_time + j.
inline Eigen::MatrixXd forecast(const EsnModel& model,
                                const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != model.input_dim)
    throw ValidationError("model expects " + std::to_string(model.input_dim) +
                          " input rows, got " + std::to_string(inputs.rows()));
  const Eigen::MatrixXd hidden =
      run_hidden_states(model.reservoir, model.hyperparams, inputs);
  return model.output_coefficients *
         detail::output_regressors(hidden, model.hyperparams.quadratic);
}

/// One overwrite of a variable slice of the input coefficients at one time.
struct InputReplacement {
  int time = 0;    ///< 1-indexed
  int offset = 0;  ///< first input row of the slice
  int count = 0;   ///< rows in the slice
  Eigen::VectorXd values;
};

/// Forecasts with selected input cells overwritten. The hidden recursion is
/// rerun from its initial state, so an adjustment at time t propagates through
/// the reservoir memory to all later forecasts.
inline Eigen::MatrixXd forecast_with_adjusted_inputs(
    const EsnModel& model, const Eigen::MatrixXd& inputs,
    const std::vector<InputReplacement>& replacements) {
  Eigen::MatrixXd adjusted = inputs;
  for (const auto& rep : replacements) {
    if (rep.time < 1 || rep.time > inputs.cols())
      throw ValidationError("replacement time " + std::to_string(rep.time) +
                            " outside 1.." + std::to_string(inputs.cols()));
    if (rep.offset < 0 || rep.count < 1 ||
        rep.offset + rep.count > inputs.rows())
      throw ValidationError("replacement slice [" + std::to_string(rep.offset) +
                            ", " + std::to_string(rep.offset + rep.count) +
                            ") outside input rows");
    if (rep.values.size() != rep.count)
      throw ValidationError("replacement vector has " +
                            std::to_string(rep.values.size()) +
                            " entries, slice needs " +
                            std::to_string(rep.count));
    adjusted.col(rep.time - 1).segment(rep.offset, rep.count) = rep.values;
  }
  return forecast(model, adjusted);
}

}  // namespace stesn
