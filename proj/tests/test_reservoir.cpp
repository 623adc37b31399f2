#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "stesn/reservoir.hpp"
#include "stesn/rng.hpp"
#include "stesn/serialize.hpp"

using stesn::EsnHyperparams;
using stesn::EsnModel;
using stesn::Reservoir;
using stesn::ValidationError;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  stesn::Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

EsnHyperparams small_hp(std::uint64_t seed) {
  EsnHyperparams hp;
  hp.n_h = 5;
  hp.seed = seed;
  return hp;
}

// Gradient descent on the penalized least squares objective; independent of
// the closed-form normal-equation route used by fit().
Eigen::MatrixXd ridge_by_gradient_descent(const Eigen::MatrixXd& h,
                                          const Eigen::MatrixXd& y,
                                          double lambda) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(y.rows(), h.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h * h.transpose());
  const double step = 1.0 / (es.eigenvalues().maxCoeff() + lambda);
  for (int it = 0; it < 200000; ++it) {
    const Eigen::MatrixXd grad =
        (v * h - y) * h.transpose() + lambda * v;
    v -= step * grad;
    if (grad.cwiseAbs().maxCoeff() < 1e-12) break;
  }
  return v;
}

}  // namespace

TEST_CASE("spectral radius of simple matrices") {
  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(2, 2);
  diag(0, 0) = 0.5;
  diag(1, 1) = -0.9;
  CHECK(stesn::spectral_radius(diag) == doctest::Approx(0.9));

  Eigen::MatrixXd nilpotent = Eigen::MatrixXd::Zero(2, 2);
  nilpotent(0, 1) = 1.0;
  CHECK(stesn::spectral_radius(nilpotent) == doctest::Approx(0.0));

  CHECK_THROWS_AS(stesn::spectral_radius(Eigen::MatrixXd::Zero(2, 3)),
                  ValidationError);
}

TEST_CASE("spectral radius matches a dense eigensolver on sparse samples") {
  EsnHyperparams hp;
  hp.n_h = 50;
  hp.seed = 99;
  const Reservoir r = stesn::sample_reservoir(hp, 4);
  Eigen::EigenSolver<Eigen::MatrixXd> es(r.w, false);
  const double expected = es.eigenvalues().cwiseAbs().maxCoeff();
  CHECK(stesn::spectral_radius(r.w) == doctest::Approx(expected).epsilon(1e-6));
  CHECK(r.lambda_w == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("zero-width sampling yields a degenerate reservoir error") {
  EsnHyperparams hp;
  hp.n_h = 4;
  hp.a_w = 0.0;
  hp.a_u = 0.0;
  hp.pi_w = 1.0;
  hp.pi_u = 1.0;
  CHECK_THROWS_WITH_AS(stesn::sample_reservoir(hp, 2),
                       "degenerate reservoir: spectral radius of W is zero",
                       ValidationError);
}

TEST_CASE("sampling respects the inclusion probability") {
  EsnHyperparams hp;
  hp.n_h = 50;
  hp.pi_w = 0.1;
  hp.seed = 3;
  const Reservoir r = stesn::sample_reservoir(hp, 4);
  const double fraction =
      r.w_mask.cast<double>().sum() / static_cast<double>(hp.n_h * hp.n_h);
  // binomial 3-sigma band around 0.1 at n = 2500
  CHECK(fraction > 0.05);
  CHECK(fraction < 0.15);
  // structural zeros are exact
  for (int i = 0; i < hp.n_h; ++i)
    for (int j = 0; j < hp.n_h; ++j)
      if (!r.w_mask(i, j)) CHECK(r.w(i, j) == 0.0);
  // entries within the half-width
  CHECK(r.w.cwiseAbs().maxCoeff() <= hp.a_w);
  CHECK(r.u.cwiseAbs().maxCoeff() <= hp.a_u);
}

TEST_CASE("same seed gives a bit-identical reservoir") {
  EsnHyperparams hp;
  hp.n_h = 20;
  hp.seed = 12;
  const Reservoir a = stesn::sample_reservoir(hp, 6);
  const Reservoir b = stesn::sample_reservoir(hp, 6);
  CHECK(a.w == b.w);
  CHECK(a.u == b.u);
  CHECK(a.lambda_w == b.lambda_w);
}

TEST_CASE("embedding vector layout and feasibility") {
  Eigen::MatrixXd inputs = random_matrix(3, 10, 4);

  // m = 0 reduces to the single lagged input
  Eigen::VectorXd e0 = stesn::build_embedding(inputs, 5, 1, 1, 0);
  CHECK(e0 == inputs.col(3));

  // tau=1, tau*=1, m=1 at t=3: [x_2; x_1]
  Eigen::VectorXd e1 = stesn::build_embedding(inputs, 3, 1, 1, 1);
  CHECK(e1.segment(0, 3) == inputs.col(1));
  CHECK(e1.segment(3, 3) == inputs.col(0));

  // m=5 needs t >= 7
  CHECK_THROWS_WITH_AS(stesn::build_embedding(inputs, 6, 1, 1, 5),
                       "insufficient history at time 6; earliest feasible "
                       "time is 7",
                       ValidationError);
  CHECK_NOTHROW(stesn::build_embedding(inputs, 7, 1, 1, 5));
}

TEST_CASE("hidden states: zero input matrix gives zero states") {
  EsnHyperparams hp = small_hp(5);
  Reservoir r = stesn::sample_reservoir(hp, 2);
  r.u.setZero();
  const Eigen::MatrixXd inputs = random_matrix(2, 12, 6);
  const Eigen::MatrixXd hidden = stesn::run_hidden_states(r, hp, inputs);
  CHECK(hidden.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hidden states: nu = 0 is memoryless") {
  EsnHyperparams hp = small_hp(7);
  hp.nu = 0.0;
  const Reservoir r = stesn::sample_reservoir(hp, 2);
  const Eigen::MatrixXd inputs = random_matrix(2, 12, 8);
  const Eigen::MatrixXd hidden = stesn::run_hidden_states(r, hp, inputs);
  for (int t = hp.first_forecast_time(); t <= 12; ++t) {
    const Eigen::VectorXd expected =
        (r.u * stesn::build_embedding(inputs, t, hp.tau, hp.tau_star, hp.m))
            .array()
            .tanh();
    CHECK((hidden.col(t - hp.first_forecast_time()) - expected)
              .cwiseAbs()
              .maxCoeff() < 1e-15);
  }
}

TEST_CASE("hidden states match a scalar replay") {
  EsnHyperparams hp;
  hp.n_h = 7;
  hp.m = 2;
  hp.tau = 2;
  hp.tau_star = 1;
  hp.seed = 9;
  const Reservoir r = stesn::sample_reservoir(hp, 3);
  const Eigen::MatrixXd inputs = random_matrix(3, 15, 10);
  const Eigen::MatrixXd hidden = stesn::run_hidden_states(r, hp, inputs);

  const int fft = hp.first_forecast_time();
  const double scale = hp.nu / r.lambda_w;
  std::vector<double> h(static_cast<std::size_t>(hp.n_h), 0.0);
  for (int t = fft; t <= 15; ++t) {
    std::vector<double> next(static_cast<std::size_t>(hp.n_h), 0.0);
    for (int i = 0; i < hp.n_h; ++i) {
      double acc = 0.0;
      for (int j = 0; j < hp.n_h; ++j)
        acc += scale * r.w(i, j) * h[static_cast<std::size_t>(j)];
      for (int seg = 0; seg <= hp.m; ++seg)
        for (int p = 0; p < 3; ++p)
          acc += r.u(i, seg * 3 + p) *
                 inputs(p, t - hp.tau - seg * hp.tau_star - 1);
      next[static_cast<std::size_t>(i)] = std::tanh(acc);
    }
    h = next;
    for (int i = 0; i < hp.n_h; ++i)
      CHECK(std::abs(hidden(i, t - fft) - h[static_cast<std::size_t>(i)]) <
            1e-12);
  }

  // all states strictly inside (-1, 1)
  CHECK(hidden.cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("effective recurrent matrix has spectral radius nu") {
  EsnHyperparams hp;
  hp.n_h = 40;
  hp.seed = 21;
  const Reservoir r = stesn::sample_reservoir(hp, 3);
  const Eigen::MatrixXd scaled = (hp.nu / r.lambda_w) * r.w;
  CHECK(stesn::spectral_radius(scaled) == doctest::Approx(hp.nu).epsilon(1e-8));
}

TEST_CASE("fit: zero outputs give zero coefficients and zero residual") {
  EsnHyperparams hp = small_hp(30);
  const Eigen::MatrixXd inputs = random_matrix(3, 20, 31);
  const Eigen::MatrixXd outputs = Eigen::MatrixXd::Zero(2, 20);
  const EsnModel model = stesn::fit(hp, inputs, outputs);
  CHECK(model.output_coefficients.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(model.sigma2_eps < 1e-28);
}

TEST_CASE("fit: huge penalty shrinks the coefficients to nothing") {
  EsnHyperparams hp = small_hp(32);
  const Eigen::MatrixXd inputs = random_matrix(3, 25, 33);
  const Eigen::MatrixXd outputs = random_matrix(2, 25, 34);

  EsnHyperparams tiny = hp;
  tiny.lambda_r = 1e-8;
  const double ols_norm =
      stesn::fit(tiny, inputs, outputs).output_coefficients.norm();

  EsnHyperparams huge = hp;
  huge.lambda_r = 1e12;
  const double shrunk =
      stesn::fit(huge, inputs, outputs).output_coefficients.norm();
  CHECK(shrunk < 1e-6 * ols_norm);
}

TEST_CASE("fit matches an iterative ridge minimizer") {
  for (std::uint64_t seed : {40, 41, 42}) {
    EsnHyperparams hp = small_hp(seed);
    const Eigen::MatrixXd inputs = random_matrix(4, 20, seed + 100);
    const Eigen::MatrixXd outputs = random_matrix(3, 20, seed + 200);
    const EsnModel model = stesn::fit(hp, inputs, outputs);

    const Eigen::MatrixXd h = model.hidden_states;
    const Eigen::MatrixXd y_used =
        outputs.rightCols(20 - hp.first_forecast_time() + 1);
    const Eigen::MatrixXd expected =
        ridge_by_gradient_descent(h, y_used, hp.lambda_r);
    CHECK((model.output_coefficients - expected).cwiseAbs().maxCoeff() < 1e-6);

    // normal-equation residual
    Eigen::MatrixXd gram = h * h.transpose();
    gram.diagonal().array() += hp.lambda_r;
    const Eigen::MatrixXd rhs = h * y_used.transpose();
    CHECK((gram * model.output_coefficients.transpose() - rhs).norm() <
          1e-8 * rhs.norm());
  }
}

TEST_CASE("monotone shrinkage in the ridge penalty") {
  const Eigen::MatrixXd inputs = random_matrix(3, 30, 50);
  const Eigen::MatrixXd outputs = random_matrix(2, 30, 51);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    EsnHyperparams hp = small_hp(52);
    hp.lambda_r = lambda;
    const double norm =
        stesn::fit(hp, inputs, outputs).output_coefficients.norm();
    CHECK(norm <= prev);
    prev = norm;
  }
}

TEST_CASE("forecast on training inputs reproduces the fitted values") {
  EsnHyperparams hp = small_hp(60);
  const Eigen::MatrixXd inputs = random_matrix(3, 22, 61);
  const Eigen::MatrixXd outputs = random_matrix(2, 22, 62);
  const EsnModel model = stesn::fit(hp, inputs, outputs);

  const Eigen::MatrixXd fc = stesn::forecast(model, inputs);
  const Eigen::MatrixXd fitted =
      model.output_coefficients * model.hidden_states;
  CHECK((fc - fitted).cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::MatrixXd y_used =
      outputs.rightCols(22 - hp.first_forecast_time() + 1);
  const double sigma2 = (y_used - fc).squaredNorm() /
                        static_cast<double>(y_used.rows() * y_used.cols());
  CHECK(model.sigma2_eps == doctest::Approx(sigma2));
}

TEST_CASE("quadratic model with zero V2 equals the linear forecast") {
  EsnHyperparams hp = small_hp(70);
  hp.quadratic = true;
  const Eigen::MatrixXd inputs = random_matrix(3, 22, 71);
  const Eigen::MatrixXd outputs = random_matrix(2, 22, 72);
  EsnModel model = stesn::fit(hp, inputs, outputs);
  CHECK(model.output_coefficients.cols() == 2 * hp.n_h);

  model.output_coefficients.rightCols(hp.n_h).setZero();
  const Eigen::MatrixXd quad_fc = stesn::forecast(model, inputs);
  const Eigen::MatrixXd linear_fc = model.v1() * model.hidden_states;
  CHECK((quad_fc - linear_fc).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("adjusted-input forecasting") {
  EsnHyperparams hp = small_hp(80);
  const Eigen::MatrixXd inputs = random_matrix(4, 22, 81);
  const Eigen::MatrixXd outputs = random_matrix(2, 22, 82);
  const EsnModel model = stesn::fit(hp, inputs, outputs);
  const Eigen::MatrixXd base = stesn::forecast(model, inputs);

  SUBCASE("empty replacement list is the plain forecast") {
    const Eigen::MatrixXd fc =
        stesn::forecast_with_adjusted_inputs(model, inputs, {});
    CHECK(fc == base);
  }

  SUBCASE("replacing a slice with itself is the plain forecast") {
    const Eigen::MatrixXd fc = stesn::forecast_with_adjusted_inputs(
        model, inputs, {{10, 1, 2, inputs.col(9).segment(1, 2)}});
    CHECK(fc == base);
  }

  SUBCASE("zeroing a slice the reservoir ignores changes nothing") {
    Reservoir r = stesn::sample_reservoir(hp, 4);
    stesn::zero_input_columns(r, 1, 2, 4, hp.m);
    const EsnModel blind = stesn::fit_with_reservoir(hp, r, inputs, outputs);
    const Eigen::MatrixXd plain = stesn::forecast(blind, inputs);
    const Eigen::MatrixXd fc = stesn::forecast_with_adjusted_inputs(
        blind, inputs,
        {{8, 1, 2, Eigen::VectorXd::Zero(2)},
         {9, 1, 2, Eigen::VectorXd::Zero(2)}});
    CHECK(fc == plain);
  }

  SUBCASE("out-of-range replacements are rejected") {
    CHECK_THROWS_AS(stesn::forecast_with_adjusted_inputs(
                        model, inputs, {{0, 0, 1, Eigen::VectorXd::Zero(1)}}),
                    ValidationError);
    CHECK_THROWS_AS(stesn::forecast_with_adjusted_inputs(
                        model, inputs, {{5, 3, 2, Eigen::VectorXd::Zero(2)}}),
                    ValidationError);
  }
}

TEST_CASE("model serialization round-trips bit-exactly") {
  EsnHyperparams hp = small_hp(90);
  hp.quadratic = true;
  const Eigen::MatrixXd inputs = random_matrix(3, 20, 91);
  const Eigen::MatrixXd outputs = random_matrix(2, 20, 92);
  const EsnModel model = stesn::fit(hp, inputs, outputs);

  const auto path =
      (std::filesystem::temp_directory_path() / "stesn_model_test.json")
          .string();
  stesn::save_model(model, path);
  const EsnModel loaded = stesn::load_model(path);
  std::filesystem::remove(path);

  CHECK(loaded.reservoir.w == model.reservoir.w);
  CHECK(loaded.reservoir.u == model.reservoir.u);
  CHECK(loaded.reservoir.w_mask == model.reservoir.w_mask);
  CHECK(loaded.reservoir.lambda_w == model.reservoir.lambda_w);
  CHECK(loaded.output_coefficients == model.output_coefficients);
  CHECK(loaded.sigma2_eps == model.sigma2_eps);
  CHECK(loaded.hyperparams.seed == model.hyperparams.seed);

  // the loaded model forecasts identically
  CHECK(stesn::forecast(loaded, inputs) == stesn::forecast(model, inputs));
}
