#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <string>

#include <json.hpp>

#include "stesn/errors.hpp"
#include "stesn/reservoir.hpp"

namespace stesn {

namespace detail {

template <typename Mat>
nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Mat>
Mat matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError("expected a matrix for '" + name + "'");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw ValidationError("ragged matrix for '" + name + "'");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(i, c) = j[i][c].get<typename Mat::Scalar>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const EsnHyperparams& hp) {
  return {{"n_h", hp.n_h},       {"a_w", hp.a_w},
          {"a_u", hp.a_u},       {"pi_w", hp.pi_w},
          {"pi_u", hp.pi_u},     {"nu", hp.nu},
          {"lambda_r", hp.lambda_r}, {"tau", hp.tau},
          {"tau_star", hp.tau_star}, {"m", hp.m},
          {"quadratic", hp.quadratic}, {"seed", hp.seed}};
}

inline EsnHyperparams hyperparams_from_json(const nlohmann::json& j) {
  EsnHyperparams hp;
  hp.n_h = j.at("n_h").get<int>();
  hp.a_w = j.at("a_w").get<double>();
  hp.a_u = j.at("a_u").get<double>();
  hp.pi_w = j.at("pi_w").get<double>();
  hp.pi_u = j.at("pi_u").get<double>();
  hp.nu = j.at("nu").get<double>();
  hp.lambda_r = j.at("lambda_r").get<double>();
  hp.tau = j.at("tau").get<int>();
  hp.tau_star = j.at("tau_star").get<int>();
  hp.m = j.at("m").get<int>();
  hp.quadratic = j.at("quadratic").get<bool>();
  hp.seed = j.at("seed").get<std::uint64_t>();
  hp.validate();
  return hp;
}

/// Self-describing model document. Doubles are emitted with shortest
/// round-trip formatting, so load(save(model)) is bit-exact.
inline nlohmann::json to_json(const EsnModel& model) {
  return {{"format", "stesn-model"},
          {"version", 1},
          {"hyperparams", to_json(model.hyperparams)},
          {"input_dim", model.input_dim},
          {"output_dim", model.output_dim},
          {"first_forecast_time", model.first_forecast_time},
          {"sigma2_eps", model.sigma2_eps},
          {"lambda_w", model.reservoir.lambda_w},
          {"w", detail::matrix_to_json(model.reservoir.w)},
          {"w_mask", detail::matrix_to_json(model.reservoir.w_mask)},
          {"u", detail::matrix_to_json(model.reservoir.u)},
          {"u_mask", detail::matrix_to_json(model.reservoir.u_mask)},
          {"output_coefficients",
           detail::matrix_to_json(model.output_coefficients)},
          {"hidden_states", detail::matrix_to_json(model.hidden_states)}};
}

inline EsnModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "stesn-model")
    throw ValidationError("not a model document");
  using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
  EsnModel model;
  model.hyperparams = hyperparams_from_json(j.at("hyperparams"));
  model.input_dim = j.at("input_dim").get<int>();
  model.output_dim = j.at("output_dim").get<int>();
  model.first_forecast_time = j.at("first_forecast_time").get<int>();
  model.sigma2_eps = j.at("sigma2_eps").get<double>();
  model.reservoir.lambda_w = j.at("lambda_w").get<double>();
  model.reservoir.w = detail::matrix_from_json<Eigen::MatrixXd>(j.at("w"), "w");
  model.reservoir.w_mask =
      detail::matrix_from_json<MaskMatrix>(j.at("w_mask"), "w_mask");
  model.reservoir.u = detail::matrix_from_json<Eigen::MatrixXd>(j.at("u"), "u");
  model.reservoir.u_mask =
      detail::matrix_from_json<MaskMatrix>(j.at("u_mask"), "u_mask");
  model.output_coefficients = detail::matrix_from_json<Eigen::MatrixXd>(
      j.at("output_coefficients"), "output_coefficients");
  model.hidden_states = detail::matrix_from_json<Eigen::MatrixXd>(
      j.at("hidden_states"), "hidden_states");
  return model;
}

inline void save_model(const EsnModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << to_json(model).dump(1) << '\n';
  if (!os.good()) throw IoError("failed writing '" + path + "'");
}

inline EsnModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed model document '" + path +
                          "': " + e.what());
  }
  return model_from_json(j);
}

}  // namespace stesn
