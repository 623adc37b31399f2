#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stesn/errors.hpp"
#include "stesn/importance.hpp"
#include "stesn/reservoir.hpp"
#include "stesn/simulator.hpp"
#include "stesn/study.hpp"
#include "stesn/workflow.hpp"

namespace stesn {

/// Everything a CLI run can be configured with. Each subcommand reads the
/// sections it needs; unknown keys anywhere are errors.
struct ExperimentConfig {
  EsnHyperparams esn;
  SimConfig sim;
  StudyGrid study;
  DataWorkflowConfig data;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j,
                           const std::set<std::string>& allowed,
                           const std::string& where) {
  if (!j.is_object())
    throw ValidationError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key))
      throw ValidationError("unknown key '" + key + "' in config section '" +
                            where + "'");
}

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline FiMethod parse_method(const std::string& s) {
  if (s == "stPFI") return FiMethod::stPFI;
  if (s == "stZFI") return FiMethod::stZFI;
  throw ValidationError("unknown FI method '" + s + "' (stPFI or stZFI)");
}

inline MetricKind parse_metric(const std::string& s) {
  if (s == "pc_rmse") return MetricKind::pc_rmse;
  if (s == "spatial_rmse") return MetricKind::spatial_rmse;
  if (s == "weighted_spatial_rmse") return MetricKind::weighted_spatial_rmse;
  throw ValidationError("unknown metric '" + s + "'");
}

inline void parse_esn(const nlohmann::json& j, EsnHyperparams& hp) {
  reject_unknown(j,
                 {"n_h", "a_w", "a_u", "pi_w", "pi_u", "nu", "lambda_r", "tau",
                  "tau_star", "m", "quadratic", "seed"},
                 "esn");
  read_into(j, "n_h", hp.n_h);
  read_into(j, "a_w", hp.a_w);
  read_into(j, "a_u", hp.a_u);
  read_into(j, "pi_w", hp.pi_w);
  read_into(j, "pi_u", hp.pi_u);
  read_into(j, "nu", hp.nu);
  read_into(j, "lambda_r", hp.lambda_r);
  read_into(j, "tau", hp.tau);
  read_into(j, "tau_star", hp.tau_star);
  read_into(j, "m", hp.m);
  read_into(j, "quadratic", hp.quadratic);
  read_into(j, "seed", hp.seed);
  hp.validate();
}

inline void parse_sim(const nlohmann::json& j, SimConfig& sim) {
  reject_unknown(j,
                 {"grid_side", "T", "sigma_z", "sigma_delta", "sigma_eps",
                  "phi_z", "phi_delta", "rho_z", "rho_delta", "beta",
                  "n_datasets", "seed"},
                 "sim");
  read_into(j, "grid_side", sim.grid_side);
  read_into(j, "T", sim.t_len);
  read_into(j, "sigma_z", sim.sigma_z);
  read_into(j, "sigma_delta", sim.sigma_delta);
  read_into(j, "sigma_eps", sim.sigma_eps);
  read_into(j, "phi_z", sim.phi_z);
  read_into(j, "phi_delta", sim.phi_delta);
  read_into(j, "rho_z", sim.rho_z);
  read_into(j, "rho_delta", sim.rho_delta);
  read_into(j, "beta", sim.beta);
  read_into(j, "n_datasets", sim.n_datasets);
  read_into(j, "seed", sim.seed);
  sim.validate();
}

inline void parse_study(const nlohmann::json& j, StudyGrid& grid) {
  reject_unknown(j,
                 {"sigma_z", "sigma_delta", "sigma_eps", "phi_z", "phi_delta",
                  "rho_z", "rho_delta", "block_sizes", "methods", "n_datasets",
                  "retained_pcs", "replications", "grid_side", "T", "beta"},
                 "study");
  read_into(j, "sigma_z", grid.sigma_z);
  read_into(j, "sigma_delta", grid.sigma_delta);
  read_into(j, "sigma_eps", grid.sigma_eps);
  read_into(j, "phi_z", grid.phi_z);
  read_into(j, "phi_delta", grid.phi_delta);
  read_into(j, "rho_z", grid.rho_z);
  read_into(j, "rho_delta", grid.rho_delta);
  read_into(j, "block_sizes", grid.block_sizes);
  read_into(j, "n_datasets", grid.n_datasets);
  read_into(j, "retained_pcs", grid.retained);
  read_into(j, "replications", grid.replications);
  read_into(j, "grid_side", grid.grid_side);
  read_into(j, "T", grid.t_len);
  read_into(j, "beta", grid.beta);
  if (j.contains("methods")) {
    grid.methods.clear();
    for (const auto& m : j.at("methods"))
      grid.methods.push_back(parse_method(m.get<std::string>()));
  }
}

inline VariableInput parse_variable(const nlohmann::json& j,
                                    const std::string& where) {
  reject_unknown(j, {"name", "path"}, where);
  VariableInput v;
  v.name = j.at("name").get<std::string>();
  v.path = j.at("path").get<std::string>();
  return v;
}

inline void parse_data(const nlohmann::json& j, DataWorkflowConfig& data) {
  reject_unknown(j,
                 {"inputs", "response", "preprocess", "retained_pcs", "metric",
                  "block_sizes", "methods", "replications", "split_times",
                  "event_times", "emit_plot", "model_path"},
                 "data");
  if (j.contains("inputs")) {
    data.inputs.clear();
    for (const auto& in : j.at("inputs"))
      data.inputs.push_back(parse_variable(in, "data.inputs[]"));
  }
  if (j.contains("response"))
    data.response = parse_variable(j.at("response"), "data.response");
  read_into(j, "preprocess", data.preprocess);
  read_into(j, "retained_pcs", data.retained);
  if (j.contains("metric"))
    data.metric = parse_metric(j.at("metric").get<std::string>());
  read_into(j, "block_sizes", data.block_sizes);
  if (j.contains("methods")) {
    data.methods.clear();
    for (const auto& m : j.at("methods"))
      data.methods.push_back(parse_method(m.get<std::string>()));
  }
  read_into(j, "replications", data.replications);
  read_into(j, "split_times", data.split_times);
  read_into(j, "event_times", data.event_times);
  read_into(j, "emit_plot", data.emit_plot);
  read_into(j, "model_path", data.model_path);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  detail::reject_unknown(j, {"esn", "sim", "study", "data"}, "<root>");
  ExperimentConfig config;
  if (j.contains("esn")) detail::parse_esn(j.at("esn"), config.esn);
  if (j.contains("sim")) detail::parse_sim(j.at("sim"), config.sim);
  if (j.contains("study")) detail::parse_study(j.at("study"), config.study);
  if (j.contains("data")) detail::parse_data(j.at("data"), config.data);
  // The data workflows and the study share the ESN settings section.
  config.data.esn = config.esn;
  config.study.esn = config.esn;
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed config '" + path + "': " + e.what());
  }
  try {
    return parse_config(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid config '" + path + "': " + e.what());
  }
}

}  // namespace stesn
