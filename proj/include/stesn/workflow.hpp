#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stesn/basis.hpp"
#include "stesn/csv.hpp"
#include "stesn/errors.hpp"
#include "stesn/importance.hpp"
#include "stesn/reservoir.hpp"
#include "stesn/serialize.hpp"
#include "stesn/svg.hpp"

namespace stesn {

struct VariableInput {
  std::string name;
  std::string path;
};

/// Settings shared by the data-driven workflows (fit / importance / evaluate).
struct DataWorkflowConfig {
  std::vector<VariableInput> inputs;  ///< predictors; may include the response
  VariableInput response;
  std::string preprocess = "auto";  ///< auto | climatology | standardize
  int retained = 5;
  EsnHyperparams esn;
  MetricKind metric = MetricKind::weighted_spatial_rmse;
  std::vector<int> block_sizes{3};
  std::vector<FiMethod> methods{FiMethod::stPFI, FiMethod::stZFI};
  int replications = 10;
  std::vector<std::string> split_times;  ///< evaluate workflow
  std::vector<std::string> event_times;  ///< plot markers
  bool emit_plot = false;
  std::string model_path = "model.json";
};

/// Ingested and preprocessed variables reduced to coefficient matrices.
struct DataPipeline {
  Eigen::MatrixXd inputs;   // P x T
  Eigen::MatrixXd outputs;  // Q x T
  std::vector<VariableSlice> layout;
  BasisDecomposition basis_y;
  Eigen::MatrixXd observed_spatial;  // preprocessed response, N x T
  std::vector<TimeLabel> times;
  std::vector<Location> locations;
};

namespace detail {

inline SpatioTemporalField preprocess_field(const SpatioTemporalField& field,
                                            const std::string& mode) {
  if (mode == "climatology" || (mode == "auto" && field.monthly()))
    return compute_climatology(field).first;
  if (mode == "standardize" || mode == "auto") return standardize(field).first;
  throw ValidationError("unknown preprocess mode '" + mode + "'");
}

}  // namespace detail

/// Ingests response and predictors, applies preprocessing, fits one PCA basis
/// per variable, concatenates predictor scores.
inline DataPipeline build_data_pipeline(const DataWorkflowConfig& config) {
  if (config.inputs.empty())
    throw ValidationError("at least one input variable is required");
  if (config.response.path.empty())
    throw ValidationError("a response variable is required");
  if (config.retained < 1) throw ValidationError("retained PCs must be >= 1");

  const SpatioTemporalField response_raw =
      ingest_gridded_csv(config.response.path, config.response.name);
  std::vector<SpatioTemporalField> input_raw;
  for (const auto& in : config.inputs) {
    input_raw.push_back(ingest_gridded_csv(in.path, in.name));
    if (input_raw.back().locations() != response_raw.locations() ||
        input_raw.back().times() != response_raw.times())
      throw ValidationError("variable '" + in.name +
                            "' is not on the response's grid and time axis");
  }

  DataPipeline p;
  p.times = response_raw.times();
  p.locations = response_raw.locations();

  const SpatioTemporalField response =
      detail::preprocess_field(response_raw, config.preprocess);
  p.basis_y = fit_pca(response, config.retained);
  p.outputs = p.basis_y.coefficients;
  p.observed_spatial = response.values();

  const auto n_inputs = static_cast<int>(input_raw.size());
  p.inputs.resize(n_inputs * config.retained, response_raw.n_times());
  for (int k = 0; k < n_inputs; ++k) {
    const SpatioTemporalField pre =
        detail::preprocess_field(input_raw[static_cast<std::size_t>(k)],
                                 config.preprocess);
    const BasisDecomposition basis = fit_pca(pre, config.retained);
    p.inputs.middleRows(k * config.retained, config.retained) =
        basis.coefficients;
    p.layout.push_back({config.inputs[static_cast<std::size_t>(k)].name,
                        k * config.retained, config.retained});
  }
  return p;
}

/// Fits an ESN on the full period and writes the model document.
inline std::filesystem::path run_fit_workflow(
    const DataWorkflowConfig& config, const std::filesystem::path& outdir) {
  const DataPipeline p = build_data_pipeline(config);
  const EsnModel model = fit(config.esn, p.inputs, p.outputs);
  std::filesystem::create_directories(outdir);
  const auto path = outdir / config.model_path;
  save_model(model, path.string());
  return path;
}

/// The end-to-end FI analysis: preprocess, reduce, fit, compute stPFI/stZFI
/// per input variable and block size, write the importance CSV (and an SVG
/// companion when requested).
inline std::vector<std::filesystem::path> run_climate_workflow(
    const DataWorkflowConfig& config, const std::filesystem::path& outdir,
    std::uint64_t seed) {
  const DataPipeline p = build_data_pipeline(config);

  EsnHyperparams hp = config.esn;
  hp.seed = derive_stream(seed, {200}).next_u64();
  const EsnModel model = fit(hp, p.inputs, p.outputs);

  MetricSpec metric{config.metric, &p.basis_y, {}};
  if (config.metric == MetricKind::weighted_spatial_rmse) {
    Eigen::VectorXd lats(static_cast<Eigen::Index>(p.locations.size()));
    for (std::size_t i = 0; i < p.locations.size(); ++i)
      lats[static_cast<Eigen::Index>(i)] = p.locations[i].x;
    metric.weights = latitude_weights(lats);
  }

  std::vector<LabeledSeries> series;
  for (std::size_t k = 0; k < p.layout.size(); ++k)
    for (const FiMethod method : config.methods)
      for (const int b : config.block_sizes) {
        ImportanceQuery query;
        query.variable_index = static_cast<int>(k);
        query.block_size = b;
        query.lead = hp.tau;
        query.method = method;
        query.replications = config.replications;
        query.rng_seed = derive_stream(seed, {201, k}).next_u64();
        series.push_back({p.layout[k].name,
                          compute_importance(model, p.inputs, p.outputs,
                                             p.layout, query, metric,
                                             &p.observed_spatial)});
      }

  std::filesystem::create_directories(outdir);
  std::vector<std::filesystem::path> written;

  auto metadata = detail::esn_metadata(hp);
  metadata.emplace_back("seed", std::to_string(seed));
  metadata.emplace_back("retained_pcs", std::to_string(config.retained));
  metadata.emplace_back("replications", std::to_string(config.replications));
  metadata.emplace_back("metric", to_string(config.metric));
  const auto csv_path = outdir / "importance.csv";
  write_importance_csv(series, csv_path.string(), metadata, {}, p.times);
  written.push_back(csv_path);

  if (config.emit_plot) {
    std::vector<PlotSeries> lines;
    for (const auto& [variable, s] : series) {
      PlotSeries line;
      line.label = variable + " " + to_string(s.query.method) + " b=" +
                   std::to_string(s.query.block_size);
      for (std::size_t i = 0; i < s.forecast_times.size(); ++i) {
        line.x.push_back(static_cast<double>(s.forecast_times[i]));
        line.y.push_back(s.values[i]);
      }
      lines.push_back(std::move(line));
    }
    std::vector<double> events;
    for (const auto& ev : config.event_times) {
      const TimeLabel tl = TimeLabel::parse(ev);
      for (std::size_t j = 0; j < p.times.size(); ++j)
        if (p.times[j] == tl) events.push_back(static_cast<double>(j + 1));
    }
    const auto svg_path = outdir / "importance.svg";
    export_svg_lines(lines, svg_path.string(), "Feature importance",
                     "forecast time", "importance", events);
    written.push_back(svg_path);
  }
  return written;
}

/// One row of the train/test evaluation report.
struct EvaluationRow {
  std::string split;  ///< split time label
  int time = 0;       ///< 1-indexed forecast time
  bool train = false;
  double rmse = 0.0;
};

/// Blocked train/test evaluation: for each split time, fit on times up to and
/// including the split, forecast every feasible time of the full span, score
/// spatially averaged RMSE per time tagged train/test.
inline std::vector<EvaluationRow> run_evaluation(
    const DataWorkflowConfig& config, std::uint64_t seed) {
  if (config.split_times.empty())
    throw ValidationError("evaluate requires at least one split time");
  const DataPipeline p = build_data_pipeline(config);
  const auto t_total = static_cast<int>(p.times.size());

  std::vector<EvaluationRow> rows;
  for (const auto& split_str : config.split_times) {
    const TimeLabel split = TimeLabel::parse(split_str);
    int t_split = 0;
    for (int j = 0; j < t_total; ++j)
      if (p.times[static_cast<std::size_t>(j)] <= split) t_split = j + 1;
    if (t_split == 0 || p.times.front() > split)
      throw ValidationError("split time " + split_str +
                            " is before the data span");
    if (split > p.times.back())
      throw ValidationError("split time " + split_str +
                            " is after the data span");

    EsnHyperparams hp = config.esn;
    hp.seed = derive_stream(seed, {202}).next_u64();
    const EsnModel model = fit(hp, p.inputs.leftCols(t_split),
                               p.outputs.leftCols(t_split));
    const Eigen::MatrixXd fc = forecast(model, p.inputs);

    const auto n = p.observed_spatial.rows();
    for (int ft = model.first_forecast_time; ft <= t_total; ++ft) {
      const Eigen::VectorXd rec =
          p.basis_y.basis * fc.col(ft - model.first_forecast_time) +
          p.basis_y.column_mean;
      const double rmse =
          (p.observed_spatial.col(ft - 1) - rec).norm() /
          std::sqrt(static_cast<double>(n));
      rows.push_back({split.str(), ft, ft <= t_split, rmse});
    }
  }
  return rows;
}

/// Writes the evaluation report: `split,time,set,rmse`.
inline std::filesystem::path write_evaluation_csv(
    const std::vector<EvaluationRow>& rows, const DataPipeline& p,
    const std::filesystem::path& outdir,
    const std::vector<std::pair<std::string, std::string>>& metadata = {}) {
  std::filesystem::create_directories(outdir);
  const auto path = outdir / "evaluation.csv";
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& [k, v] : metadata) os << "# " << k << "=" << v << "\n";
  os << "split,time,set,rmse\n";
  for (const auto& r : rows)
    os << r.split << ','
       << p.times.at(static_cast<std::size_t>(r.time - 1)).str() << ','
       << (r.train ? "train" : "test") << ',' << format_double(r.rmse) << '\n';
  if (!os.good()) throw IoError("failed writing '" + path.string() + "'");
  return path;
}

}  // namespace stesn
