#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "stesn/basis.hpp"
#include "stesn/errors.hpp"
#include "stesn/reservoir.hpp"
#include "stesn/rng.hpp"

namespace stesn {

enum class MetricKind { pc_rmse, spatial_rmse, weighted_spatial_rmse };

inline std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::pc_rmse: return "pc_rmse";
    case MetricKind::spatial_rmse: return "spatial_rmse";
    case MetricKind::weighted_spatial_rmse: return "weighted_spatial_rmse";
  }
  return "?";
}

/// Forecast performance metric; smaller is better. Spatial kinds
/// back-transform the predicted coefficients through `basis` before scoring
/// against the observed spatial column.
struct MetricSpec {
  MetricKind kind = MetricKind::pc_rmse;
  const BasisDecomposition* basis = nullptr;  // required for spatial kinds
  Eigen::VectorXd weights;  // required for weighted_spatial_rmse
};

/// w_i = sqrt(cos(lat_i * pi / 180)); tiny negative cosines at the poles are
/// clamped to zero.
inline Eigen::VectorXd latitude_weights(const Eigen::VectorXd& latitudes_deg) {
  Eigen::VectorXd w(latitudes_deg.size());
  for (Eigen::Index i = 0; i < latitudes_deg.size(); ++i) {
    const double lat = latitudes_deg[i];
    if (lat < -90.0 || lat > 90.0)
      throw ValidationError("latitude out of range: " + std::to_string(lat));
    w[i] = std::sqrt(std::max(0.0, std::cos(lat * std::numbers::pi / 180.0)));
  }
  return w;
}

/// Latitude-weighted error: sum_i w_i * |obs_i - pred_i| / sum_i w_i.
/// The per-location term is the square root of a single squared error, i.e.
/// an absolute error; the formula is kept verbatim.
inline double weighted_error(const Eigen::VectorXd& observed,
                             const Eigen::VectorXd& predicted,
                             const Eigen::VectorXd& weights) {
  if (observed.size() != predicted.size() || observed.size() != weights.size())
    throw ValidationError("weighted_error length mismatch");
  const double wsum = weights.sum();
  if (wsum <= 0.0) throw ValidationError("weights sum to zero");
  return weights.dot((observed - predicted).cwiseAbs()) / wsum;
}

/// Scores one forecast. For pc_rmse both arguments are coefficient vectors;
/// for the spatial kinds `observed` is the spatial column and `predicted` the
/// coefficient vector to back-transform.
inline double evaluate_metric(const MetricSpec& spec,
                              const Eigen::VectorXd& observed,
                              const Eigen::VectorXd& predicted) {
  switch (spec.kind) {
    case MetricKind::pc_rmse: {
      if (observed.size() != predicted.size())
        throw ValidationError("pc_rmse dimension mismatch");
      return (observed - predicted).norm() /
             std::sqrt(static_cast<double>(observed.size()));
    }
    case MetricKind::spatial_rmse:
    case MetricKind::weighted_spatial_rmse: {
      if (spec.basis == nullptr)
        throw ValidationError("spatial metric requires a basis");
      const Eigen::VectorXd rec =
          spec.basis->basis * predicted + spec.basis->column_mean;
      if (observed.size() != rec.size())
        throw ValidationError("spatial metric dimension mismatch");
      if (spec.kind == MetricKind::spatial_rmse)
        return (observed - rec).norm() /
               std::sqrt(static_cast<double>(observed.size()));
      if (spec.weights.size() == 0)
        throw ValidationError("weighted metric requires weights");
      return weighted_error(observed, rec, spec.weights);
    }
  }
  throw ValidationError("unknown metric kind");
}

enum class FiMethod { stPFI, stZFI };

inline std::string to_string(FiMethod m) {
  return m == FiMethod::stPFI ? "stPFI" : "stZFI";
}

/// Contiguous rows of the input coefficient matrix belonging to one variable.
struct VariableSlice {
  std::string name;
  int offset = 0;
  int count = 0;
};

struct ImportanceQuery {
  int variable_index = 0;
  int block_size = 1;
  int lead = 1;  ///< tau; must match the model
  FiMethod method = FiMethod::stZFI;
  int replications = 10;  ///< stPFI only
  std::uint64_t rng_seed = 0;
};

/// Feature importance over forecast time: adjusted-minus-baseline metric per
/// Eqs. of the block-adjustment procedure. Values may be negative.
struct ImportanceSeries {
  std::vector<int> forecast_times;  ///< 1-indexed t + tau
  std::vector<double> values;
  std::vector<double> baseline;  ///< baseline metric at each forecast time
  std::vector<int> skipped_times;  ///< forecast times whose block predates t=1
  ImportanceQuery query;
};

namespace detail {

inline void check_block(const Eigen::MatrixXd& inputs,
                        const VariableSlice& slice,
                        const std::vector<int>& times) {
  if (slice.offset < 0 || slice.count < 1 ||
      slice.offset + slice.count > inputs.rows())
    throw ValidationError("variable slice outside input rows");
  for (int t : times)
    if (t < 1 || t > inputs.cols())
      throw ValidationError("block time " + std::to_string(t) +
                            " outside 1.." + std::to_string(inputs.cols()));
}

}  // namespace detail

/// Copy of `inputs` where, independently at each listed time, the slice's
/// coefficients are shuffled among themselves (within-time, across
/// coefficient indices).
inline Eigen::MatrixXd permute_block(const Eigen::MatrixXd& inputs,
                                     const VariableSlice& slice,
                                     const std::vector<int>& times, Rng& rng) {
  detail::check_block(inputs, slice, times);
  Eigen::MatrixXd out = inputs;
  std::vector<double> vals(static_cast<std::size_t>(slice.count));
  for (int t : times) {
    for (int i = 0; i < slice.count; ++i)
      vals[static_cast<std::size_t>(i)] = out(slice.offset + i, t - 1);
    rng.shuffle(vals.begin(), vals.end());
    for (int i = 0; i < slice.count; ++i)
      out(slice.offset + i, t - 1) = vals[static_cast<std::size_t>(i)];
  }
  return out;
}

/// Copy of `inputs` with the slice set to exact zeros at each listed time.
inline Eigen::MatrixXd zero_block(const Eigen::MatrixXd& inputs,
                                  const VariableSlice& slice,
                                  const std::vector<int>& times) {
  detail::check_block(inputs, slice, times);
  Eigen::MatrixXd out = inputs;
  for (int t : times)
    out.col(t - 1).segment(slice.offset, slice.count).setZero();
  return out;
}

/// Computes stPFI or stZFI for one variable and block size over every feasible
/// forecast time. `spatial_observed` (N x T, aligned with the input time axis)
/// is required for the spatial metric kinds; `outputs` (Q x T) supplies the
/// observed coefficients for pc_rmse.
inline ImportanceSeries compute_importance(
    const EsnModel& model, const Eigen::MatrixXd& inputs,
    const Eigen::MatrixXd& outputs, const std::vector<VariableSlice>& layout,
    const ImportanceQuery& query, const MetricSpec& metric,
    const Eigen::MatrixXd* spatial_observed = nullptr) {
  if (query.variable_index < 0 ||
      query.variable_index >= static_cast<int>(layout.size()))
    throw ValidationError("variable index " +
                          std::to_string(query.variable_index) +
                          " outside layout of " +
                          std::to_string(layout.size()) + " variables");
  if (query.block_size < 1) throw ValidationError("block size must be >= 1");
  if (query.lead != model.hyperparams.tau)
    throw ValidationError("query lead differs from the model's tau");
  if (query.method == FiMethod::stPFI && query.replications < 1)
    throw ValidationError("stPFI requires replications >= 1");
  const bool spatial = metric.kind != MetricKind::pc_rmse;
  if (spatial && spatial_observed == nullptr)
    throw ValidationError("spatial metric requires observed spatial values");
  if (spatial && spatial_observed->cols() != inputs.cols())
    throw ValidationError("observed spatial values span " +
                          std::to_string(spatial_observed->cols()) +
                          " times, inputs " + std::to_string(inputs.cols()));

  const VariableSlice& slice =
      layout[static_cast<std::size_t>(query.variable_index)];
  const int fft = model.first_forecast_time;
  const int tau = model.hyperparams.tau;
  const auto t_total = static_cast<int>(inputs.cols());

  const Eigen::MatrixXd base_fc = forecast(model, inputs);

  ImportanceSeries series;
  series.query = query;
  auto observed_at = [&](int ft) -> Eigen::VectorXd {
    return spatial ? spatial_observed->col(ft - 1) : outputs.col(ft - 1);
  };

  for (int ft = fft; ft <= t_total; ++ft) {
    const int t_adj = ft - tau;
    if (t_adj - query.block_size + 1 < 1) {
      series.skipped_times.push_back(ft);
      continue;
    }
    std::vector<int> block;
    for (int t = t_adj; t > t_adj - query.block_size; --t) block.push_back(t);

    const Eigen::VectorXd obs = observed_at(ft);
    const double base = evaluate_metric(metric, obs, base_fc.col(ft - fft));

    double adjusted = 0.0;
    if (query.method == FiMethod::stZFI) {
      const Eigen::MatrixXd adj = zero_block(inputs, slice, block);
      adjusted = evaluate_metric(metric, obs,
                                 forecast(model, adj).col(ft - fft));
    } else {
      double sum = 0.0;
      for (int r = 0; r < query.replications; ++r) {
        // One named stream per (replicate, forecast time): results do not
        // depend on evaluation order.
        Rng rng = derive_stream(
            query.rng_seed,
            {0x70666931ULL, static_cast<std::uint64_t>(r),
             static_cast<std::uint64_t>(ft)});
        const Eigen::MatrixXd adj = permute_block(inputs, slice, block, rng);
        sum += evaluate_metric(metric, obs,
                               forecast(model, adj).col(ft - fft));
      }
      adjusted = sum / static_cast<double>(query.replications);
    }

    series.forecast_times.push_back(ft);
    series.baseline.push_back(base);
    series.values.push_back(adjusted - base);
  }
  return series;
}

/// Pointwise mean of series sharing one query and time axis.
inline ImportanceSeries average_importance(
    const std::vector<ImportanceSeries>& series) {
  if (series.empty()) throw ValidationError("nothing to average");
  const auto& first = series.front();
  for (const auto& s : series) {
    if (s.forecast_times != first.forecast_times)
      throw ValidationError("importance series time axes differ");
    if (s.query.variable_index != first.query.variable_index ||
        s.query.block_size != first.query.block_size ||
        s.query.method != first.query.method ||
        s.query.lead != first.query.lead)
      throw ValidationError("importance series queries differ");
  }
  ImportanceSeries out = first;
  const auto n = out.values.size();
  std::fill(out.values.begin(), out.values.end(), 0.0);
  std::fill(out.baseline.begin(), out.baseline.end(), 0.0);
  for (const auto& s : series)
    for (std::size_t i = 0; i < n; ++i) {
      out.values[i] += s.values[i];
      out.baseline[i] += s.baseline[i];
    }
  const auto cnt = static_cast<double>(series.size());
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] /= cnt;
    out.baseline[i] /= cnt;
  }
  return out;
}

}  // namespace stesn
