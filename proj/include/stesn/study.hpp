#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "stesn/basis.hpp"
#include "stesn/csv.hpp"
#include "stesn/errors.hpp"
#include "stesn/importance.hpp"
#include "stesn/reservoir.hpp"
#include "stesn/simulator.hpp"

namespace stesn {

/// A simulated dataset reduced to ESN-ready coefficient matrices:
/// per-location standardization, then one PCA basis per variable.
struct PreparedDataset {
  Eigen::MatrixXd inputs;   // 2*retained x T
  Eigen::MatrixXd outputs;  // retained x T
  std::vector<VariableSlice> layout;
  BasisDecomposition basis_y;
  Eigen::MatrixXd observed_spatial;  // standardized response, N x T
};

inline PreparedDataset prepare_sim_dataset(const SimDataset& data,
                                           int retained) {
  const SpatioTemporalField z1_std = standardize(data.z1).first;
  const SpatioTemporalField z2_std = standardize(data.z2).first;
  const SpatioTemporalField zy_std = standardize(data.zy).first;

  const BasisDecomposition b1 = fit_pca(z1_std, retained);
  const BasisDecomposition b2 = fit_pca(z2_std, retained);
  BasisDecomposition by = fit_pca(zy_std, retained);

  PreparedDataset out;
  out.inputs.resize(2 * retained, data.z1.n_times());
  out.inputs.topRows(retained) = b1.coefficients;
  out.inputs.bottomRows(retained) = b2.coefficients;
  out.outputs = by.coefficients;
  out.layout = {{"Z1", 0, retained}, {"Z2", retained, retained}};
  out.observed_spatial = zy_std.values();
  out.basis_y = std::move(by);
  return out;
}

/// Everything needed to run one simulation-study cell and the sweep around it.
struct StudyGrid {
  std::vector<double> sigma_z{0.2, 4.0};
  std::vector<double> sigma_delta{0.2, 4.0};
  std::vector<double> sigma_eps{0.2, 4.0};
  std::vector<double> phi_z{0.1};
  std::vector<double> phi_delta{0.1};
  std::vector<double> rho_z{0.8};
  std::vector<double> rho_delta{0.8};
  std::vector<int> block_sizes{1, 2, 3};
  std::vector<FiMethod> methods{FiMethod::stPFI, FiMethod::stZFI};
  int n_datasets = 50;
  int retained = 5;
  int replications = 10;
  int grid_side = 10;
  int t_len = 70;
  double beta = 1.0;
  EsnHyperparams esn;  // defaults are the simulation-study settings

  void validate() const {
    for (const auto* v : {&sigma_z, &sigma_delta, &sigma_eps, &phi_z,
                          &phi_delta, &rho_z, &rho_delta})
      if (v->empty()) throw ValidationError("empty study parameter list");
    if (block_sizes.empty()) throw ValidationError("no block sizes");
    if (methods.empty()) throw ValidationError("no FI methods");
    if (retained < 1) throw ValidationError("retained PCs must be >= 1");
    if (replications < 1) throw ValidationError("replications must be >= 1");
    esn.validate();
  }
};

/// FI series of one study cell, averaged over its datasets. Series are
/// ordered (variable, method, block size) in the caller-supplied order.
struct CombinationResult {
  SimConfig config;
  std::vector<LabeledSeries> averaged;
};

/// Runs one parameter combination: simulate n_datasets datasets, fit one ESN
/// per dataset, compute every requested FI series, average across datasets.
/// Parallel over datasets; results are independent of the thread count.
inline CombinationResult run_combination(const StudyGrid& grid,
                                         const SimConfig& config,
                                         int threads = 1) {
  grid.validate();
  config.validate();

  const auto n_vars = 2;
  const auto n_series = static_cast<std::size_t>(n_vars) *
                        grid.methods.size() * grid.block_sizes.size();
  // per_dataset[d][series index]
  std::vector<std::vector<ImportanceSeries>> per_dataset(
      static_cast<std::size_t>(config.n_datasets));

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int d = next.fetch_add(1);
      if (d >= config.n_datasets) return;
      const SimDataset data = simulate_dataset(config, d);
      const PreparedDataset prep = prepare_sim_dataset(data, grid.retained);

      EsnHyperparams hp = grid.esn;
      hp.seed = derive_stream(config.seed,
                              {static_cast<std::uint64_t>(d), 100})
                    .next_u64();
      const EsnModel model = fit(hp, prep.inputs, prep.outputs);

      MetricSpec metric{MetricKind::spatial_rmse, &prep.basis_y, {}};
      auto& results = per_dataset[static_cast<std::size_t>(d)];
      results.reserve(n_series);
      for (int k = 0; k < n_vars; ++k)
        for (const FiMethod method : grid.methods)
          for (const int b : grid.block_sizes) {
            ImportanceQuery query;
            query.variable_index = k;
            query.block_size = b;
            query.lead = hp.tau;
            query.method = method;
            query.replications = grid.replications;
            query.rng_seed = derive_stream(config.seed,
                                           {static_cast<std::uint64_t>(d), 101})
                                 .next_u64();
            results.push_back(compute_importance(model, prep.inputs,
                                                 prep.outputs, prep.layout,
                                                 query, metric,
                                                 &prep.observed_spatial));
          }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  CombinationResult out;
  out.config = config;
  for (std::size_t s = 0; s < n_series; ++s) {
    std::vector<ImportanceSeries> across;
    across.reserve(per_dataset.size());
    for (const auto& ds : per_dataset) across.push_back(ds[s]);
    const int k = static_cast<int>(
        s / (grid.methods.size() * grid.block_sizes.size()));
    out.averaged.push_back(
        {k == 0 ? "Z1" : "Z2", average_importance(across)});
  }
  return out;
}

/// Runs the full parameter grid and writes one CSV per combination
/// (combo_000.csv, combo_001.csv, ... in grid order). Partial results are on
/// disk as soon as each combination finishes.
inline std::vector<std::filesystem::path> run_study(
    const StudyGrid& grid, const std::filesystem::path& outdir,
    std::uint64_t seed, int threads = 1) {
  grid.validate();
  std::filesystem::create_directories(outdir);

  std::vector<std::filesystem::path> written;
  int combo = 0;
  for (double sz : grid.sigma_z)
    for (double sd : grid.sigma_delta)
      for (double se : grid.sigma_eps)
        for (double pz : grid.phi_z)
          for (double pd : grid.phi_delta)
            for (double rz : grid.rho_z)
              for (double rd : grid.rho_delta) {
                SimConfig config;
                config.grid_side = grid.grid_side;
                config.t_len = grid.t_len;
                config.sigma_z = sz;
                config.sigma_delta = sd;
                config.sigma_eps = se;
                config.phi_z = pz;
                config.phi_delta = pd;
                config.rho_z = rz;
                config.rho_delta = rd;
                config.beta = grid.beta;
                config.n_datasets = grid.n_datasets;
                config.seed = derive_stream(
                                  seed, {static_cast<std::uint64_t>(combo)})
                                  .next_u64();

                const CombinationResult result =
                    run_combination(grid, config, threads);

                auto metadata = detail::esn_metadata(grid.esn);
                metadata.emplace_back("seed", std::to_string(seed));
                metadata.emplace_back("combo_seed",
                                      std::to_string(config.seed));
                metadata.emplace_back("retained_pcs",
                                      std::to_string(grid.retained));
                metadata.emplace_back("replications",
                                      std::to_string(grid.replications));
                const std::vector<std::pair<std::string, std::string>> extra =
                    {{"sigma_z", format_double(sz)},
                     {"sigma_delta", format_double(sd)},
                     {"sigma_eps", format_double(se)},
                     {"phi_z", format_double(pz)},
                     {"phi_delta", format_double(pd)},
                     {"rho_z", format_double(rz)},
                     {"rho_delta", format_double(rd)},
                     {"n_datasets", std::to_string(grid.n_datasets)}};

                char name[32];
                std::snprintf(name, sizeof(name), "combo_%03d.csv", combo);
                const auto path = outdir / name;
                write_importance_csv(result.averaged, path.string(), metadata,
                                     extra);
                written.push_back(path);
                ++combo;
              }
  return written;
}

}  // namespace stesn
