// Command line front end: simulation, study runner, model fitting, feature
// importance, train/test evaluation, and plotting.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stesn/config.hpp"
#include "stesn/csv.hpp"
#include "stesn/errors.hpp"
#include "stesn/simulator.hpp"
#include "stesn/study.hpp"
#include "stesn/svg.hpp"
#include "stesn/workflow.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string output = ".";
  int threads = 1;
};

stesn::ExperimentConfig load(const GlobalOptions& opt) {
  if (opt.config_path.empty())
    throw stesn::ValidationError("--config is required for this subcommand");
  auto config = stesn::load_config(opt.config_path);
  if (opt.seed_given) {
    config.sim.seed = opt.seed;
    config.esn.seed = opt.seed;
    config.data.esn.seed = opt.seed;
    config.study.esn.seed = opt.seed;
  }
  return config;
}

std::uint64_t workflow_seed(const GlobalOptions& opt,
                            const stesn::ExperimentConfig& config) {
  return opt.seed_given ? opt.seed : config.esn.seed;
}

void cmd_simulate(const GlobalOptions& opt) {
  const auto config = load(opt);
  const std::filesystem::path outdir(opt.output);
  std::filesystem::create_directories(outdir);
  for (int d = 0; d < config.sim.n_datasets; ++d) {
    const stesn::SimDataset data = stesn::simulate_dataset(config.sim, d);
    char prefix[32];
    std::snprintf(prefix, sizeof(prefix), "dataset_%03d", d);
    stesn::export_gridded_csv(data.z1,
                              (outdir / (std::string(prefix) + "_z1.csv")).string());
    stesn::export_gridded_csv(data.z2,
                              (outdir / (std::string(prefix) + "_z2.csv")).string());
    stesn::export_gridded_csv(data.zy,
                              (outdir / (std::string(prefix) + "_zy.csv")).string());
  }
  std::cout << "wrote " << config.sim.n_datasets << " dataset(s) to "
            << outdir.string() << "\n";
}

void cmd_study(const GlobalOptions& opt) {
  const auto config = load(opt);
  const auto written = stesn::run_study(config.study, opt.output,
                                        workflow_seed(opt, config),
                                        opt.threads);
  std::cout << "wrote " << written.size() << " combination file(s) to "
            << opt.output << "\n";
}

void cmd_fit(const GlobalOptions& opt) {
  const auto config = load(opt);
  const auto path = stesn::run_fit_workflow(config.data, opt.output);
  std::cout << "wrote model to " << path.string() << "\n";
}

void cmd_importance(const GlobalOptions& opt) {
  const auto config = load(opt);
  const auto written = stesn::run_climate_workflow(
      config.data, opt.output, workflow_seed(opt, config));
  for (const auto& p : written) std::cout << "wrote " << p.string() << "\n";
}

void cmd_evaluate(const GlobalOptions& opt) {
  const auto config = load(opt);
  const auto rows =
      stesn::run_evaluation(config.data, workflow_seed(opt, config));
  const auto pipeline = stesn::build_data_pipeline(config.data);
  auto metadata = stesn::detail::esn_metadata(config.data.esn);
  metadata.emplace_back("seed", std::to_string(workflow_seed(opt, config)));
  const auto path =
      stesn::write_evaluation_csv(rows, pipeline, opt.output, metadata);
  std::cout << "wrote " << path.string() << "\n";
}

void cmd_plot(const GlobalOptions& opt, const std::string& input) {
  const auto rows = stesn::read_importance_csv(input);
  if (rows.empty()) throw stesn::ValidationError("'" + input + "' is empty");

  // Group rows into one line per (variable, method, block size), preserving
  // file order within each line.
  std::vector<std::string> order;
  std::map<std::string, stesn::PlotSeries> lines;
  std::size_t idx_in_series = 0;
  for (const auto& r : rows) {
    const std::string key =
        r.variable + " " + r.method + " b=" + std::to_string(r.block_size);
    auto [it, inserted] = lines.try_emplace(key);
    if (inserted) {
      it->second.label = key;
      order.push_back(key);
    }
    double x = 0.0;
    try {
      x = static_cast<double>(stesn::TimeLabel::parse(r.forecast_time).ordinal());
    } catch (const stesn::ValidationError&) {
      x = static_cast<double>(idx_in_series);
    }
    it->second.x.push_back(x);
    it->second.y.push_back(r.importance);
    ++idx_in_series;
  }
  std::vector<stesn::PlotSeries> series;
  for (const auto& key : order) series.push_back(lines.at(key));

  const std::filesystem::path outdir(opt.output);
  std::filesystem::create_directories(outdir);
  const auto path = outdir / "plot.svg";
  stesn::export_svg_lines(series, path.string(), "Feature importance",
                          "forecast time", "importance");
  std::cout << "wrote " << path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Echo state networks with spatio-temporal feature importance"};
  app.require_subcommand(1);

  GlobalOptions opt;
  app.add_option("--config", opt.config_path, "JSON configuration file");
  app.add_option("--seed", opt.seed, "override every configured seed")
      ->trigger_on_parse()
      ->each([&opt](const std::string&) { opt.seed_given = true; });
  app.add_option("--output", opt.output, "output directory")
      ->default_val(".");
  app.add_option("--threads", opt.threads, "worker threads")->default_val(1);

  auto* simulate = app.add_subcommand("simulate", "write synthetic datasets");
  auto* study = app.add_subcommand("study", "run the simulation study grid");
  auto* fit = app.add_subcommand("fit", "fit a model and save it");
  auto* importance =
      app.add_subcommand("importance", "end-to-end feature importance");
  auto* evaluate =
      app.add_subcommand("evaluate", "blocked train/test RMSE report");
  auto* plot = app.add_subcommand("plot", "render an importance CSV as SVG");
  std::string plot_input;
  plot->add_option("--input", plot_input, "importance CSV to plot")
      ->required();

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) cmd_simulate(opt);
    if (study->parsed()) cmd_study(opt);
    if (fit->parsed()) cmd_fit(opt);
    if (importance->parsed()) cmd_importance(opt);
    if (evaluate->parsed()) cmd_evaluate(opt);
    if (plot->parsed()) cmd_plot(opt, plot_input);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const stesn::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const stesn::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
