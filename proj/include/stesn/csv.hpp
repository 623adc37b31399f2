#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stesn/errors.hpp"
#include "stesn/field.hpp"
#include "stesn/importance.hpp"
#include "stesn/reservoir.hpp"

namespace stesn {

/// Shortest text form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, std::size_t row,
                           const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("row " + std::to_string(row) + ": cannot parse " +
                          what + " '" + s + "'");
  }
}

/// Hyperparameter settings as metadata key/value pairs, echoed into every
/// output CSV header.
inline std::vector<std::pair<std::string, std::string>> esn_metadata(
    const EsnHyperparams& hp) {
  return {{"n_h", std::to_string(hp.n_h)},
          {"a_w", format_double(hp.a_w)},
          {"a_u", format_double(hp.a_u)},
          {"pi_w", format_double(hp.pi_w)},
          {"pi_u", format_double(hp.pi_u)},
          {"nu", format_double(hp.nu)},
          {"lambda_r", format_double(hp.lambda_r)},
          {"tau", std::to_string(hp.tau)},
          {"tau_star", std::to_string(hp.tau_star)},
          {"m", std::to_string(hp.m)},
          {"quadratic", hp.quadratic ? "true" : "false"}};
}

}  // namespace detail

/// Reads the gridded CSV schema `lat,lon,time,value`. Rows must form a
/// complete (lat x lon) x time product; the first missing cell is named.
/// Locations are ordered latitude-major ascending.
inline SpatioTemporalField ingest_gridded_csv(const std::string& path,
                                              const std::string& variable_name =
                                                  "variable") {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");

  std::string line;
  std::size_t row = 0;
  if (!std::getline(is, line))
    throw ValidationError("'" + path + "' is empty");
  ++row;
  {
    auto header = detail::split_csv_line(line);
    if (header != std::vector<std::string>{"lat", "lon", "time", "value"})
      throw ValidationError("row 1: expected header 'lat,lon,time,value'");
  }

  struct Cell {
    double value;
    std::size_t row;
  };
  std::map<std::pair<std::pair<double, double>, TimeLabel>, Cell> cells;
  std::vector<double> lats, lons;
  std::vector<TimeLabel> times;

  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 4)
      throw ValidationError("row " + std::to_string(row) + ": expected 4 " +
                            "fields, got " + std::to_string(f.size()));
    const double lat = detail::parse_double(f[0], row, "lat");
    const double lon = detail::parse_double(f[1], row, "lon");
    if (lat < -90.0 || lat > 90.0)
      throw ValidationError("row " + std::to_string(row) +
                            ": latitude out of range: " + f[0]);
    if (lon < -180.0 || lon >= 180.0)
      throw ValidationError("row " + std::to_string(row) +
                            ": longitude out of range: " + f[1]);
    TimeLabel tl;
    try {
      tl = TimeLabel::parse(f[2]);
    } catch (const ValidationError& e) {
      throw ValidationError("row " + std::to_string(row) + ": " + e.what());
    }
    const double value = detail::parse_double(f[3], row, "value");
    if (!std::isfinite(value))
      throw ValidationError("row " + std::to_string(row) +
                            ": non-finite value");
    const auto key = std::make_pair(std::make_pair(lat, lon), tl);
    if (auto [it, inserted] = cells.insert({key, {value, row}}); !inserted)
      throw ValidationError("row " + std::to_string(row) + ": duplicate of " +
                            "row " + std::to_string(it->second.row));
    lats.push_back(lat);
    lons.push_back(lon);
    times.push_back(tl);
  }
  if (cells.empty()) throw ValidationError("'" + path + "' has no data rows");

  auto dedupe = [](auto& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedupe(lats);
  dedupe(lons);
  dedupe(times);

  std::vector<Location> locations;
  for (double lat : lats)
    for (double lon : lons) locations.push_back({lat, lon});

  Eigen::MatrixXd values(locations.size(), times.size());
  for (std::size_t i = 0; i < locations.size(); ++i)
    for (std::size_t j = 0; j < times.size(); ++j) {
      const auto it = cells.find(
          {{locations[i].x, locations[i].y}, times[j]});
      if (it == cells.end())
        throw ValidationError(
            "incomplete lattice: missing cell lat=" +
            format_double(locations[i].x) + " lon=" +
            format_double(locations[i].y) + " time=" + times[j].str());
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          it->second.value;
    }

  return SpatioTemporalField(std::move(locations), std::move(times),
                             std::move(values), variable_name);
}

/// Writes a field in the gridded CSV schema; lossless round trip with
/// ingest_gridded_csv (17 significant digits).
inline void export_gridded_csv(const SpatioTemporalField& field,
                               const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "lat,lon,time,value\n";
  for (Eigen::Index i = 0; i < field.n_locations(); ++i) {
    const auto& loc = field.locations()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < field.n_times(); ++j)
      os << format_double(loc.x) << ',' << format_double(loc.y) << ','
         << field.times()[static_cast<std::size_t>(j)].str() << ','
         << format_double(field.values()(i, j)) << '\n';
  }
  if (!os.good()) throw IoError("failed writing '" + path + "'");
}

/// One importance series tagged with its variable's name.
struct LabeledSeries {
  std::string variable;
  ImportanceSeries series;
};

/// Writes the importance CSV: commented metadata lines, then
/// `variable,method,block_size,forecast_time,importance,baseline_metric`
/// (plus any extra constant columns), rows ordered as given per series and
/// series as given by the caller. `time_labels`, when nonempty, renders
/// 1-indexed forecast times as labels.
inline void write_importance_csv(
    const std::vector<LabeledSeries>& series, const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& metadata = {},
    const std::vector<std::pair<std::string, std::string>>& extra_columns = {},
    const std::vector<TimeLabel>& time_labels = {}) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& [k, v] : metadata) os << "# " << k << "=" << v << "\n";
  os << "variable,method,block_size,forecast_time,importance,baseline_metric";
  for (const auto& [k, v] : extra_columns) os << ',' << k;
  os << '\n';
  for (const auto& [variable, s] : series) {
    for (std::size_t i = 0; i < s.forecast_times.size(); ++i) {
      const int ft = s.forecast_times[i];
      os << variable << ',' << to_string(s.query.method) << ','
         << s.query.block_size << ',';
      if (!time_labels.empty())
        os << time_labels.at(static_cast<std::size_t>(ft - 1)).str();
      else
        os << ft;
      os << ',' << format_double(s.values[i]) << ','
         << format_double(s.baseline[i]);
      for (const auto& [k, v] : extra_columns) os << ',' << v;
      os << '\n';
    }
  }
  if (!os.good()) throw IoError("failed writing '" + path + "'");
}

/// One data row of an importance CSV, as text plus the importance value.
struct ImportanceCsvRow {
  std::string variable;
  std::string method;
  int block_size = 0;
  std::string forecast_time;
  double importance = 0.0;
  double baseline = 0.0;
};

/// Reads back an importance CSV (metadata lines are skipped, extra columns
/// ignored).
inline std::vector<ImportanceCsvRow> read_importance_csv(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::size_t row = 0;
  std::vector<ImportanceCsvRow> out;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    auto f = detail::split_csv_line(line);
    if (!header_seen) {
      if (f.size() < 6 || f[0] != "variable")
        throw ValidationError("row " + std::to_string(row) +
                              ": not an importance CSV header");
      header_seen = true;
      continue;
    }
    if (f.size() < 6)
      throw ValidationError("row " + std::to_string(row) + ": expected at "
                            "least 6 fields");
    ImportanceCsvRow r;
    r.variable = f[0];
    r.method = f[1];
    r.block_size = static_cast<int>(
        detail::parse_double(f[2], row, "block_size"));
    r.forecast_time = f[3];
    r.importance = detail::parse_double(f[4], row, "importance");
    r.baseline = detail::parse_double(f[5], row, "baseline_metric");
    out.push_back(std::move(r));
  }
  if (!header_seen)
    throw ValidationError("'" + path + "' has no importance header");
  return out;
}

}  // namespace stesn
