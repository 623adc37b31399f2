#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stesn/errors.hpp"

namespace stesn {

struct Location {
  double x = 0.0;  ///< latitude (degrees) for climate grids, lattice x otherwise
  double y = 0.0;  ///< longitude (degrees) for climate grids, lattice y otherwise

  friend bool operator==(const Location&, const Location&) = default;
};

/// A point on the time axis: either a plain nonnegative integer index or a
/// calendar year-month ("YYYY-MM"). Monthly labels are required wherever
/// month identity matters (climatologies).
class TimeLabel {
 public:
  TimeLabel() = default;

  static TimeLabel index(long v) {
    if (v < 0) throw ValidationError("time index must be nonnegative");
    return TimeLabel(v, false);
  }

  static TimeLabel year_month(int year, int month) {
    if (month < 1 || month > 12)
      throw ValidationError("month must be in 1..12, got " +
                            std::to_string(month));
    return TimeLabel(static_cast<long>(year) * 12 + (month - 1), true);
  }

  /// Parses "YYYY-MM" or a nonnegative integer.
  static TimeLabel parse(std::string_view s) {
    const auto dash = s.find('-');
    if (dash != std::string_view::npos && dash > 0) {
      int year = 0, month = 0;
      auto r1 = std::from_chars(s.data(), s.data() + dash, year);
      auto r2 = std::from_chars(s.data() + dash + 1, s.data() + s.size(), month);
      if (r1.ec != std::errc{} || r2.ec != std::errc{} ||
          r1.ptr != s.data() + dash || r2.ptr != s.data() + s.size())
        throw ValidationError("cannot parse time label '" + std::string(s) + "'");
      return year_month(year, month);
    }
    long v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
      throw ValidationError("cannot parse time label '" + std::string(s) + "'");
    return index(v);
  }

  bool monthly() const { return monthly_; }

  /// Calendar month in 1..12; only valid for monthly labels.
  int month() const {
    if (!monthly_) throw ValidationError("time label carries no month identity");
    return static_cast<int>(ord_ % 12) + 1;
  }

  int year() const {
    if (!monthly_) throw ValidationError("time label carries no month identity");
    return static_cast<int>(ord_ / 12);
  }

  long ordinal() const { return ord_; }

  std::string str() const {
    if (!monthly_) return std::to_string(ord_);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year(), month());
    return buf;
  }

  friend auto operator<=>(const TimeLabel&, const TimeLabel&) = default;

 private:
  TimeLabel(long ord, bool monthly) : ord_(ord), monthly_(monthly) {}

  long ord_ = 0;
  bool monthly_ = false;
};

/// One spatio-temporal variable: values of a single quantity at N fixed
/// locations over T ordered times, stored as an N x T matrix whose column t
/// holds the spatial snapshot at time t. Immutable after construction.
class SpatioTemporalField {
 public:
  SpatioTemporalField(std::vector<Location> locations,
                      std::vector<TimeLabel> times, Eigen::MatrixXd values,
                      std::string variable_name)
      : locations_(std::move(locations)),
        times_(std::move(times)),
        values_(std::move(values)),
        name_(std::move(variable_name)) {
    validate();
  }

  Eigen::Index n_locations() const { return values_.rows(); }
  Eigen::Index n_times() const { return values_.cols(); }
  const std::vector<Location>& locations() const { return locations_; }
  const std::vector<TimeLabel>& times() const { return times_; }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::string& name() const { return name_; }

  bool monthly() const { return !times_.empty() && times_.front().monthly(); }

  /// Same grid and time axis, different values (and optionally a new name).
  SpatioTemporalField with_values(Eigen::MatrixXd values,
                                  std::string name = {}) const {
    return SpatioTemporalField(locations_, times_, std::move(values),
                               name.empty() ? name_ : std::move(name));
  }

 private:
  void validate() const {
    const auto n = static_cast<Eigen::Index>(locations_.size());
    const auto t = static_cast<Eigen::Index>(times_.size());
    if (n < 1 || t < 1)
      throw ValidationError("field requires at least one location and one time");
    if (values_.rows() != n || values_.cols() != t)
      throw ValidationError(
          "value matrix is " + std::to_string(values_.rows()) + "x" +
          std::to_string(values_.cols()) + ", expected " + std::to_string(n) +
          "x" + std::to_string(t));
    if (!values_.allFinite())
      throw ValidationError("field '" + name_ + "' contains non-finite values");
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (times_[i].monthly() != times_[0].monthly())
        throw ValidationError("mixed integer and year-month time labels");
      if (!(times_[i - 1] < times_[i]))
        throw ValidationError("time labels must be strictly increasing");
    }
    for (std::size_t i = 0; i < locations_.size(); ++i)
      for (std::size_t j = i + 1; j < locations_.size(); ++j)
        if (locations_[i] == locations_[j])
          throw ValidationError("duplicate location at indices " +
                                std::to_string(i) + " and " + std::to_string(j));
  }

  std::vector<Location> locations_;
  std::vector<TimeLabel> times_;
  Eigen::MatrixXd values_;
  std::string name_;
};

/// Per-location mean/sd across time; allows exact inversion of standardize().
struct StandardizationStats {
  Eigen::VectorXd mean;  // length N
  Eigen::VectorXd sd;    // length N, entries > 0
};

/// Per-location, per-calendar-month mean/sd.
struct ClimatologyStats {
  Eigen::MatrixXd mean;  // N x 12, column m-1 is month m
  Eigen::MatrixXd sd;    // N x 12
};

/// Removes the per-location sample mean across time and divides by the
/// per-location sample sd (denominator T-1). Output rows have mean 0, sd 1.
inline std::pair<SpatioTemporalField, StandardizationStats> standardize(
    const SpatioTemporalField& field) {
  const Eigen::Index n = field.n_locations();
  const Eigen::Index t = field.n_times();
  if (t < 2) throw ValidationError("standardize requires at least two times");

  StandardizationStats stats;
  stats.mean = field.values().rowwise().mean();
  Eigen::MatrixXd centered = field.values().colwise() - stats.mean;
  stats.sd = (centered.rowwise().squaredNorm() / static_cast<double>(t - 1))
                 .cwiseSqrt();
  for (Eigen::Index i = 0; i < n; ++i)
    if (stats.sd[i] == 0.0)
      throw ValidationError("zero standard deviation at location " +
                            std::to_string(i));
  centered.array().colwise() /= stats.sd.array();
  return {field.with_values(std::move(centered)), std::move(stats)};
}

/// Inverse of standardize(): values[i][t] * sd[i] + mean[i].
inline SpatioTemporalField destandardize(const SpatioTemporalField& field,
                                         const StandardizationStats& stats) {
  if (stats.mean.size() != field.n_locations() ||
      stats.sd.size() != field.n_locations())
    throw ValidationError("standardization stats sized for " +
                          std::to_string(stats.mean.size()) +
                          " locations, field has " +
                          std::to_string(field.n_locations()));
  Eigen::MatrixXd out =
      (field.values().array().colwise() * stats.sd.array()).colwise() +
      stats.mean.array();
  return field.with_values(std::move(out));
}

/// Monthly climatologies: (raw - per-location-month mean) / per-location-month
/// sd. Requires monthly time labels and at least two observations of every
/// month at every location.
inline std::pair<SpatioTemporalField, ClimatologyStats> compute_climatology(
    const SpatioTemporalField& field) {
  if (!field.monthly())
    throw ValidationError(
        "climatology requires year-month time labels, field '" + field.name() +
        "' has integer labels");
  const Eigen::Index n = field.n_locations();
  const Eigen::Index t = field.n_times();

  std::vector<std::vector<Eigen::Index>> by_month(12);
  for (Eigen::Index j = 0; j < t; ++j)
    by_month[field.times()[static_cast<std::size_t>(j)].month() - 1]
        .push_back(j);

  ClimatologyStats stats;
  stats.mean = Eigen::MatrixXd::Zero(n, 12);
  stats.sd = Eigen::MatrixXd::Ones(n, 12);
  Eigen::MatrixXd out(n, t);

  for (int m = 0; m < 12; ++m) {
    const auto& cols = by_month[static_cast<std::size_t>(m)];
    if (cols.empty()) continue;
    if (cols.size() < 2)
      throw ValidationError("month " + std::to_string(m + 1) +
                            " has fewer than two observations");
    const auto cnt = static_cast<double>(cols.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j : cols) mean += field.values().col(j);
    mean /= cnt;
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j : cols)
      ss += (field.values().col(j) - mean).cwiseAbs2();
    Eigen::VectorXd sd = (ss / (cnt - 1.0)).cwiseSqrt();
    for (Eigen::Index i = 0; i < n; ++i)
      if (sd[i] == 0.0)
        throw ValidationError("zero standard deviation at location " +
                              std::to_string(i) + ", month " +
                              std::to_string(m + 1));
    stats.mean.col(m) = mean;
    stats.sd.col(m) = sd;
    for (Eigen::Index j : cols)
      out.col(j) = (field.values().col(j) - mean).cwiseQuotient(sd);
  }
  return {field.with_values(std::move(out)), std::move(stats)};
}

/// Inverse of compute_climatology().
inline SpatioTemporalField invert_climatology(const SpatioTemporalField& field,
                                              const ClimatologyStats& stats) {
  if (!field.monthly())
    throw ValidationError("climatology inversion requires year-month labels");
  if (stats.mean.rows() != field.n_locations())
    throw ValidationError("climatology stats sized for " +
                          std::to_string(stats.mean.rows()) +
                          " locations, field has " +
                          std::to_string(field.n_locations()));
  Eigen::MatrixXd out(field.n_locations(), field.n_times());
  for (Eigen::Index j = 0; j < field.n_times(); ++j) {
    const int m = field.times()[static_cast<std::size_t>(j)].month() - 1;
    out.col(j) = field.values().col(j).cwiseProduct(stats.sd.col(m)) +
                 stats.mean.col(m);
  }
  return field.with_values(std::move(out));
}

}  // namespace stesn
