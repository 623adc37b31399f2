#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <vector>

#include "stesn/field.hpp"
#include "stesn/rng.hpp"

using stesn::ClimatologyStats;
using stesn::Location;
using stesn::SpatioTemporalField;
using stesn::TimeLabel;
using stesn::ValidationError;

namespace {

std::vector<TimeLabel> integer_times(int t_len) {
  std::vector<TimeLabel> times;
  for (int t = 1; t <= t_len; ++t) times.push_back(TimeLabel::index(t));
  return times;
}

std::vector<TimeLabel> monthly_times(int start_year, int n_months) {
  std::vector<TimeLabel> times;
  for (int i = 0; i < n_months; ++i)
    times.push_back(TimeLabel::year_month(start_year + i / 12, i % 12 + 1));
  return times;
}

std::vector<Location> line_locations(int n) {
  std::vector<Location> locs;
  for (int i = 0; i < n; ++i) locs.push_back({static_cast<double>(i), 0.0});
  return locs;
}

SpatioTemporalField random_field(int n, int t_len, std::uint64_t seed) {
  stesn::Rng rng(seed);
  Eigen::MatrixXd values(n, t_len);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t_len; ++j) values(i, j) = rng.normal();
  return {line_locations(n), integer_times(t_len), values, "x"};
}

}  // namespace

TEST_CASE("time labels parse and order") {
  CHECK(TimeLabel::parse("1991-06").str() == "1991-06");
  CHECK(TimeLabel::parse("42").str() == "42");
  CHECK(TimeLabel::parse("1991-06").month() == 6);
  CHECK(TimeLabel::year_month(1990, 12) < TimeLabel::year_month(1991, 1));
  CHECK_THROWS_AS(TimeLabel::parse("1991-13"), ValidationError);
  CHECK_THROWS_AS(TimeLabel::parse("abc"), ValidationError);
  CHECK_THROWS_AS(TimeLabel::index(42).month(), ValidationError);
}

TEST_CASE("field invariants are enforced") {
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(2, 3);

  CHECK_THROWS_AS(SpatioTemporalField(line_locations(3), integer_times(3),
                                      values, "x"),
                  ValidationError);

  values(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(SpatioTemporalField(line_locations(2), integer_times(3),
                                      values, "x"),
                  ValidationError);
  values(0, 0) = 0.0;

  auto bad_times = integer_times(3);
  std::swap(bad_times[0], bad_times[1]);
  CHECK_THROWS_AS(SpatioTemporalField(line_locations(2), bad_times, values, "x"),
                  ValidationError);

  auto dup = line_locations(2);
  dup[1] = dup[0];
  CHECK_THROWS_AS(SpatioTemporalField(dup, integer_times(3), values, "x"),
                  ValidationError);
}

TEST_CASE("standardize maps [1,2,3] to [-1,0,1]") {
  Eigen::MatrixXd values(1, 3);
  values << 1, 2, 3;
  SpatioTemporalField field(line_locations(1), integer_times(3), values, "x");
  auto [std_field, stats] = stesn::standardize(field);
  CHECK(stats.mean[0] == doctest::Approx(2.0));
  CHECK(stats.sd[0] == doctest::Approx(1.0));
  CHECK(std_field.values()(0, 0) == doctest::Approx(-1.0));
  CHECK(std_field.values()(0, 1) == doctest::Approx(0.0));
  CHECK(std_field.values()(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("standardize rejects a constant location") {
  Eigen::MatrixXd values(2, 3);
  values << 1, 2, 3, 5, 5, 5;
  SpatioTemporalField field(line_locations(2), integer_times(3), values, "x");
  CHECK_THROWS_WITH_AS(stesn::standardize(field),
                       "zero standard deviation at location 1",
                       ValidationError);
}

TEST_CASE("standardize output has row mean 0 and sd 1") {
  auto field = random_field(10, 70, 7);
  auto [std_field, stats] = stesn::standardize(field);
  const auto& v = std_field.values();
  const int t_len = static_cast<int>(v.cols());
  for (int i = 0; i < v.rows(); ++i) {
    CHECK(std::abs(v.row(i).mean()) < 1e-12);
    const double sd =
        std::sqrt(
            (v.row(i).array() - v.row(i).mean()).square().sum() / (t_len - 1));
    CHECK(std::abs(sd - 1.0) < 1e-12);
  }
}

TEST_CASE("standardize round-trips through destandardize") {
  auto field = random_field(10, 70, 11);
  auto [std_field, stats] = stesn::standardize(field);
  auto back = stesn::destandardize(std_field, stats);
  CHECK((back.values() - field.values()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("destandardize arithmetic") {
  Eigen::MatrixXd values(1, 3);
  values << -1, 0, 1;
  SpatioTemporalField field(line_locations(1), integer_times(3), values, "x");
  stesn::StandardizationStats stats;
  stats.mean = Eigen::VectorXd::Constant(1, 2.0);
  stats.sd = Eigen::VectorXd::Constant(1, 1.0);
  auto back = stesn::destandardize(field, stats);
  CHECK(back.values()(0, 0) == doctest::Approx(1.0));
  CHECK(back.values()(0, 1) == doctest::Approx(2.0));
  CHECK(back.values()(0, 2) == doctest::Approx(3.0));

  // zeros map to the per-location means
  auto zeros = field.with_values(Eigen::MatrixXd::Zero(1, 3));
  auto means = stesn::destandardize(zeros, stats);
  CHECK(means.values().isConstant(2.0));

  stats.mean = Eigen::VectorXd::Zero(2);
  stats.sd = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(stesn::destandardize(field, stats), ValidationError);
}

TEST_CASE("climatology of three Januaries") {
  Eigen::MatrixXd values(1, 3);
  values << 10, 12, 14;
  std::vector<TimeLabel> januaries = {TimeLabel::year_month(1990, 1),
                                      TimeLabel::year_month(1991, 1),
                                      TimeLabel::year_month(1992, 1)};
  SpatioTemporalField field(line_locations(1), januaries, values, "t");
  auto [clim, stats] = stesn::compute_climatology(field);
  CHECK(clim.values()(0, 0) == doctest::Approx(-1.0));
  CHECK(clim.values()(0, 1) == doctest::Approx(0.0));
  CHECK(clim.values()(0, 2) == doctest::Approx(1.0));
  CHECK(stats.mean(0, 0) == doctest::Approx(12.0));
  CHECK(stats.sd(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("climatology requires monthly labels and nonconstant months") {
  auto plain = random_field(2, 24, 3);
  CHECK_THROWS_AS(stesn::compute_climatology(plain), ValidationError);

  Eigen::MatrixXd values = Eigen::MatrixXd::Ones(1, 24);
  values(0, 1) = 2.0;  // keep February varying; January stays constant
  values(0, 13) = 3.0;
  SpatioTemporalField constant_jan(line_locations(1), monthly_times(1990, 24),
                                   values, "t");
  CHECK_THROWS_WITH_AS(stesn::compute_climatology(constant_jan),
                       "zero standard deviation at location 0, month 1",
                       ValidationError);
}

TEST_CASE("climatology groups have mean 0 and sd 1") {
  const int n = 24, years = 16;
  stesn::Rng rng(17);
  Eigen::MatrixXd values(n, 12 * years);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 12 * years; ++j) values(i, j) = rng.normal();
  SpatioTemporalField field(line_locations(n), monthly_times(1980, 12 * years),
                            values, "t");
  auto [clim, stats] = stesn::compute_climatology(field);

  for (int m = 0; m < 12; ++m) {
    for (int i = 0; i < n; ++i) {
      double sum = 0.0, sumsq = 0.0;
      int cnt = 0;
      for (int j = 0; j < clim.n_times(); ++j) {
        if (clim.times()[static_cast<std::size_t>(j)].month() != m + 1)
          continue;
        sum += clim.values()(i, j);
        ++cnt;
      }
      const double mean = sum / cnt;
      for (int j = 0; j < clim.n_times(); ++j) {
        if (clim.times()[static_cast<std::size_t>(j)].month() != m + 1)
          continue;
        sumsq += (clim.values()(i, j) - mean) * (clim.values()(i, j) - mean);
      }
      CHECK(std::abs(mean) < 1e-12);
      CHECK(std::abs(std::sqrt(sumsq / (cnt - 1)) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("climatology round-trips through its inverse") {
  const int n = 6, months = 48;
  stesn::Rng rng(23);
  Eigen::MatrixXd values(n, months);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < months; ++j) values(i, j) = 5.0 + rng.normal();
  SpatioTemporalField field(line_locations(n), monthly_times(1990, months),
                            values, "t");
  auto [clim, stats] = stesn::compute_climatology(field);
  auto back = stesn::invert_climatology(clim, stats);
  CHECK((back.values() - field.values()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("invert_climatology arithmetic") {
  Eigen::MatrixXd values(1, 2);
  values << 1, 0;
  std::vector<TimeLabel> times = {TimeLabel::year_month(1990, 1),
                                  TimeLabel::year_month(1991, 1)};
  SpatioTemporalField field(line_locations(1), times, values, "t");
  ClimatologyStats stats;
  stats.mean = Eigen::MatrixXd::Zero(1, 12);
  stats.sd = Eigen::MatrixXd::Ones(1, 12);
  stats.mean(0, 0) = 10.0;
  stats.sd(0, 0) = 2.0;
  auto back = stesn::invert_climatology(field, stats);
  CHECK(back.values()(0, 0) == doctest::Approx(12.0));  // 1 * 2 + 10
  CHECK(back.values()(0, 1) == doctest::Approx(10.0));  // zeros -> monthly mean
}
