#include <sstream>

#include "doctest.h"

#include "didkit/error.hpp"
#include "didkit/panel.hpp"
#include "didkit/simulate.hpp"
#include "helpers.hpp"

using namespace didkit;

namespace {

ErrorKind kind_of(const std::string& csv, const CsvSchema& schema = {}) {
  std::istringstream in(csv);
  try {
    load_panel(in, schema);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

const char* kMinimal =
    "unit,period,outcome,first_treat\n"
    "A,1,1.0,0\n"
    "A,2,2.0,0\n"
    "B,1,3.0,2\n"
    "B,2,5.5,2\n";

}  // namespace

TEST_CASE("minimal balanced panel loads") {
  std::istringstream in(kMinimal);
  const auto p = load_panel(in);
  CHECK(p.n_units() == 2);
  CHECK(p.n_periods() == 2);
  CHECK(p.weight_kind() == WeightKind::uniform);
  CHECK(p.group(0).is_never());
  CHECK(p.group(1).period() == 2);
  CHECK(p.group_index(1) == 1u);
  CHECK(p.outcome(1, 1) == 5.5);
  CHECK(p.weight(0) == 1.0);
  CHECK(p.n_covariates() == 0);
}

TEST_CASE("missing observation is an unbalanced panel") {
  const std::string csv = "unit,period,outcome,first_treat\nA,1,1,0\nA,2,2,0\nB,1,3,2\n";
  CHECK(kind_of(csv) == ErrorKind::UnbalancedPanel);
}

TEST_CASE("load errors") {
  CHECK(kind_of("unit,period,outcome,first_treat\nA,1,1,0\nA,1,2,0\nA,2,2,0\n") == ErrorKind::DuplicateObservation);
  CHECK(kind_of("unit,period,y,first_treat\nA,1,1,0\nA,2,2,0\n") == ErrorKind::MissingColumn);
  CHECK(kind_of("unit,period,outcome,first_treat\nA,1,abc,0\nA,2,2,0\n") == ErrorKind::NonNumericCell);
  CHECK(kind_of("unit,period,outcome,first_treat\nA,1,1,0\nA,2,2,0\nB,1,1,2\nB,2,1,1\n") == ErrorKind::InvalidGroup);
  CHECK(kind_of("") == ErrorKind::MissingColumn);
}

TEST_CASE("group label between periods is rejected, beyond the last period means never") {
  CHECK(kind_of("unit,period,outcome,first_treat\nA,1,1,0\nA,3,2,0\nB,1,1,2\nB,3,1,2\n") == ErrorKind::InvalidGroup);
  std::istringstream in("unit,period,outcome,first_treat\nA,1,1,0\nA,2,2,0\nB,1,1,9\nB,2,1,9\n");
  const auto p = load_panel(in);
  CHECK(p.group(1).is_never());
}

TEST_CASE("empty and custom never-treated markers") {
  std::istringstream a("unit,period,outcome,first_treat\nA,1,1,\nA,2,2,\nB,1,3,2\nB,2,5,2\n");
  CHECK(load_panel(a).group(0).is_never());
  CsvSchema s;
  s.never_value = "-1";
  std::istringstream b("unit,period,outcome,first_treat\nA,1,1,-1\nA,2,2,-1\nB,1,3,2\nB,2,5,2\n");
  CHECK(load_panel(b, s).group(0).is_never());
}

TEST_CASE("weight, cluster and covariate columns") {
  const std::string csv =
      "id,t,y,g,weight,state,age,inc\n"
      "A,1,1,0,2.5,s1,30,10\nA,2,2,0,2.5,s1,31,11\n"
      "B,1,3,2,0.5,s1,40,20\nB,2,5,2,0.5,s1,41,21\n"
      "C,1,3,2,1.0,s2,50,30\nC,2,5,2,1.0,s2,51,31\n";
  CsvSchema s;
  s.unit = "id";
  s.period = "t";
  s.outcome = "y";
  s.first_treat = "g";
  s.cluster = "state";
  std::istringstream in(csv);
  const auto p = load_panel(in, s);
  CHECK(p.weight_kind() == WeightKind::supplied);  // column named "weight" picked up
  CHECK(p.weight(0) == 2.5);
  REQUIRE(p.n_covariates() == 2);
  CHECK(p.covariate_names()[0] == "age");
  CHECK(p.unit(0).covariates(1, 0) == 31);
  CHECK(p.n_clusters() == 2);
  CHECK(p.cluster_codes()[0] == p.cluster_codes()[1]);
  CHECK(p.cluster_codes()[0] != p.cluster_codes()[2]);

  s.covariates = std::vector<std::string>{"inc"};
  std::istringstream in2(csv);
  const auto q = load_panel(in2, s);
  REQUIRE(q.n_covariates() == 1);
  CHECK(q.covariate_names()[0] == "inc");
}

TEST_CASE("time-varying weight or group within a unit is rejected") {
  CHECK(kind_of("unit,period,outcome,first_treat,weight\nA,1,1,0,1\nA,2,2,0,2\n") == ErrorKind::InvalidArgument);
  CHECK(kind_of("unit,period,outcome,first_treat\nA,1,1,0\nA,2,2,2\n") == ErrorKind::InvalidGroup);
}

TEST_CASE("dataset invariants") {
  using testing::U;
  CHECK_THROWS_AS(testing::make_panel({1}, {U{std::nullopt, {1.0}}}), Error);
  CHECK_THROWS_AS(testing::make_panel({2, 1}, {U{std::nullopt, {1.0, 2.0}}}), Error);
  CHECK_THROWS_AS(testing::make_panel({1, 2}, {U{std::nullopt, {1.0, 2.0}, -1.0}}), Error);
  // every group needs positive weight
  CHECK_THROWS_AS(testing::make_panel({1, 2}, {U{std::nullopt, {1, 2}, 1.0}, U{2, {1, 2}, 0.0}}), Error);
}

TEST_CASE("write then load reproduces a simulated panel") {
  DgpConfig c = testing::staggered_config(2604, 11, 11, {4, 6, 8, 10}, {0.15, 0.15, 0.15, 0.15});
  c.n_covariates = 6;
  c.selection_x = {0.3, -0.2, 0.1, 0, 0, 0.2};
  c.trend_x = {0.1, 0, 0, 0.2, 0, 0};
  c.weights = WeightDistribution::lognormal;
  const auto sim = simulate_staggered(c);
  std::stringstream buf;
  write_panel(buf, sim.data);
  const auto back = load_panel(buf);
  CHECK(back.covariate_names().size() == 6);
  REQUIRE(back.n_units() == sim.data.n_units());
  REQUIRE(back.n_periods() == 11);
  CHECK(back.periods() == sim.data.periods());
  CHECK(back.weight_kind() == WeightKind::supplied);
  for (std::size_t i = 0; i < back.n_units(); ++i) {
    const auto& a = sim.data.unit(i);
    const auto& b = back.unit(i);
    REQUIRE(a.unit_id == b.unit_id);
    REQUIRE(a.group == b.group);
    REQUIRE(a.weight == b.weight);
    REQUIRE((a.outcomes - b.outcomes).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.covariates - b.covariates).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("normalize_groups") {
  using testing::U;
  SUBCASE("groups {2,3,never} unchanged") {
    const auto p = testing::make_panel({1, 2, 3, 4}, {U{2, {1, 2, 3, 4}}, U{3, {1, 2, 3, 4}}, U{std::nullopt, {1, 2, 3, 4}}});
    const auto n = normalize_groups(p);
    CHECK(n.report.empty());
    CHECK(n.data.n_units() == 3);
    CHECK(n.data.n_periods() == 4);
    CHECK(n.report.original_units == 3);
  }
  SUBCASE("no never-treated: last cohort becomes the comparison") {
    const auto p = testing::make_panel({1, 2, 3, 4}, {U{2, {1, 2, 3, 4}}, U{4, {1, 2, 3, 4}}, U{4, {5, 6, 7, 8}}});
    const auto n = normalize_groups(p);
    CHECK(n.data.periods() == std::vector<int>{1, 2, 3});
    CHECK(n.data.group(1).is_never());
    CHECK(n.data.group(2).is_never());
    CHECK(n.data.group(0).period() == 2);
    CHECK(n.report.recoded_groups.at("4") == "never");
    CHECK(n.report.dropped_periods == std::vector<int>{4});
    CHECK(n.data.outcome(2, 2) == 7);
  }
  SUBCASE("first-period cohort dropped and listed") {
    const auto p = testing::make_panel({1, 2, 3}, {U{1, {1, 2, 3}}, U{2, {1, 2, 3}}, U{std::nullopt, {1, 2, 3}}, U{1, {1, 1, 1}}});
    const auto n = normalize_groups(p);
    CHECK(n.data.n_units() == 2);
    REQUIRE(n.report.dropped_units.size() == 2);
    CHECK(n.report.dropped_units[0].unit_id == "u0");
    CHECK(n.report.dropped_units[1].unit_id == "u3");
    std::size_t total = n.report.dropped_units.size();
    for (const auto& [g, count] : n.report.units_per_group) total += count;
    CHECK(total == n.report.original_units);
    for (std::size_t i = 0; i < n.data.n_units(); ++i) {
      if (!n.data.group(i).is_never()) CHECK(n.data.group(i).period() >= 2);
    }
  }
  SUBCASE("nothing left to compare") {
    const auto p = testing::make_panel({1, 2}, {U{2, {1, 2}}, U{2, {3, 4}}});
    CHECK_THROWS_WITH_AS(normalize_groups(p), doctest::Contains("NoComparisonPossible"), Error);
  }
}
