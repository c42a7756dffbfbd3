#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"

#include "didkit/aggregate.hpp"
#include "didkit/diagnostics.hpp"
#include "didkit/error.hpp"
#include "didkit/simulate.hpp"
#include "helpers.hpp"

using namespace didkit;
using testing::U;

namespace {

// Hand-built table: cohorts with weighted sizes, cells with given estimates
// and random influence vectors over n units.
struct TableBuilder {
  GroupTimeTable t;
  std::mt19937_64 rng{99};
  explicit TableBuilder(std::size_t n) {
    t.n_units = n;
    for (std::size_t i = 0; i < n; ++i) t.cluster_codes.push_back(static_cast<int>(i));
  }
  void cohort(int g, double weight) { t.cohorts.push_back({g, 0, 1, weight}); }
  void cell(int g, int e, double estimate) {
    std::normal_distribution<double> z;
    GroupTimeEffect c;
    c.g = g;
    c.t = g + e;
    c.event_time = e;
    c.effect.estimate = estimate;
    c.effect.influence.resize(static_cast<Eigen::Index>(t.n_units));
    for (auto& v : c.effect.influence) v = z(rng);
    c.effect.se = influence_se(c.effect.influence);
    t.cells.push_back(std::move(c));
  }
};

AttGtSettings never_means() {
  AttGtSettings s;
  s.assumption = ParallelTrends::never;
  return s;
}

double weight_of(const EventStudyPoint& p, int g) {
  for (const auto& w : p.weights) {
    if (w.g == g) return w.weight;
  }
  return 0.0;
}

}  // namespace

TEST_CASE("single cohort curve is the cohort row") {
  TableBuilder b(20);
  b.cohort(3, 10);
  for (int e : {-2, 0, 1, 2}) b.cell(3, e, 0.5 * e);
  const auto curve = event_study(b.t);
  REQUIRE(curve.points.size() == 4);
  for (const auto& p : curve.points) {
    CHECK(p.estimate == 0.5 * p.e);
    REQUIRE(p.weights.size() == 1);
    CHECK(p.weights[0].weight == 1.0);
  }
  CHECK(curve.at(-1) == nullptr);
}

TEST_CASE("equal cohorts average their effects") {
  TableBuilder b(20);
  b.cohort(3, 5);
  b.cohort(4, 5);
  b.cell(3, 0, 1.0);
  b.cell(4, 0, 3.0);
  CHECK(event_study(b.t).at(0)->estimate == doctest::Approx(2.0));
}

TEST_CASE("80/20 cohorts") {
  TableBuilder b(20);
  b.cohort(3, 80);
  b.cohort(4, 20);
  b.cell(3, 0, 1.5);
  b.cell(4, 0, -4.0);
  b.cell(3, 1, 2.0);
  const auto curve = event_study(b.t);
  CHECK(curve.at(0)->estimate == doctest::Approx(0.8 * 1.5 + 0.2 * -4.0).epsilon(1e-14));
  CHECK(curve.at(1)->estimate == doctest::Approx(2.0));  // only one cohort reaches e = 1
  CHECK(weight_of(*curve.at(1), 3) == 1.0);
}

TEST_CASE("weights are weighted cohort shares, recounted by brute force") {
  auto c = testing::staggered_config(2000, 21, 7, {3, 4, 6}, {0.25, 0.1, 0.2});
  c.weights = WeightDistribution::lognormal;
  const auto p = simulate_staggered(c).data;
  const auto table = att_gt(p, never_means());
  const auto curve = event_study(table);
  for (const auto& point : curve.points) {
    std::map<int, double> mass;
    for (std::size_t i = 0; i < p.n_units(); ++i) {
      if (p.group(i).is_never()) continue;
      const int g = p.group(i).period();
      if (std::any_of(table.cells.begin(), table.cells.end(), [&](const auto& cell) {
            return cell.g == g && cell.event_time == point.e;
          })) {
        mass[g] += p.weight(i);
      }
    }
    double total = 0, sum = 0, est = 0;
    for (const auto& [g, m] : mass) total += m;
    for (const auto& w : point.weights) {
      CHECK(w.weight == doctest::Approx(mass[w.g] / total).epsilon(1e-12));
      CHECK(w.weight >= 0);
      sum += w.weight;
      est += w.weight * table.find(w.g, p.periods()[p.period_index(w.g).value() + point.e])->effect.estimate;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(std::abs(est - point.estimate) <= 1e-12);
    CHECK(std::abs(point.se - influence_se(point.influence)) <= 1e-12);
  }
}

TEST_CASE("weights ignore the scale of the sampling weights") {
  TableBuilder a(10), b(10);
  for (auto* tb : {&a, &b}) {
    const double s = tb == &a ? 1.0 : 1000.0;
    tb->cohort(3, 2 * s);
    tb->cohort(5, 7 * s);
    tb->cell(3, 0, 1);
    tb->cell(5, 0, 2);
  }
  CHECK(event_study(a.t).at(0)->estimate == doctest::Approx(event_study(b.t).at(0)->estimate).epsilon(1e-14));
}

TEST_CASE("constant cells give a constant curve") {
  TableBuilder b(30);
  b.cohort(3, 4);
  b.cohort(5, 9);
  b.cohort(6, 1);
  for (int g : {3, 5, 6}) {
    for (int e = -2; e <= 8 - g; ++e) {
      if (e != -1) b.cell(g, e, 1.75);
    }
  }
  const auto curve = event_study(b.t);
  for (const auto& p : curve.points) CHECK(p.estimate == doctest::Approx(1.75).epsilon(1e-14));
  REQUIRE(curve.overall);
  CHECK(curve.overall->estimate == doctest::Approx(1.75).epsilon(1e-14));
}

TEST_CASE("balanced event study") {
  // cohorts 2014 (e up to 5) and 2019 (e = 0 only)
  std::mt19937_64 rng(22);
  std::normal_distribution<double> z;
  std::vector<int> periods;
  for (int y = 2008; y <= 2019; ++y) periods.push_back(y);
  std::vector<U> rows;
  for (int i = 0; i < 90; ++i) {
    U r;
    if (i % 3 == 0) r.g = 2014;
    if (i % 3 == 1) r.g = 2019;
    for (std::size_t t = 0; t < periods.size(); ++t) r.y.push_back(z(rng));
    rows.push_back(r);
  }
  const auto p = testing::make_panel(periods, rows);
  const auto table = att_gt(p, never_means());

  SUBCASE("window [0, 1]: only the early cohort contributes") {
    const auto bal = event_study_balanced(table, 0, 1);
    CHECK(bal.balanced);
    REQUIRE(bal.points.size() == 2);
    for (const auto& pt : bal.points) {
      REQUIRE(pt.weights.size() == 1);
      CHECK(pt.weights[0].g == 2014);
      CHECK(pt.estimate == table.find(2014, 2014 + pt.e)->effect.estimate);
    }
    // unbalanced curve mixes both cohorts at e = 0
    CHECK(event_study(table).at(0)->weights.size() == 2);
  }
  SUBCASE("window inside one cohort's support") {
    const auto bal = event_study_balanced(table, 2, 4);
    for (const auto& pt : bal.points) CHECK(pt.estimate == table.find(2014, 2014 + pt.e)->effect.estimate);
  }
  SUBCASE("widening the window never adds cohorts") {
    std::set<int> previous{2014, 2019};
    for (int hi = 0; hi <= 5; ++hi) {
      const auto bal = event_study_balanced(table, -hi, hi);
      std::set<int> members;
      for (const auto& pt : bal.points)
        for (const auto& w : pt.weights) members.insert(w.g);
      CHECK(std::includes(previous.begin(), previous.end(), members.begin(), members.end()));
      previous = members;
    }
  }
  SUBCASE("no cohort spans the window") {
    CHECK_THROWS_WITH_AS(event_study_balanced(table, 0, 6), doctest::Contains("NoBalancedCohort"), Error);
  }
}

TEST_CASE("balanced weights stay fixed across event times") {
  TableBuilder b(10);
  b.cohort(3, 1);
  b.cohort(4, 3);
  b.cohort(5, 100);
  for (int e = 0; e <= 2; ++e) {
    b.cell(3, e, e);
    b.cell(4, e, 10 + e);
  }
  b.cell(5, 0, 50);
  const auto bal = event_study_balanced(b.t, 0, 2);
  for (const auto& pt : bal.points) {
    CHECK(weight_of(pt, 3) == doctest::Approx(0.25));
    CHECK(weight_of(pt, 4) == doctest::Approx(0.75));
    CHECK(weight_of(pt, 5) == 0.0);
  }
}

TEST_CASE("overall effect") {
  SUBCASE("arithmetic mean of post points") {
    TableBuilder b(10);
    b.cohort(3, 1);
    b.cell(3, -2, 7);
    b.cell(3, 0, 0);
    b.cell(3, 1, -1);
    b.cell(3, 2, -2);
    const auto curve = event_study(b.t);
    const auto o = overall_att(curve);
    CHECK(o.estimate == doctest::Approx(-1.0));
    Eigen::VectorXd inf = (curve.at(0)->influence + curve.at(1)->influence + curve.at(2)->influence) / 3.0;
    CHECK((o.influence - inf).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(o.se - influence_se(inf)) < 1e-14);
  }
  SUBCASE("no post points") {
    TableBuilder b(10);
    b.cohort(3, 1);
    b.cell(3, -2, 1);
    const auto curve = event_study(b.t);
    CHECK_FALSE(curve.overall);
    CHECK_THROWS_WITH_AS(overall_att(curve), doctest::Contains("NoPostPeriods"), Error);
  }
  SUBCASE("empty table") {
    TableBuilder b(10);
    CHECK_THROWS_AS(event_study(b.t), Error);
  }
}

TEST_CASE("overall minus the static TWFE coefficient is the mean pre-period estimate") {
  // single cohort treated from period 5 of 8 with a pre-period drift
  std::mt19937_64 rng(23);
  std::normal_distribution<double> z;
  std::vector<U> rows;
  for (int i = 0; i < 200; ++i) {
    const bool treated = i < 80;
    U r;
    if (treated) r.g = 5;
    const double fe = z(rng);
    for (int t = 1; t <= 8; ++t) {
      double y = fe + 0.3 * t + z(rng);
      if (treated) y += -0.4 * t + (t >= 5 ? -2.0 : 0.0);
      r.y.push_back(y);
    }
    r.w = treated ? 1.0 + (i % 3) : 2.0 - (i % 2);
    rows.push_back(r);
  }
  for (bool weighted : {false, true}) {
    auto data = testing::make_panel({1, 2, 3, 4, 5, 6, 7, 8}, rows, {}, weighted);
    if (!weighted) {
      std::vector<U> flat = rows;
      for (auto& r : flat) r.w = 1.0;
      data = testing::make_panel({1, 2, 3, 4, 5, 6, 7, 8}, flat);
    }
    const auto curve = event_study(att_gt(data, never_means()));
    const double beta = twfe_fit(data, TwfeSpec::static_effect, weighted).coefficients(0);
    double pre = 0;  // e = -4..-2 plus the zero at e = -1
    for (int e = -4; e <= -2; ++e) pre += curve.at(e)->estimate;
    pre /= 4.0;
    CHECK(std::abs(pre) > 0.1);
    CHECK(std::abs(curve.overall->estimate - beta) > 0.1);
    CHECK(std::abs((curve.overall->estimate - beta) - pre) <= 1e-8);
  }
}

TEST_CASE("clustered aggregate se") {
  Eigen::VectorXd inf(6);
  inf << 1, -1, 2, 0.5, -0.5, 3;
  CHECK(aggregate_se(inf, {0, 1, 2, 3, 4, 5}) == doctest::Approx(influence_se(inf)));
  // two clusters of three: sums 2 and 3
  CHECK(aggregate_se(inf, {0, 0, 0, 1, 1, 1}) == doctest::Approx(std::sqrt(4.0 + 9.0) / 6.0));
}
