// Acceptance run: one PASS/FAIL line per criterion.
// Exit status counts failures, except those listed as known divergences.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "didkit/aggregate.hpp"
#include "didkit/diagnostics.hpp"
#include "didkit/did2x2.hpp"
#include "didkit/error.hpp"
#include "didkit/inference.hpp"
#include "didkit/report.hpp"
#include "didkit/simulate.hpp"
#include "didkit/staggered.hpp"
#include "helpers.hpp"

using namespace didkit;
using testing::U;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

TwoByTwoFrame frame_of(const PanelDataset& p) {
  std::vector<std::size_t> t, c;
  for (std::size_t i = 0; i < p.n_units(); ++i) (p.group(i).is_never() ? c : t).push_back(i);
  return TwoByTwoFrame::from_panel(p, t, c, 0, 1);
}

// arm whose plain and weighted means both hit (pre, post)
std::vector<U> arm(std::optional<int> g, double pre, double post) {
  const double w[] = {1, 2, 3}, dev[] = {2, 2, -2};
  std::vector<U> out;
  for (int k = 0; k < 3; ++k) out.push_back(U{g, {pre + dev[k], post - 0.5 * dev[k]}, w[k]});
  return out;
}

PanelDataset four_means(double t_pre, double t_post, double c_pre, double c_post, bool weighted) {
  auto rows = arm(2014, t_pre, t_post);
  for (auto& r : arm(std::nullopt, c_pre, c_post)) rows.push_back(r);
  if (!weighted) {
    rows.clear();
    for (double d : {1.0, 0.0, -1.0}) rows.push_back(U{2014, {t_pre + d, t_post - d}});
    for (double d : {1.0, 0.0, -1.0}) rows.push_back(U{std::nullopt, {c_pre + d, c_post - d}});
  }
  return testing::make_panel({2013, 2014}, rows, {}, weighted);
}

Outcome criterion1() {
  Outcome o;
  const auto t0 = Clock::now();
  const double raw = att_means(frame_of(four_means(419.2, 428.5, 474.0, 483.1, false))).estimate;
  o.require(std::abs(raw - 0.1) <= 0.1 + 1e-9, fmt("unweighted %.4f vs 0.1 +/- 0.1", raw));
  const double w = att_means(frame_of(four_means(322.7, 326.5, 376.4, 382.7, true))).estimate;
  o.require(std::abs(w - -2.6) <= 0.05 + 1e-9,
            fmt("weighted %.4f vs -2.6 +/- 0.05 (the rounded means give (326.5-322.7)-(382.7-376.4) = -2.5 exactly; "
                "-2.6 needs the unrounded treated trend 3.7)",
                w));
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, fmt("%.3f s < 1 s", secs));
  return o;
}

PanelDataset two_by_two(std::uint64_t seed, bool weighted) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.2, 3);
  std::vector<U> rows;
  for (int i = 0; i < 500; ++i) {
    const bool d = i % 3 == 0;
    const double y0 = z(rng) + (d ? 1 : 0);
    rows.push_back(U{d ? std::optional<int>(2) : std::nullopt, {y0, y0 + 0.4 + z(rng) + (d ? -0.9 : 0)},
                     weighted ? u(rng) : 1.0});
  }
  return testing::make_panel({1, 2}, rows, {}, weighted);
}

Outcome criterion2() {
  Outcome o;
  const auto t0 = Clock::now();
  for (bool weighted : {false, true}) {
    const auto p = two_by_two(4, weighted);
    const double means = att_means(frame_of(p)).estimate;
    const double twfe = twfe_fit(p, TwfeSpec::static_effect, weighted).coefficients(0);
    const double ld = long_difference_fit(p, weighted).coefficient;
    const double gap = std::max(std::abs(twfe - means), std::abs(ld - means));
    o.require(gap <= 1e-10, fmt(weighted ? "weighted 2x2 max gap %.2e" : "unweighted 2x2 max gap %.2e", gap));
  }
  auto c = testing::staggered_config(1500, 8, 11, {3, 5, 7, 8, 10}, {0.12, 0.12, 0.12, 0.12, 0.12});
  c.effect.a = 1;
  c.effect.b = 0.5;
  c.weights = WeightDistribution::lognormal;
  const auto p = simulate_staggered(c).data;
  for (bool weighted : {false, true}) {
    const auto sa = sun_abraham_fit(p, weighted);
    AttGtSettings s;
    s.assumption = ParallelTrends::never;
    PanelDataset data = p;
    if (!weighted) {
      std::vector<UnitSeries> units;
      for (std::size_t i = 0; i < p.n_units(); ++i) {
        auto u = p.unit(i);
        u.weight = 1.0;
        units.push_back(u);
      }
      data = PanelDataset(p.periods(), p.covariate_names(), WeightKind::uniform, std::move(units));
    }
    const auto gt = att_gt(data, s);
    double gap = 0;
    std::size_t matched = 0;
    for (const auto& cell : sa.cells) {
      const auto* other = gt.find(cell.g, cell.t);
      if (!other) continue;
      ++matched;
      gap = std::max(gap, std::abs(cell.effect.estimate - other->effect.estimate));
    }
    o.require(matched == sa.cells.size() && matched == gt.cells.size(), fmt("%.0f cells matched", matched));
    o.require(gap <= 1e-10, fmt(weighted ? "weighted saturated vs att_gt max gap %.2e"
                                         : "unweighted saturated vs att_gt max gap %.2e",
                                gap));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 5.0, fmt("%.2f s < 5 s", secs));
  return o;
}

Outcome criterion3() {
  Outcome o;
  std::mt19937_64 rng(23);
  std::normal_distribution<double> z;
  std::vector<U> rows;
  for (int i = 0; i < 400; ++i) {
    const bool treated = i < 160;
    U r;
    if (treated) r.g = 5;
    const double fe = z(rng);
    for (int t = 1; t <= 8; ++t) {
      double y = fe + 0.3 * t + z(rng);
      if (treated) y += -0.4 * t + (t >= 5 ? -2.0 : 0.0);
      r.y.push_back(y);
    }
    rows.push_back(r);
  }
  const auto data = testing::make_panel({1, 2, 3, 4, 5, 6, 7, 8}, rows);
  AttGtSettings s;
  s.assumption = ParallelTrends::never;
  const auto curve = event_study(att_gt(data, s));
  const double beta = twfe_fit(data, TwfeSpec::static_effect, false).coefficients(0);
  double pre = 0;  // e = -4..-2 plus the zero at e = -1
  for (int e = -4; e <= -2; ++e) pre += curve.at(e)->estimate;
  pre /= 4.0;
  const double gap = std::abs((curve.overall->estimate - beta) - pre);
  o.require(std::abs(pre) > 0.1, fmt("mean pre-period estimate %.4f is nonzero", pre));
  o.require(gap <= 1e-8, fmt("overall %.4f - beta %.4f vs mean pre %.4f: gap %.2e", curve.overall->estimate, beta,
                             pre, gap));
  return o;
}

Outcome criterion4() {
  Outcome o;
  // periods 1, 2: early treated from 1, late from 2, never; common trend 0.5
  std::vector<U> rows;
  auto add = [&](std::optional<int> g, double d, int n) {
    for (int i = 0; i < n; ++i) rows.push_back(U{g, {10.0 + i, 10.0 + i + d}});
  };
  add(1, 0.5 + 2.0, 40);
  add(2, 0.5, 30);
  add(std::nullopt, 0.5, 40);
  const auto p = testing::make_panel({1, 2}, rows);
  const auto b = bacon_two_period(p, false);
  const double twfe = twfe_fit(p, TwfeSpec::static_effect, false).coefficients(0);
  double recon = 0;
  for (const auto& t : b.comparisons) recon += t.weight * t.estimate;
  double recon2 = 0;
  for (const auto& t : b.components) recon2 += t.weight * t.estimate;
  AttGtSettings s;
  s.assumption = ParallelTrends::not_yet;
  const auto gt = att_gt(p, s);
  const auto* cell = gt.find(2, 2);
  o.require(b.w1 == 0.5, fmt("w1 = %.4f", b.w1));
  o.require(std::abs(twfe - -1.0) <= 1e-10, fmt("TWFE beta %.12f", twfe));
  o.require(cell && std::abs(cell->effect.estimate) <= 1e-10, fmt("ATT(2,2) = %.2e", cell ? cell->effect.estimate : NAN));
  o.require(std::abs(recon - twfe) <= 1e-10 && std::abs(recon2 - twfe) <= 1e-10,
            fmt("reconstruction errors %.2e, %.2e", std::abs(recon - twfe), std::abs(recon2 - twfe)));
  return o;
}

struct McStat {
  double mean = 0, sq = 0;
  int n = 0;
  void add(double v) {
    ++n;
    mean += (v - mean) / n;
    sq += v * v;
  }
  double mcse() const { return std::sqrt((sq / n - mean * mean) * n / (n - 1) / n); }
};

Outcome criterion5() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto good = DesignBuilder::linear();
  const auto bad = DesignBuilder::linear(std::vector<std::size_t>{0});  // drops x2
  McStat dr_bad_outcome, ra_bad, dr_bad_score, ipw_bad;
  for (int r = 0; r < 500; ++r) {
    const auto f = frame_of(testing::dr_panel(2000, 90000 + r));
    dr_bad_outcome.add(att_dr(f, bad, good).estimate - 1.0);
    ra_bad.add(att_ra(f, bad).estimate - 1.0);
    dr_bad_score.add(att_dr(f, good, bad).estimate - 1.0);
    ipw_bad.add(att_ipw(f, bad).estimate - 1.0);
  }
  auto line = [&](const char* name, const McStat& s) {
    return std::string(name) + fmt(" bias %.4f (%.1f MC se)", s.mean, s.mean / s.mcse());
  };
  o.require(std::abs(dr_bad_outcome.mean) < 3 * dr_bad_outcome.mcse(), line("dr/wrong outcome model", dr_bad_outcome));
  o.require(std::abs(ra_bad.mean) > 5 * ra_bad.mcse(), line("ra/wrong outcome model", ra_bad));
  o.require(std::abs(dr_bad_score.mean) < 3 * dr_bad_score.mcse(), line("dr/wrong propensity model", dr_bad_score));
  o.require(std::abs(ipw_bad.mean) > 5 * ipw_bad.mcse(), line("ipw/wrong propensity model", ipw_bad));
  const double secs = seconds_since(t0);
  o.require(secs < 120.0, fmt("%.1f s < 120 s", secs));
  return o;
}

DgpConfig oracle_config(std::uint64_t seed) {
  auto c = testing::staggered_config(5000, seed, 8, {3, 4, 5}, {0.2, 0.2, 0.2});
  c.n_covariates = 2;
  c.selection_x = {0.6, -0.4};
  c.trend_x = {0.5, 0.3};
  c.effect.shape = EffectShape::ramp;
  c.effect.a = 1;
  c.effect.b = 1;
  return c;
}

Outcome criterion6() {
  Outcome o;
  const auto t0 = Clock::now();
  const int reps = 100;
  std::vector<McStat> err(5);
  AttGtSettings s;
  s.assumption = ParallelTrends::not_yet;
  s.estimator = EstimatorKind::dr;
  s.include_pretrends = false;
  for (int r = 0; r < reps; ++r) {
    const auto sim = simulate_staggered(oracle_config(7000 + static_cast<std::uint64_t>(r)));
    const auto curve = event_study(att_gt(sim.data, s));
    for (int e = 0; e <= 4; ++e) err[static_cast<std::size_t>(e)].add(curve.at(e)->estimate - sim.truth.event_study.at(e));
  }
  for (int e = 0; e <= 4; ++e) {
    const auto& m = err[static_cast<std::size_t>(e)];
    o.require(std::abs(m.mean) < 3 * m.mcse(), fmt("e=%.0f error %.4f (%.2f MC se)", e, m.mean, m.mean / m.mcse()));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 60.0, fmt("%.1f s < 60 s over %.0f replications", secs, reps));
  return o;
}

Outcome criterion7() {
  Outcome o;
  {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    Eigen::MatrixXd inf(2000, 1);
    for (Eigen::Index i = 0; i < inf.rows(); ++i) inf(i, 0) = z(rng);
    std::vector<int> clusters(2000);
    for (int i = 0; i < 2000; ++i) clusters[static_cast<std::size_t>(i)] = i;
    BandOptions b;
    b.draws = 1999;
    b.seed = 11;
    const auto band = sup_t_band(inf, Eigen::VectorXd::Zero(1), clusters, b);
    o.require(std::abs(band.critical_value - 1.96) <= 0.1, fmt("p=1 critical value %.4f", band.critical_value));
  }
  {
    const auto sim = simulate_staggered(oracle_config(3));
    AttGtSettings s;
    s.estimator = EstimatorKind::dr;
    const auto table = att_gt(sim.data, s);
    auto one = event_study(table), four = event_study(table);
    BandOptions b;
    b.seed = 99;
    attach_band(one, b);
    b.threads = 4;
    attach_band(four, b);
    bool nested = true;
    for (const auto& p : one.points) {
      if (!p.simultaneous) continue;
      nested = nested && p.simultaneous->lower <= p.pointwise.lower && p.simultaneous->upper >= p.pointwise.upper;
    }
    o.require(nested, "simultaneous bands contain pointwise bands");
    o.require(canonical_json(to_json(one)) == canonical_json(to_json(four)), "bands identical for 1 and 4 threads");
  }
  {
    int rejections = 0;
    const int reps = 500;
    for (int r = 0; r < reps; ++r) {
      auto c = testing::staggered_config(1000, 40000 + static_cast<std::uint64_t>(r), 6, {3, 5}, {0.3, 0.3});
      c.effect.a = 1;
      const auto t = pretrend_joint_test(att_gt(simulate_staggered(c).data));
      if (t.p_value < 0.05) ++rejections;
    }
    const double size = static_cast<double>(rejections) / reps;
    o.require(size >= 0.025 && size <= 0.08, fmt("pre-trend test size %.3f over 500 null replications", size));
  }
  return o;
}

Outcome criterion8() {
  Outcome o;
  EventStudyCurve c;
  auto add = [&](int e, double est) {
    EventStudyPoint p;
    p.e = e;
    p.estimate = est;
    p.se = 1.0;
    p.pointwise = {est - 1.96, est + 1.96};
    c.points.push_back(p);
  };
  add(-3, -4.0);
  add(-2, 0.0);
  add(-1, 0.0);
  add(0, -2.6);
  SensitivityOptions s;
  s.target_e = 0;
  s.mbar = 1.0;
  const auto r = sensitivity_bounds(c, s);
  o.require(r.max_pre_step && std::abs(*r.max_pre_step - 4.0) <= 1e-12, fmt("max pre-step %.4f", r.max_pre_step.value_or(NAN)));
  o.require(std::abs(r.identified.lower - -6.6) <= 1e-12 && std::abs(r.identified.upper - 1.4) <= 1e-12,
            fmt("identified set [%.10g, %.10g]", r.identified.lower, r.identified.upper));
  return o;
}

void add_arm(std::vector<U>& rows, std::optional<int> g, double m, double var, int n, double w) {
  const double total = n * w;
  const double a = std::sqrt(var * (total - 1) / total);
  for (int i = 0; i < n; ++i) rows.push_back(U{g, {0, 0}, w, {i % 2 ? m + a : m - a}});
}

double level_nd(const BalanceTable& t) {
  for (const auto& r : t.rows) {
    if (r.kind == BalanceKind::level) return r.normalized_difference;
  }
  return NAN;
}

Outcome criterion9() {
  Outcome o;
  auto fixture = [](double mt, double mc, double nd, int nt, int nc, double wt, double wc, double scale, bool swap) {
    const double pooled = (mt - mc) / nd;
    std::vector<U> rows;
    const std::optional<int> treated = 2;
    add_arm(rows, swap ? std::nullopt : treated, scale * mt, scale * scale * 0.8 * pooled * pooled, nt, wt);
    add_arm(rows, swap ? treated : std::nullopt, scale * mc, scale * scale * 1.2 * pooled * pooled, nc, wc);
    const bool weighted = wt != 1.0 || wc != 1.0;
    return level_nd(balance_table(testing::make_panel({1, 2}, rows, {}, weighted), 1, 2, weighted));
  };
  const double white = fixture(90.48, 81.64, 0.59, 200, 300, 1.0, 1.0, 1.0, false);
  const double unemp = fixture(8.01, 7.00, 0.50, 100, 140, 2.5, 0.75, 1.0, false);
  o.require(std::abs(white - 0.59) <= 0.005, fmt("share white ND %.4f", white));
  o.require(std::abs(unemp - 0.50) <= 0.005, fmt("unemployment ND %.4f", unemp));
  const double scaled = fixture(90.48, 81.64, 0.59, 200, 300, 1.0, 1.0, 100.0, false);
  o.require(std::abs(scaled - white) <= 1e-10, fmt("x100 scale ND %.6f", scaled));
  const double swapped = fixture(90.48, 81.64, 0.59, 200, 300, 1.0, 1.0, 1.0, true);
  o.require(std::abs(swapped + white) <= 1e-10, fmt("swapped arms ND %.6f", swapped));
  return o;
}

Outcome criterion10() {
  Outcome o;
  auto c = testing::staggered_config(2604, 2024, 11, {4, 6, 8, 10}, {0.15, 0.15, 0.15, 0.15});
  c.n_covariates = 6;
  c.selection_x = {0.3, -0.3, 0.2, 0, 0, 0.1};
  c.trend_x = {0.2, 0.1, 0, 0, -0.1, 0};
  c.effect.a = 1;
  c.effect.b = 0.5;
  c.weights = WeightDistribution::lognormal;
  std::ostringstream csv;
  write_panel(csv, simulate_staggered(c).data);
  const std::string text = csv.str();
  auto pipeline = [&]() {
    std::istringstream in(text);
    const auto data = normalize_groups(load_panel(in)).data;
    AttGtSettings s;
    s.estimator = EstimatorKind::dr;
    s.assumption = ParallelTrends::not_yet;
    s.threads = 4;
    auto curve = event_study(att_gt(data, s));
    BandOptions b;
    b.draws = 999;
    b.seed = 7;
    b.threads = 4;
    attach_band(curve, b);
    return canonical_json(to_json(curve));
  };
  const auto t0 = Clock::now();
  const auto first = pipeline();
  const double secs = seconds_since(t0);
  const auto second = pipeline();
  o.require(secs < 30.0, fmt("2604 x 11 x 6 pipeline %.2f s < 30 s", secs));
  o.require(first == second, "identical output on rerun");
  return o;
}

}  // namespace

int main() {
  // criterion 1's weighted target cannot be met from the rounded published means
  const std::set<int> known_divergences{1};
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  int unexpected = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw ") + e.what();
    }
    std::printf("%s criterion %d: %s%s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(),
                !o.pass && known_divergences.count(id) ? " [known divergence]" : "");
    std::fflush(stdout);
    if (!o.pass && !known_divergences.count(id)) ++unexpected;
  }
  return unexpected;
}
