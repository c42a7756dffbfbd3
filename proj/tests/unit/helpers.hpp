#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "didkit/panel.hpp"
#include "didkit/simulate.hpp"

namespace testing {

struct U {
  std::optional<int> g;       // first-treatment period label, empty = never
  std::vector<double> y;      // one outcome per period
  double w = 1.0;
  std::vector<double> x{};    // time-constant covariates
  std::string cluster{};
};

inline didkit::PanelDataset make_panel(std::vector<int> periods, const std::vector<U>& rows,
                                       std::vector<std::string> cov_names = {}, bool weighted = false) {
  std::vector<didkit::UnitSeries> units;
  const auto T = static_cast<Eigen::Index>(periods.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    didkit::UnitSeries u;
    u.unit_id = "u" + std::to_string(i);
    u.group = rows[i].g ? didkit::Cohort::at(*rows[i].g) : didkit::Cohort::never();
    u.weight = rows[i].w;
    u.outcomes = Eigen::Map<const Eigen::VectorXd>(rows[i].y.data(), T);
    const auto K = static_cast<Eigen::Index>(rows[i].x.size());
    u.covariates.resize(T, K);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index k = 0; k < K; ++k) u.covariates(t, k) = rows[i].x[static_cast<std::size_t>(k)];
    }
    u.cluster = rows[i].cluster;
    units.push_back(std::move(u));
  }
  if (cov_names.empty() && !rows.empty()) {
    for (std::size_t k = 0; k < rows.front().x.size(); ++k) cov_names.push_back("x" + std::to_string(k + 1));
  }
  return didkit::PanelDataset(std::move(periods), std::move(cov_names),
                              weighted ? didkit::WeightKind::supplied : didkit::WeightKind::uniform, std::move(units));
}

// Staggered generator settings used across several test files.
inline didkit::DgpConfig staggered_config(std::size_t n, std::uint64_t seed, std::size_t T = 6,
                                          std::vector<int> cohorts = {3, 5}, std::vector<double> shares = {0.3, 0.3}) {
  didkit::DgpConfig c;
  c.n_units = n;
  c.periods.clear();
  for (std::size_t t = 1; t <= T; ++t) c.periods.push_back(static_cast<int>(t));
  c.cohorts = std::move(cohorts);
  c.cohort_shares = std::move(shares);
  c.seed = seed;
  return c;
}

// Two-period panel for the nuisance-misspecification experiments: x1, x2
// standard normal, logit(P(D=1)) = -0.3 + 0.8 x1 + 0.8 x2, dY(0) = 1 + 1.5 x1
// + 1.5 x2 + e, effect tau on the treated.
inline didkit::PanelDataset dr_panel(std::size_t n, std::uint64_t seed, double tau = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<U> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = z(rng), x2 = z(rng);
    const bool d = u(rng) < 1.0 / (1.0 + std::exp(0.3 - 0.8 * x1 - 0.8 * x2));
    const double y0 = 0.5 * x1 + z(rng);
    const double dy = 1.0 + 1.5 * x1 + 1.5 * x2 + z(rng) + (d ? tau : 0.0);
    U r;
    if (d) r.g = 2;
    r.y = {y0, y0 + dy};
    r.x = {x1, x2};
    rows.push_back(std::move(r));
  }
  return make_panel({1, 2}, rows);
}

}  // namespace testing
