#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "didkit/config.hpp"
#include "didkit/panel.hpp"

namespace didkit {

enum class EffectShape { constant, ramp, table };

/// tau(g, e) for e >= 0. constant: a; ramp: a + b e; table: entries keyed by
/// (cohort label, e), missing entries are zero.
struct EffectSpec {
  EffectShape shape = EffectShape::ramp;
  double a = 1.0;
  double b = 0.0;
  std::map<std::pair<int, int>, double> table;

  double operator()(int g, int e) const;
};

enum class WeightDistribution { uniform, lognormal };

struct DgpConfig {
  std::size_t n_units = 1000;
  std::vector<int> periods{1, 2, 3, 4, 5, 6};
  std::vector<int> cohorts{3, 5};           // treated cohort labels
  std::vector<double> cohort_shares{0.3, 0.3};  // the never-treated share is the remainder
  double fe_sd = 1.0;
  std::vector<double> period_effects;  // theta_t; empty -> period_trend * index
  double period_trend = 0.5;
  std::size_t n_covariates = 0;
  double covariate_sd = 1.0;
  double selection_eta = 0.0;           // loading of the unit effect in cohort utilities
  std::vector<double> selection_x;      // loadings of X in cohort utilities
  std::vector<double> trend_x;          // lambda: X'lambda t enters Y(never)
  EffectSpec effect{};
  double noise_sd = 1.0;
  WeightDistribution weights = WeightDistribution::uniform;
  double weight_sigma = 0.5;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  double never_share() const;
  void validate() const;
};

DgpConfig dgp_from_config(const ConfigFile& cfg);

struct TrueEffects {
  std::map<std::pair<int, int>, double> att_gt;  // (g, t), t >= g
  std::map<int, double> event_study;             // e >= 0, realized weighted cohort shares
  double overall = 0.0;
};

struct SimulatedPanel {
  PanelDataset data;
  TrueEffects truth;
};

/// Y(never) = eta_i + theta_t + X_i'lambda t + eps; cohorts from a multinomial
/// logit in (eta_i, X_i). Draws come from per-unit streams keyed by (seed, unit).
SimulatedPanel simulate_staggered(const DgpConfig& cfg);

}  // namespace didkit
