#include "didkit/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "didkit/error.hpp"
#include "parallel.hpp"

namespace didkit {

double EffectSpec::operator()(int g, int e) const {
  switch (shape) {
    case EffectShape::constant: return a;
    case EffectShape::ramp: return a + b * e;
    case EffectShape::table: {
      auto it = table.find({g, e});
      return it == table.end() ? 0.0 : it->second;
    }
  }
  return 0.0;
}

double DgpConfig::never_share() const {
  double s = 0.0;
  for (double v : cohort_shares) s += v;
  return 1.0 - s;
}

void DgpConfig::validate() const {
  if (periods.size() < 2) throw Error(ErrorKind::InvalidArgument, "at least two periods are required");
  for (std::size_t t = 1; t < periods.size(); ++t) {
    if (periods[t] <= periods[t - 1]) throw Error(ErrorKind::InvalidArgument, "periods must increase strictly");
  }
  if (cohorts.size() != cohort_shares.size()) {
    throw Error(ErrorKind::InvalidArgument, "cohorts and cohort shares differ in length");
  }
  for (std::size_t k = 0; k < cohorts.size(); ++k) {
    const auto it = std::find(periods.begin(), periods.end(), cohorts[k]);
    if (it == periods.end() || it == periods.begin()) {
      throw Error(ErrorKind::InvalidArgument, "cohort " + std::to_string(cohorts[k]) +
                                                  " must be a period label after the first period");
    }
    if (!(cohort_shares[k] >= 0.0)) throw Error(ErrorKind::InfeasibleShares, "cohort shares must be nonnegative");
  }
  if (never_share() < -1e-12) throw Error(ErrorKind::InfeasibleShares, "cohort shares sum to more than one");
  const std::size_t groups = cohorts.size() + (never_share() > 1e-12 ? 1 : 0);
  if (n_units < 4 * groups) {
    throw Error(ErrorKind::InfeasibleShares, "need at least " + std::to_string(4 * groups) + " units for " +
                                                 std::to_string(groups) + " groups");
  }
  if (!period_effects.empty() && period_effects.size() != periods.size()) {
    throw Error(ErrorKind::InvalidArgument, "period_effects must have one entry per period");
  }
  if (selection_x.size() > n_covariates || trend_x.size() > n_covariates) {
    throw Error(ErrorKind::InvalidArgument, "more covariate loadings than covariates");
  }
  if (fe_sd < 0.0 || noise_sd < 0.0 || covariate_sd < 0.0 || weight_sigma < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "standard deviations must be nonnegative");
  }
}

DgpConfig dgp_from_config(const ConfigFile& cfg) {
  static const std::set<std::string> known{
      "n_units",      "periods",       "n_periods",     "seed",
      "fe_sd",        "noise_sd",      "period_trend",  "period_effects",
      "cohorts.periods", "cohorts.shares", "covariates.k", "covariates.sd",
      "covariates.selection", "covariates.trend", "selection.eta", "effect.shape",
      "effect.a",     "effect.b",      "effect.table",  "weights.kind",
      "weights.sigma"};
  for (const auto& k : cfg.keys()) {
    if (!known.count(k)) throw Error(ErrorKind::InvalidArgument, "unknown generator setting '" + k + "'");
  }
  DgpConfig d;
  auto as_ints = [](const std::vector<long long>& v) { return std::vector<int>(v.begin(), v.end()); };
  if (auto v = cfg.get_int("n_units")) {
    if (*v <= 0) throw Error(ErrorKind::InvalidArgument, "n_units must be positive");
    d.n_units = static_cast<std::size_t>(*v);
  }
  if (auto v = cfg.get_int_list("periods")) {
    d.periods = as_ints(*v);
  } else if (auto n = cfg.get_int("n_periods")) {
    if (*n < 2) throw Error(ErrorKind::InvalidArgument, "n_periods must be at least 2");
    d.periods.clear();
    for (int t = 1; t <= *n; ++t) d.periods.push_back(t);
  }
  if (auto v = cfg.get_int("seed")) d.seed = static_cast<std::uint64_t>(*v);
  if (auto v = cfg.get_double("fe_sd")) d.fe_sd = *v;
  if (auto v = cfg.get_double("noise_sd")) d.noise_sd = *v;
  if (auto v = cfg.get_double("period_trend")) d.period_trend = *v;
  if (auto v = cfg.get_double_list("period_effects")) d.period_effects = *v;
  if (auto v = cfg.get_int_list("cohorts.periods")) d.cohorts = as_ints(*v);
  if (auto v = cfg.get_double_list("cohorts.shares")) d.cohort_shares = *v;
  if (auto v = cfg.get_int("covariates.k")) {
    if (*v < 0) throw Error(ErrorKind::InvalidArgument, "covariates.k must be nonnegative");
    d.n_covariates = static_cast<std::size_t>(*v);
  }
  if (auto v = cfg.get_double("covariates.sd")) d.covariate_sd = *v;
  if (auto v = cfg.get_double_list("covariates.selection")) d.selection_x = *v;
  if (auto v = cfg.get_double_list("covariates.trend")) d.trend_x = *v;
  if (auto v = cfg.get_double("selection.eta")) d.selection_eta = *v;
  if (auto s = cfg.get_string("effect.shape")) {
    if (*s == "constant") d.effect.shape = EffectShape::constant;
    else if (*s == "ramp") d.effect.shape = EffectShape::ramp;
    else if (*s == "table") d.effect.shape = EffectShape::table;
    else throw Error(ErrorKind::InvalidArgument, "effect.shape must be constant, ramp or table");
  }
  if (auto v = cfg.get_double("effect.a")) d.effect.a = *v;
  if (auto v = cfg.get_double("effect.b")) d.effect.b = *v;
  if (auto v = cfg.get_string_list("effect.table")) {
    // entries "g:e:value"
    for (const auto& item : *v) {
      const auto c1 = item.find(':');
      const auto c2 = item.find(':', c1 == std::string::npos ? c1 : c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos) {
        throw Error(ErrorKind::InvalidArgument, "effect.table entries look like \"g:e:value\", got '" + item + "'");
      }
      try {
        d.effect.table[{std::stoi(item.substr(0, c1)), std::stoi(item.substr(c1 + 1, c2 - c1 - 1))}] =
            std::stod(item.substr(c2 + 1));
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::InvalidArgument, "bad effect.table entry '" + item + "'");
      }
    }
  }
  if (auto s = cfg.get_string("weights.kind")) {
    if (*s == "uniform") d.weights = WeightDistribution::uniform;
    else if (*s == "lognormal") d.weights = WeightDistribution::lognormal;
    else throw Error(ErrorKind::InvalidArgument, "weights.kind must be uniform or lognormal");
  }
  if (auto v = cfg.get_double("weights.sigma")) d.weight_sigma = *v;
  d.validate();
  return d;
}

SimulatedPanel simulate_staggered(const DgpConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_units;
  const std::size_t T = cfg.periods.size();
  const std::size_t K = cfg.n_covariates;
  const std::size_t G = cfg.cohorts.size();
  const double never = std::max(0.0, cfg.never_share());

  std::vector<double> theta(T);
  for (std::size_t t = 0; t < T; ++t) {
    theta[t] = cfg.period_effects.empty() ? cfg.period_trend * static_cast<double>(t + 1) : cfg.period_effects[t];
  }

  std::vector<UnitSeries> units(n);
  std::vector<int> assigned(n);  // cohort slot, G = never
  detail::parallel_for(n, cfg.threads, [&](std::size_t i) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), 0x5eedu};
    std::mt19937_64 gen(seq);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const double eta = cfg.fe_sd * std_normal(gen);
    Eigen::RowVectorXd x(static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) x(static_cast<Eigen::Index>(k)) = cfg.covariate_sd * std_normal(gen);

    // multinomial logit over cohorts and never-treated
    double index = cfg.selection_eta * eta;
    for (std::size_t k = 0; k < cfg.selection_x.size(); ++k) index += cfg.selection_x[k] * x(static_cast<Eigen::Index>(k));
    std::vector<double> util(G + 1, -INFINITY);
    for (std::size_t k = 0; k < G; ++k) {
      if (cfg.cohort_shares[k] > 0.0) util[k] = std::log(cfg.cohort_shares[k]) + index;
    }
    if (never > 1e-12) util[G] = std::log(never);
    const double top = *std::max_element(util.begin(), util.end());
    double total = 0.0;
    for (auto& u : util) total += (u = std::exp(u - top));
    double draw = unif(gen) * total;
    std::size_t slot = G;
    for (std::size_t k = 0; k <= G; ++k) {
      if (util[k] == 0.0) continue;
      slot = k;
      if (draw < util[k]) break;
      draw -= util[k];
    }
    assigned[i] = static_cast<int>(slot);

    auto& u = units[i];
    u.unit_id = std::to_string(i + 1);
    u.group = slot == G ? Cohort::never() : Cohort::at(cfg.cohorts[slot]);
    u.weight = cfg.weights == WeightDistribution::uniform
                   ? 1.0
                   : std::exp(cfg.weight_sigma * std_normal(gen) - 0.5 * cfg.weight_sigma * cfg.weight_sigma);
    double slope = 0.0;
    for (std::size_t k = 0; k < cfg.trend_x.size(); ++k) slope += cfg.trend_x[k] * x(static_cast<Eigen::Index>(k));
    u.outcomes.resize(static_cast<Eigen::Index>(T));
    u.covariates.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(K));
    for (std::size_t t = 0; t < T; ++t) {
      double y = eta + theta[t] + slope * static_cast<double>(t + 1) + cfg.noise_sd * std_normal(gen);
      if (slot != G) {
        const auto gi = static_cast<std::size_t>(
            std::find(cfg.periods.begin(), cfg.periods.end(), cfg.cohorts[slot]) - cfg.periods.begin());
        if (t >= gi) y += cfg.effect(cfg.cohorts[slot], static_cast<int>(t - gi));
      }
      u.outcomes(static_cast<Eigen::Index>(t)) = y;
      u.covariates.row(static_cast<Eigen::Index>(t)) = x;
    }
  });

  std::vector<double> cohort_mass(G, 0.0);
  std::vector<std::size_t> cohort_count(G + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++cohort_count[static_cast<std::size_t>(assigned[i])];
    if (static_cast<std::size_t>(assigned[i]) < G) cohort_mass[static_cast<std::size_t>(assigned[i])] += units[i].weight;
  }
  for (std::size_t k = 0; k < G; ++k) {
    if (cfg.cohort_shares[k] > 0.0 && cohort_count[k] == 0) {
      throw Error(ErrorKind::InfeasibleShares, "cohort " + std::to_string(cfg.cohorts[k]) + " received no units");
    }
  }
  if (never > 1e-12 && cohort_count[G] == 0) {
    throw Error(ErrorKind::InfeasibleShares, "the never-treated group received no units");
  }

  std::vector<std::string> names;
  for (std::size_t k = 0; k < K; ++k) names.push_back("x" + std::to_string(k + 1));
  const auto weight_kind = cfg.weights == WeightDistribution::uniform ? WeightKind::uniform : WeightKind::supplied;
  PanelDataset data(cfg.periods, names, weight_kind, std::move(units));

  TrueEffects truth;
  std::map<int, std::pair<double, double>> es;  // e -> (sum w tau, sum w)
  for (std::size_t k = 0; k < G; ++k) {
    if (cohort_count[k] == 0) continue;
    const int g = cfg.cohorts[k];
    const auto gi = static_cast<std::size_t>(std::find(cfg.periods.begin(), cfg.periods.end(), g) - cfg.periods.begin());
    for (std::size_t t = gi; t < T; ++t) {
      const int e = static_cast<int>(t - gi);
      const double tau = cfg.effect(g, e);
      truth.att_gt[{g, cfg.periods[t]}] = tau;
      es[e].first += cohort_mass[k] * tau;
      es[e].second += cohort_mass[k];
    }
  }
  for (const auto& [e, acc] : es) truth.event_study[e] = acc.first / acc.second;
  for (const auto& [e, v] : truth.event_study) truth.overall += v;
  if (!truth.event_study.empty()) truth.overall /= static_cast<double>(truth.event_study.size());
  return {std::move(data), std::move(truth)};
}

}  // namespace didkit
