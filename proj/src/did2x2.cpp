#include "didkit/did2x2.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "didkit/error.hpp"

namespace didkit {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::means: return "means";
    case EstimatorKind::ra: return "ra";
    case EstimatorKind::ipw: return "ipw";
    case EstimatorKind::dr: return "dr";
  }
  return "means";
}

std::optional<EstimatorKind> parse_estimator(std::string_view name) {
  if (name == "means") return EstimatorKind::means;
  if (name == "ra") return EstimatorKind::ra;
  if (name == "ipw") return EstimatorKind::ipw;
  if (name == "dr") return EstimatorKind::dr;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

DesignBuilder DesignBuilder::intercept_only() {
  DesignBuilder b;
  b.kind_ = Kind::intercept;
  return b;
}

DesignBuilder DesignBuilder::linear() {
  DesignBuilder b;
  b.kind_ = Kind::all;
  return b;
}

DesignBuilder DesignBuilder::linear(std::vector<std::size_t> columns) {
  DesignBuilder b;
  b.kind_ = Kind::subset;
  b.columns_ = std::move(columns);
  return b;
}

DesignBuilder DesignBuilder::custom(Features features) {
  DesignBuilder b;
  b.kind_ = Kind::custom;
  b.features_ = std::move(features);
  return b;
}

Eigen::MatrixXd DesignBuilder::build(const Eigen::MatrixXd& covariates) const {
  const Eigen::Index m = covariates.rows();
  switch (kind_) {
    case Kind::intercept:
      return Eigen::MatrixXd::Ones(m, 1);
    case Kind::all: {
      Eigen::MatrixXd x(m, covariates.cols() + 1);
      x.col(0).setOnes();
      x.rightCols(covariates.cols()) = covariates;
      return x;
    }
    case Kind::subset: {
      Eigen::MatrixXd x(m, static_cast<Eigen::Index>(columns_.size()) + 1);
      x.col(0).setOnes();
      for (std::size_t j = 0; j < columns_.size(); ++j) {
        if (static_cast<Eigen::Index>(columns_[j]) >= covariates.cols()) {
          throw Error(ErrorKind::InvalidArgument, "design refers to covariate column " + std::to_string(columns_[j]) +
                                                      " but only " + std::to_string(covariates.cols()) + " exist");
        }
        x.col(static_cast<Eigen::Index>(j) + 1) = covariates.col(static_cast<Eigen::Index>(columns_[j]));
      }
      return x;
    }
    case Kind::custom: {
      if (m == 0) return Eigen::MatrixXd(0, 1);
      const Eigen::RowVectorXd first = features_(covariates.row(0));
      Eigen::MatrixXd x(m, first.size() + 1);
      x.col(0).setOnes();
      x.row(0).tail(first.size()) = first;
      for (Eigen::Index i = 1; i < m; ++i) {
        const Eigen::RowVectorXd f = features_(covariates.row(i));
        if (f.size() != first.size()) throw Error(ErrorKind::InvalidArgument, "custom features vary in width");
        x.row(i).tail(f.size()) = f;
      }
      return x;
    }
  }
  return Eigen::MatrixXd::Ones(m, 1);
}

// ---------------------------------------------------------------------------

std::size_t TwoByTwoFrame::n_treated() const {
  return static_cast<std::size_t>((treated.array() == 1.0).count());
}

std::size_t TwoByTwoFrame::n_comparison() const { return rows() - n_treated(); }

void TwoByTwoFrame::validate() const {
  const auto m = static_cast<Eigen::Index>(units.size());
  if (treated.size() != m || delta_y.size() != m || weights.size() != m || covariates.rows() != m) {
    throw Error(ErrorKind::InvalidArgument, "frame columns differ in length");
  }
  if (pre_index == post_index) throw Error(ErrorKind::InvalidArgument, "frame pre and post periods coincide");
  std::vector<std::size_t> sorted = units;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorKind::InvalidArgument, "a unit appears in both arms of the frame");
  }
  if (!sorted.empty() && sorted.back() >= n_total) {
    throw Error(ErrorKind::InvalidArgument, "frame unit index exceeds n_total");
  }
  double w1 = 0.0, w0 = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) (treated(i) == 1.0 ? w1 : w0) += weights(i);
  if (n_treated() == 0 || !(w1 > 0.0)) throw Error(ErrorKind::EmptyArm, "treated arm is empty or has zero weight");
  if (n_comparison() == 0 || !(w0 > 0.0)) {
    throw Error(ErrorKind::EmptyArm, "comparison arm is empty or has zero weight");
  }
}

TwoByTwoFrame TwoByTwoFrame::subset(std::span<const std::size_t> rows_to_keep) const {
  TwoByTwoFrame f;
  const auto m = static_cast<Eigen::Index>(rows_to_keep.size());
  f.units.reserve(rows_to_keep.size());
  f.treated.resize(m);
  f.delta_y.resize(m);
  f.weights.resize(m);
  f.covariates.resize(m, covariates.cols());
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto src = static_cast<Eigen::Index>(rows_to_keep[static_cast<std::size_t>(r)]);
    f.units.push_back(units[static_cast<std::size_t>(src)]);
    f.treated(r) = treated(src);
    f.delta_y(r) = delta_y(src);
    f.weights(r) = weights(src);
    f.covariates.row(r) = covariates.row(src);
  }
  f.pre_index = pre_index;
  f.post_index = post_index;
  f.n_total = n_total;
  return f;
}

TwoByTwoFrame TwoByTwoFrame::from_panel(const PanelDataset& data, std::span<const std::size_t> treated_units,
                                        std::span<const std::size_t> comparison_units, std::size_t pre,
                                        std::size_t post, CovariateTiming timing) {
  if (pre >= data.n_periods() || post >= data.n_periods()) {
    throw Error(ErrorKind::InvalidArgument, "frame period index out of range");
  }
  TwoByTwoFrame f;
  const auto m = static_cast<Eigen::Index>(treated_units.size() + comparison_units.size());
  const auto K = static_cast<Eigen::Index>(data.n_covariates());
  const Eigen::Index width = timing == CovariateTiming::pre_and_post ? 2 * K : K;
  f.treated.resize(m);
  f.delta_y.resize(m);
  f.weights.resize(m);
  f.covariates.resize(m, width);
  f.pre_index = pre;
  f.post_index = post;
  f.n_total = data.n_units();
  Eigen::Index r = 0;
  auto push = [&](std::size_t i, double d) {
    const auto& u = data.unit(i);
    f.units.push_back(i);
    f.treated(r) = d;
    f.delta_y(r) = u.outcomes(static_cast<Eigen::Index>(post)) - u.outcomes(static_cast<Eigen::Index>(pre));
    f.weights(r) = u.weight;
    f.covariates.row(r).head(K) = u.covariates.row(static_cast<Eigen::Index>(pre));
    if (timing == CovariateTiming::pre_and_post) {
      f.covariates.row(r).tail(K) = u.covariates.row(static_cast<Eigen::Index>(post));
    }
    ++r;
  };
  for (auto i : treated_units) push(i, 1.0);
  for (auto i : comparison_units) push(i, 0.0);
  return f;
}

double influence_se(const Eigen::VectorXd& influence) {
  if (influence.size() == 0) return 0.0;
  return std::sqrt(influence.squaredNorm()) / static_cast<double>(influence.size());
}

// ---------------------------------------------------------------------------
// Shared two-step machinery. With m frame rows and frame means E_m[.],
//   T = E_m[w1 e] / E_m[w1],  C = E_m[w0 e] / E_m[w0],  e = dy - mu(x),
// where w1 = omega D and w0 = omega (1-D) odds(x). Each nuisance contributes its
// asymptotically linear representation to the influence of T and C.

namespace {

struct OutcomeStep {
  OutcomeModelFit fit;
  Eigen::MatrixXd design;   // m x p
  Eigen::VectorXd fitted;   // m
  Eigen::MatrixXd lin_rep;  // m x p, influence of the coefficients
};

struct PropensityStep {
  PropensityFit fit;
  Eigen::MatrixXd design;   // m x q
  Eigen::VectorXd odds;     // m
  Eigen::MatrixXd lin_rep;  // m x q
};

OutcomeStep fit_outcome_step(const TwoByTwoFrame& f, const DesignBuilder& design) {
  OutcomeStep s;
  s.design = design.build(f.covariates);
  const Eigen::VectorXd w0 = f.weights.cwiseProduct((1.0 - f.treated.array()).matrix());
  s.fit = fit_wls(s.design, f.delta_y, w0);
  s.fitted = s.design * s.fit.coefficients;
  const auto m = static_cast<double>(f.rows());
  const Eigen::MatrixXd gram = s.design.transpose() * w0.asDiagonal() * s.design / m;
  const Eigen::MatrixXd gram_inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(gram.rows(), gram.cols()));
  const Eigen::VectorXd score_w = w0.cwiseProduct(f.delta_y - s.fitted);
  s.lin_rep = (score_w.asDiagonal() * s.design) * gram_inv;
  return s;
}

PropensityStep fit_propensity_step(const TwoByTwoFrame& f, const DesignBuilder& design, const LogitOptions& opts) {
  PropensityStep s;
  s.design = design.build(f.covariates);
  s.fit = fit_logit(s.design, f.treated, f.weights, opts);
  if (s.fit.separation) {
    throw Error(ErrorKind::Separation, "propensity model separates treated and comparison units (|b| = " +
                                           std::to_string(s.fit.coefficients.norm()) + ")");
  }
  const auto m = static_cast<double>(f.rows());
  const auto& p = s.fit.fitted_scores;
  s.odds.resize(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (f.treated(i) == 0.0 && p(i) >= 1.0 - 1e-12) {
      throw Error(ErrorKind::DegenerateWeights, "comparison unit " + std::to_string(f.units[static_cast<std::size_t>(i)]) +
                                                    " has a fitted propensity score of 1");
    }
    s.odds(i) = p(i) / (1.0 - p(i));
  }
  const Eigen::VectorXd hw = f.weights.array() * p.array() * (1.0 - p.array());
  const Eigen::MatrixXd info = s.design.transpose() * hw.asDiagonal() * s.design / m;
  const Eigen::MatrixXd info_inv = info.ldlt().solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  const Eigen::VectorXd score_w = f.weights.cwiseProduct(f.treated - p);
  s.lin_rep = (score_w.asDiagonal() * s.design) * info_inv;
  return s;
}

EffectEstimate combine(const TwoByTwoFrame& f, EstimatorKind tag, const OutcomeStep* outcome,
                       const PropensityStep* propensity, bool include_comparison) {
  const auto m = static_cast<double>(f.rows());
  const Eigen::ArrayXd d = f.treated.array();
  const Eigen::ArrayXd omega = f.weights.array();
  const Eigen::ArrayXd odds = propensity ? Eigen::ArrayXd(propensity->odds.array()) : Eigen::ArrayXd::Ones(f.treated.size());
  const Eigen::ArrayXd w1 = omega * d;
  const Eigen::ArrayXd w0 = omega * (1.0 - d) * odds;
  const Eigen::ArrayXd e = outcome ? Eigen::ArrayXd((f.delta_y - outcome->fitted).array()) : Eigen::ArrayXd(f.delta_y.array());

  const double mean_w1 = w1.sum() / m;
  const double mean_w0 = w0.sum() / m;
  const double treat_part = (w1 * e).sum() / w1.sum();
  const double comp_part = (w0 * e).sum() / w0.sum();

  Eigen::VectorXd inf_treat = (w1 * (e - treat_part)).matrix();
  if (outcome) {
    const Eigen::VectorXd m1 = outcome->design.transpose() * w1.matrix() / m;
    inf_treat -= outcome->lin_rep * m1;
  }
  inf_treat /= mean_w1;

  double estimate = treat_part;
  Eigen::VectorXd inf = inf_treat;
  if (include_comparison) {
    Eigen::VectorXd inf_comp = (w0 * (e - comp_part)).matrix();
    if (propensity) {
      const Eigen::VectorXd m2 = propensity->design.transpose() * (w0 * (e - comp_part)).matrix() / m;
      inf_comp += propensity->lin_rep * m2;
    }
    if (outcome) {
      const Eigen::VectorXd m3 = outcome->design.transpose() * w0.matrix() / m;
      inf_comp -= outcome->lin_rep * m3;
    }
    inf_comp /= mean_w0;
    estimate -= comp_part;
    inf -= inf_comp;
  }

  EffectEstimate out;
  out.estimate = estimate;
  out.estimator = tag;
  out.n_treated = f.n_treated();
  out.n_comparison = f.n_comparison();
  out.influence = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.n_total));
  const double scale = static_cast<double>(f.n_total) / m;
  for (std::size_t r = 0; r < f.units.size(); ++r) {
    out.influence(static_cast<Eigen::Index>(f.units[r])) = scale * inf(static_cast<Eigen::Index>(r));
  }
  out.se = influence_se(out.influence);
  if (outcome) out.outcome_model = outcome->fit;
  if (propensity) out.propensity = propensity->fit;
  return out;
}

}  // namespace

EffectEstimate att_means(const TwoByTwoFrame& frame) {
  frame.validate();
  return combine(frame, EstimatorKind::means, nullptr, nullptr, true);
}

EffectEstimate att_ra(const TwoByTwoFrame& frame, const DesignBuilder& outcome_design) {
  frame.validate();
  const auto outcome = fit_outcome_step(frame, outcome_design);
  return combine(frame, EstimatorKind::ra, &outcome, nullptr, false);
}

EffectEstimate att_ipw(const TwoByTwoFrame& frame, const DesignBuilder& propensity_design, const LogitOptions& logit) {
  frame.validate();
  const auto propensity = fit_propensity_step(frame, propensity_design, logit);
  return combine(frame, EstimatorKind::ipw, nullptr, &propensity, true);
}

EffectEstimate att_dr(const TwoByTwoFrame& frame, const std::optional<DesignBuilder>& outcome_design,
                      const std::optional<DesignBuilder>& propensity_design, const LogitOptions& logit) {
  frame.validate();
  std::optional<OutcomeStep> outcome;
  std::optional<PropensityStep> propensity;
  if (outcome_design) outcome = fit_outcome_step(frame, *outcome_design);
  if (propensity_design) propensity = fit_propensity_step(frame, *propensity_design, logit);
  return combine(frame, EstimatorKind::dr, outcome ? &*outcome : nullptr, propensity ? &*propensity : nullptr, true);
}

EffectEstimate estimate_att(const TwoByTwoFrame& frame, EstimatorKind kind, const NuisanceDesigns& designs) {
  switch (kind) {
    case EstimatorKind::means: return att_means(frame);
    case EstimatorKind::ra: return att_ra(frame, designs.outcome);
    case EstimatorKind::ipw: return att_ipw(frame, designs.propensity, designs.logit);
    case EstimatorKind::dr: return att_dr(frame, designs.outcome, designs.propensity, designs.logit);
  }
  return att_means(frame);
}

std::vector<PartitionEffect> att_by_partition(const TwoByTwoFrame& frame, std::span<const int> partition,
                                              EstimatorKind kind, const NuisanceDesigns& designs) {
  frame.validate();
  if (partition.size() != frame.n_total) {
    throw Error(ErrorKind::InvalidArgument, "partition must assign a cell to every panel unit");
  }
  std::map<int, std::vector<std::size_t>> cells;
  double treated_weight = 0.0;
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    cells[partition[frame.units[r]]].push_back(r);
    if (frame.treated(static_cast<Eigen::Index>(r)) == 1.0) treated_weight += frame.weights(static_cast<Eigen::Index>(r));
  }
  std::vector<PartitionEffect> out;
  for (const auto& [cell, rows] : cells) {
    const TwoByTwoFrame sub = frame.subset(rows);
    if (sub.n_treated() == 0 || sub.n_comparison() == 0) {
      throw Error(ErrorKind::EmptyCell, "partition cell " + std::to_string(cell) + " lacks " +
                                            (sub.n_treated() == 0 ? "treated" : "comparison") + " units");
    }
    double share = 0.0;
    for (Eigen::Index r = 0; r < sub.treated.size(); ++r) {
      if (sub.treated(r) == 1.0) share += sub.weights(r);
    }
    out.push_back({cell, estimate_att(sub, kind, designs), share / treated_weight});
  }
  return out;
}

}  // namespace didkit
