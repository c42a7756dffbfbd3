#include "didkit/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "didkit/error.hpp"
#include "regression.hpp"

namespace didkit {

const EventStudyPoint* EventStudyCurve::at(int e) const {
  for (const auto& p : points) {
    if (p.e == e) return &p;
  }
  return nullptr;
}

std::size_t EventStudyCurve::n_units() const { return points.empty() ? 0 : static_cast<std::size_t>(points.front().influence.size()); }

double aggregate_se(const Eigen::VectorXd& influence, const std::vector<int>& cluster_codes) {
  if (cluster_codes.empty() || cluster_codes.size() != static_cast<std::size_t>(influence.size())) {
    return influence_se(influence);
  }
  std::set<int> distinct(cluster_codes.begin(), cluster_codes.end());
  if (distinct.size() == cluster_codes.size()) return influence_se(influence);
  const Eigen::MatrixXd cov = detail::cluster_covariance(influence, cluster_codes);
  return std::sqrt(std::max(0.0, cov(0, 0)));
}

namespace {

double normal_quantile(double level) {
  boost::math::normal_distribution<> z;
  return boost::math::quantile(z, 0.5 + level / 2.0);
}

void finish_point(EventStudyPoint& p, const std::vector<int>& clusters, double z) {
  p.se = aggregate_se(p.influence, clusters);
  p.pointwise = {p.estimate - z * p.se, p.estimate + z * p.se};
}

// Builds one point from (cell, raw weight) pairs; raw weights are renormalized.
EventStudyPoint combine_cells(int e, const std::vector<std::pair<const GroupTimeEffect*, double>>& parts,
                              std::size_t n_units) {
  double total = 0.0;
  for (const auto& [cell, w] : parts) total += w;
  EventStudyPoint p;
  p.e = e;
  p.influence = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_units));
  for (const auto& [cell, w] : parts) {
    const double share = w / total;
    p.estimate += share * cell->effect.estimate;
    p.influence += share * cell->effect.influence;
    p.weights.push_back({cell->g, share});
  }
  return p;
}

void attach_overall(EventStudyCurve& c) {
  const bool any_post = std::any_of(c.points.begin(), c.points.end(), [](const auto& p) { return p.e >= 0; });
  if (any_post) c.overall = overall_att(c);
}

}  // namespace

EventStudyCurve event_study(const GroupTimeTable& table, double level) {
  if (table.cells.empty()) throw Error(ErrorKind::InvalidArgument, "group-time table has no cells");
  std::map<int, std::vector<std::pair<const GroupTimeEffect*, double>>> by_e;
  for (const auto& cell : table.cells) {
    const auto* size = table.cohort(cell.g);
    by_e[cell.event_time].push_back({&cell, size ? size->weight : 0.0});
  }
  EventStudyCurve curve;
  curve.level = level;
  curve.cluster_codes = table.cluster_codes;
  const double z = normal_quantile(level);
  for (const auto& [e, parts] : by_e) {
    auto p = combine_cells(e, parts, table.n_units);
    finish_point(p, curve.cluster_codes, z);
    curve.points.push_back(std::move(p));
  }
  attach_overall(curve);
  return curve;
}

EventStudyCurve event_study_balanced(const GroupTimeTable& table, int lo, int hi, double level) {
  if (lo > hi) throw Error(ErrorKind::InvalidArgument, "window lower end exceeds upper end");
  std::vector<int> members;
  for (const auto& c : table.cohorts) {
    bool complete = true;
    for (int e = lo; e <= hi && complete; ++e) {
      if (e == -1) continue;  // base period, zero by construction
      complete = std::any_of(table.cells.begin(), table.cells.end(),
                             [&](const GroupTimeEffect& x) { return x.g == c.g && x.event_time == e; });
    }
    if (complete) members.push_back(c.g);
  }
  if (members.empty()) {
    throw Error(ErrorKind::NoBalancedCohort, "no cohort is observed over event times [" + std::to_string(lo) + ", " +
                                                 std::to_string(hi) + "]");
  }
  EventStudyCurve curve;
  curve.level = level;
  curve.balanced = true;
  curve.window = std::make_pair(lo, hi);
  curve.cluster_codes = table.cluster_codes;
  const double z = normal_quantile(level);
  for (int e = lo; e <= hi; ++e) {
    std::vector<std::pair<const GroupTimeEffect*, double>> parts;
    for (const auto& cell : table.cells) {
      if (cell.event_time == e && std::find(members.begin(), members.end(), cell.g) != members.end()) {
        parts.push_back({&cell, table.cohort(cell.g)->weight});
      }
    }
    if (parts.empty()) continue;
    auto p = combine_cells(e, parts, table.n_units);
    finish_point(p, curve.cluster_codes, z);
    curve.points.push_back(std::move(p));
  }
  attach_overall(curve);
  return curve;
}

EffectEstimate overall_att(const EventStudyCurve& curve) {
  EffectEstimate out;
  int count = 0;
  for (const auto& p : curve.points) {
    if (p.e < 0) continue;
    if (count == 0) out.influence = Eigen::VectorXd::Zero(p.influence.size());
    out.estimate += p.estimate;
    out.influence += p.influence;
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::NoPostPeriods, "event-study curve has no event time e >= 0");
  out.estimate /= count;
  out.influence /= count;
  out.se = aggregate_se(out.influence, curve.cluster_codes);
  return out;
}

}  // namespace didkit
