#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "didkit/did2x2.hpp"
#include "didkit/staggered.hpp"

namespace didkit {

struct CohortWeight {
  int g = 0;
  double weight = 0.0;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct EventStudyPoint {
  int e = 0;
  double estimate = 0.0;
  double se = 0.0;
  Eigen::VectorXd influence;  // over all units
  Interval pointwise;
  std::optional<Interval> simultaneous;
  std::vector<CohortWeight> weights;  // sums to one
};

/// Bootstrap settings and critical values behind the simultaneous band.
struct BandInfo {
  double critical_value = 0.0;
  double pointwise_critical_value = 0.0;
  int draws = 0;
  std::uint64_t seed = 0;
  std::string multiplier = "rademacher";
  std::vector<int> degenerate_event_times;
};

struct EventStudyCurve {
  std::vector<EventStudyPoint> points;  // ascending e
  std::optional<EffectEstimate> overall;
  std::optional<std::pair<int, int>> window;
  bool balanced = false;
  double level = 0.95;
  std::vector<int> cluster_codes;
  std::optional<BandInfo> band;

  const EventStudyPoint* at(int e) const;
  std::size_t n_units() const;
};

/// Standard error of a linear combination of influence vectors, cluster-summed.
double aggregate_se(const Eigen::VectorXd& influence, const std::vector<int>& cluster_codes);

/// Cohort-size weighted event-time averages of the post and pre cells.
EventStudyCurve event_study(const GroupTimeTable& table, double level = 0.95);

/// Same, restricted to cohorts observed at every event time of [lo, hi].
EventStudyCurve event_study_balanced(const GroupTimeTable& table, int lo, int hi, double level = 0.95);

/// Simple average of the curve over e >= 0.
EffectEstimate overall_att(const EventStudyCurve& curve);

}  // namespace didkit
