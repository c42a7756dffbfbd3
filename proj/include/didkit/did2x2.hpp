#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "didkit/nuisance.hpp"
#include "didkit/panel.hpp"

namespace didkit {

enum class EstimatorKind { means, ra, ipw, dr };

std::string_view to_string(EstimatorKind kind);
std::optional<EstimatorKind> parse_estimator(std::string_view name);

/// Which covariate values enter the working models of a frame.
enum class CovariateTiming {
  baseline,      // values at the frame's pre period
  pre_and_post,  // pre and post values side by side (opt-in; post values can be bad controls)
};

/// Maps raw covariate rows to a working-model design. An intercept column is
/// always prepended.
class DesignBuilder {
 public:
  using Features = std::function<Eigen::RowVectorXd(const Eigen::RowVectorXd&)>;

  static DesignBuilder intercept_only();
  /// Intercept plus every covariate column.
  static DesignBuilder linear();
  /// Intercept plus the listed covariate columns.
  static DesignBuilder linear(std::vector<std::size_t> columns);
  /// Intercept plus caller-defined features.
  static DesignBuilder custom(Features features);

  Eigen::MatrixXd build(const Eigen::MatrixXd& covariates) const;

 private:
  enum class Kind { intercept, all, subset, custom };
  Kind kind_ = Kind::all;
  std::vector<std::size_t> columns_;
  Features features_;
};

/// One treated arm, one comparison arm, one (pre, post) pair.
struct TwoByTwoFrame {
  std::vector<std::size_t> units;  // panel unit indices, one per row
  Eigen::VectorXd treated;         // 1 treated, 0 comparison
  Eigen::VectorXd delta_y;         // outcome change per row
  Eigen::MatrixXd covariates;      // rows x K
  Eigen::VectorXd weights;
  std::size_t pre_index = 0;
  std::size_t post_index = 1;
  std::size_t n_total = 0;  // length of the influence vectors produced

  std::size_t rows() const { return units.size(); }
  std::size_t n_treated() const;
  std::size_t n_comparison() const;

  /// Checks the frame invariants (disjoint nonempty arms, consistent sizes).
  void validate() const;

  /// Subset of rows, keeping n_total.
  TwoByTwoFrame subset(std::span<const std::size_t> rows) const;

  static TwoByTwoFrame from_panel(const PanelDataset& data, std::span<const std::size_t> treated_units,
                                  std::span<const std::size_t> comparison_units, std::size_t pre, std::size_t post,
                                  CovariateTiming timing = CovariateTiming::baseline);
};

struct EffectEstimate {
  double estimate = 0.0;
  double se = 0.0;
  /// Per-unit influence over all n_total units, zero outside the frame, scaled
  /// so that se = sqrt(sum(influence^2)) / n_total.
  Eigen::VectorXd influence;
  std::size_t n_treated = 0;
  std::size_t n_comparison = 0;
  EstimatorKind estimator = EstimatorKind::means;
  std::optional<OutcomeModelFit> outcome_model;
  std::optional<PropensityFit> propensity;
};

double influence_se(const Eigen::VectorXd& influence);

struct NuisanceDesigns {
  DesignBuilder outcome = DesignBuilder::linear();
  DesignBuilder propensity = DesignBuilder::linear();
  LogitOptions logit{};
};

EffectEstimate att_means(const TwoByTwoFrame& frame);
EffectEstimate att_ra(const TwoByTwoFrame& frame, const DesignBuilder& outcome_design);
EffectEstimate att_ipw(const TwoByTwoFrame& frame, const DesignBuilder& propensity_design,
                       const LogitOptions& logit = {});
/// Doubly robust combination. An absent outcome design means a zero outcome
/// model; an absent propensity design means constant scores.
EffectEstimate att_dr(const TwoByTwoFrame& frame, const std::optional<DesignBuilder>& outcome_design,
                      const std::optional<DesignBuilder>& propensity_design, const LogitOptions& logit = {});

EffectEstimate estimate_att(const TwoByTwoFrame& frame, EstimatorKind kind, const NuisanceDesigns& designs = {});

struct PartitionEffect {
  int cell = 0;
  EffectEstimate effect;
  double treated_share = 0.0;  // weighted share of treated units in the cell
};

/// Runs the estimator within each partition cell. `partition` is indexed by
/// panel unit (length n_total).
std::vector<PartitionEffect> att_by_partition(const TwoByTwoFrame& frame, std::span<const int> partition,
                                              EstimatorKind kind, const NuisanceDesigns& designs = {});

}  // namespace didkit
