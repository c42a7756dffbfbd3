#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace didkit {

/// First-treatment period of a unit. Never-treated units carry no period.
class Cohort {
 public:
  static Cohort never() { return Cohort{}; }
  static Cohort at(int period) { return Cohort{period}; }

  bool is_never() const { return !period_.has_value(); }
  /// Period label; must not be called on a never-treated cohort.
  int period() const { return *period_; }

  friend bool operator==(const Cohort&, const Cohort&) = default;

 private:
  Cohort() = default;
  explicit Cohort(int p) : period_(p) {}
  std::optional<int> period_;
};

std::string to_string(const Cohort& c);

struct UnitSeries {
  std::string unit_id;
  Cohort group = Cohort::never();
  double weight = 1.0;
  Eigen::VectorXd outcomes;    // one entry per period
  Eigen::MatrixXd covariates;  // periods x K
  std::string cluster;         // empty: the unit is its own cluster
};

enum class WeightKind { uniform, supplied };

/// Balanced long panel. Immutable once constructed; the constructor enforces
/// the shape invariants so every instance in circulation is valid.
class PanelDataset {
 public:
  PanelDataset(std::vector<int> periods, std::vector<std::string> covariate_names,
               WeightKind weight_kind, std::vector<UnitSeries> units);

  std::size_t n_units() const { return units_.size(); }
  std::size_t n_periods() const { return periods_.size(); }
  std::size_t n_covariates() const { return covariate_names_.size(); }

  const std::vector<int>& periods() const { return periods_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  WeightKind weight_kind() const { return weight_kind_; }
  const std::vector<UnitSeries>& units() const { return units_; }
  const UnitSeries& unit(std::size_t i) const { return units_[i]; }

  std::optional<std::size_t> period_index(int label) const;

  double outcome(std::size_t i, std::size_t t) const { return units_[i].outcomes(static_cast<Eigen::Index>(t)); }
  double weight(std::size_t i) const { return units_[i].weight; }
  const Cohort& group(std::size_t i) const { return units_[i].group; }

  /// Period index of the unit's first treatment; empty for never-treated.
  std::optional<std::size_t> group_index(std::size_t i) const { return group_index_[i]; }

  /// Sorted period indices of all treated cohorts present.
  std::vector<std::size_t> cohort_indices() const;
  bool has_never_treated() const;

  /// Covariates of every unit at one period, n x K.
  Eigen::MatrixXd covariates_at(std::size_t t) const;
  Eigen::VectorXd weights() const;

  /// Dense cluster codes 0..C-1 in order of first appearance.
  const std::vector<int>& cluster_codes() const { return cluster_codes_; }
  std::size_t n_clusters() const { return n_clusters_; }

 private:
  std::vector<int> periods_;
  std::vector<std::string> covariate_names_;
  WeightKind weight_kind_;
  std::vector<UnitSeries> units_;
  std::vector<std::optional<std::size_t>> group_index_;
  std::vector<int> cluster_codes_;
  std::size_t n_clusters_ = 0;
};

/// Column mapping for the long-format CSV.
struct CsvSchema {
  std::string unit = "unit";
  std::string period = "period";
  std::string outcome = "outcome";
  std::string first_treat = "first_treat";
  /// Weight column. When unset, a column literally named "weight" is used if present.
  std::optional<std::string> weight;
  std::optional<std::string> cluster;
  /// Explicit covariate columns. When unset, every remaining column is a covariate.
  std::optional<std::vector<std::string>> covariates;
  /// Cell value marking never-treated units in the first-treatment column. An
  /// empty cell always means never-treated as well.
  std::string never_value = "0";
};

PanelDataset load_panel(std::istream& source, const CsvSchema& schema = {});
PanelDataset load_panel_file(const std::string& path, const CsvSchema& schema = {});

/// Writes the canonical CSV (outcomes and covariates at 17 significant digits).
void write_panel(std::ostream& out, const PanelDataset& data, std::string_view never_value = "0");
void write_panel_file(const std::string& path, const PanelDataset& data, std::string_view never_value = "0");

struct DroppedUnit {
  std::string unit_id;
  std::string reason;
};

struct BalanceReport {
  std::size_t original_units = 0;
  std::size_t n_periods = 0;
  /// Unit counts keyed by cohort label ("never" or the period label).
  std::map<std::string, std::size_t> units_per_group;
  std::vector<DroppedUnit> dropped_units;
  std::vector<int> dropped_periods;
  /// Original cohort label -> new label.
  std::map<std::string, std::string> recoded_groups;

  bool empty() const { return dropped_units.empty() && dropped_periods.empty() && recoded_groups.empty(); }
};

struct NormalizedPanel {
  PanelDataset data;
  BalanceReport report;
};

/// Drops units treated in the first period and, when no never-treated units
/// exist, truncates the panel before the last-treated cohort's first period
/// and recodes that cohort as never-treated.
NormalizedPanel normalize_groups(const PanelDataset& data);

}  // namespace didkit
