#include "didkit/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "didkit/error.hpp"

namespace didkit {

std::string to_string(const Cohort& c) {
  return c.is_never() ? std::string("never") : std::to_string(c.period());
}

PanelDataset::PanelDataset(std::vector<int> periods, std::vector<std::string> covariate_names,
                           WeightKind weight_kind, std::vector<UnitSeries> units)
    : periods_(std::move(periods)),
      covariate_names_(std::move(covariate_names)),
      weight_kind_(weight_kind),
      units_(std::move(units)) {
  if (periods_.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "a panel needs at least 2 distinct periods");
  }
  for (std::size_t t = 1; t < periods_.size(); ++t) {
    if (periods_[t] <= periods_[t - 1]) {
      throw Error(ErrorKind::InvalidArgument, "period labels must be strictly increasing");
    }
  }
  if (units_.empty()) throw Error(ErrorKind::InvalidArgument, "panel has no units");

  const auto T = static_cast<Eigen::Index>(periods_.size());
  const auto K = static_cast<Eigen::Index>(covariate_names_.size());
  std::unordered_set<std::string> seen;
  std::map<std::string, double> group_weight;
  group_index_.reserve(units_.size());
  for (const auto& u : units_) {
    if (!seen.insert(u.unit_id).second) {
      throw Error(ErrorKind::DuplicateObservation, "unit '" + u.unit_id + "' appears twice");
    }
    if (u.outcomes.size() != T) {
      throw Error(ErrorKind::UnbalancedPanel, "unit '" + u.unit_id + "' does not have one outcome per period");
    }
    if (u.covariates.rows() != T || u.covariates.cols() != K) {
      throw Error(ErrorKind::InvalidArgument, "unit '" + u.unit_id + "' has a covariate block of the wrong shape");
    }
    if (!u.outcomes.allFinite() || !u.covariates.allFinite()) {
      throw Error(ErrorKind::NonNumericCell, "unit '" + u.unit_id + "' has non-finite values");
    }
    if (!std::isfinite(u.weight) || u.weight < 0.0) {
      throw Error(ErrorKind::InvalidArgument, "unit '" + u.unit_id + "' has a negative or non-finite weight");
    }
    if (u.group.is_never()) {
      group_index_.emplace_back(std::nullopt);
    } else {
      auto idx = period_index(u.group.period());
      if (!idx) {
        throw Error(ErrorKind::InvalidGroup, "unit '" + u.unit_id + "' has first-treatment period " +
                                                 std::to_string(u.group.period()) + " outside the period set");
      }
      group_index_.emplace_back(idx);
    }
    group_weight[to_string(u.group)] += u.weight;
  }
  for (const auto& [label, w] : group_weight) {
    if (!(w > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "treatment group " + label + " has zero total weight");
    }
  }

  std::unordered_map<std::string, int> codes;
  cluster_codes_.reserve(units_.size());
  for (const auto& u : units_) {
    const std::string key = u.cluster.empty() ? "\x01unit:" + u.unit_id : u.cluster;
    auto [it, inserted] = codes.emplace(key, static_cast<int>(codes.size()));
    cluster_codes_.push_back(it->second);
  }
  n_clusters_ = codes.size();
}

std::optional<std::size_t> PanelDataset::period_index(int label) const {
  auto it = std::lower_bound(periods_.begin(), periods_.end(), label);
  if (it == periods_.end() || *it != label) return std::nullopt;
  return static_cast<std::size_t>(it - periods_.begin());
}

std::vector<std::size_t> PanelDataset::cohort_indices() const {
  std::set<std::size_t> s;
  for (const auto& g : group_index_) {
    if (g) s.insert(*g);
  }
  return {s.begin(), s.end()};
}

bool PanelDataset::has_never_treated() const {
  return std::any_of(units_.begin(), units_.end(), [](const UnitSeries& u) { return u.group.is_never(); });
}

Eigen::MatrixXd PanelDataset::covariates_at(std::size_t t) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(units_.size()), static_cast<Eigen::Index>(n_covariates()));
  for (std::size_t i = 0; i < units_.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = units_[i].covariates.row(static_cast<Eigen::Index>(t));
  }
  return x;
}

Eigen::VectorXd PanelDataset::weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(units_.size()));
  for (std::size_t i = 0; i < units_.size(); ++i) w(static_cast<Eigen::Index>(i)) = units_[i].weight;
  return w;
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  for (auto& f : out) {
    auto b = f.find_first_not_of(" \t");
    auto e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

std::string cell_ref(std::size_t row, const std::string& col) {
  return "row " + std::to_string(row) + ", column '" + col + "'";
}

double parse_double(const std::string& s, std::size_t row, const std::string& col) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw Error(ErrorKind::NonNumericCell, cell_ref(row, col) + " holds '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, std::size_t row, const std::string& col) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    // accept integral floats such as "2014.0"
    double d = parse_double(s, row, col);
    if (d != std::floor(d) || std::fabs(d) > 2e9) {
      throw Error(ErrorKind::NonNumericCell, cell_ref(row, col) + " is not an integer: '" + s + "'");
    }
    return static_cast<int>(d);
  }
  return v;
}

struct RawUnit {
  std::string id;
  std::optional<int> group;  // nullopt == never
  double weight = 1.0;
  std::string cluster;
  std::map<int, std::pair<double, std::vector<double>>> rows;  // period -> (outcome, covariates)
};

}  // namespace

PanelDataset load_panel(std::istream& source, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(source, line)) throw Error(ErrorKind::MissingColumn, "empty input, no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // BOM
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);

  auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  auto require_col = [&](const std::string& name) {
    auto c = find_col(name);
    if (!c) throw Error(ErrorKind::MissingColumn, "column '" + name + "' not found in header");
    return *c;
  };

  const std::size_t c_unit = require_col(schema.unit);
  const std::size_t c_period = require_col(schema.period);
  const std::size_t c_outcome = require_col(schema.outcome);
  const std::size_t c_group = require_col(schema.first_treat);
  std::optional<std::size_t> c_weight;
  if (schema.weight) {
    c_weight = require_col(*schema.weight);
  } else {
    c_weight = find_col("weight");
  }
  std::optional<std::size_t> c_cluster;
  if (schema.cluster) c_cluster = require_col(*schema.cluster);

  std::vector<std::size_t> c_covs;
  std::vector<std::string> cov_names;
  if (schema.covariates) {
    for (const auto& name : *schema.covariates) {
      c_covs.push_back(require_col(name));
      cov_names.push_back(name);
    }
  } else {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == c_unit || c == c_period || c == c_outcome || c == c_group) continue;
      if (c_weight && c == *c_weight) continue;
      if (c_cluster && c == *c_cluster) continue;
      c_covs.push_back(c);
      cov_names.push_back(header[c]);
    }
  }

  std::vector<RawUnit> raw;
  std::unordered_map<std::string, std::size_t> by_id;
  std::set<int> period_set;
  std::size_t row = 1;
  while (std::getline(source, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::NonNumericCell, "row " + std::to_string(row) + " has " + std::to_string(f.size()) +
                                                 " fields, header has " + std::to_string(header.size()));
    }
    const std::string& id = f[c_unit];
    const int period = parse_int(f[c_period], row, header[c_period]);
    const double y = parse_double(f[c_outcome], row, header[c_outcome]);
    std::optional<int> group;
    if (!f[c_group].empty() && f[c_group] != schema.never_value) group = parse_int(f[c_group], row, header[c_group]);
    const double w = c_weight ? parse_double(f[*c_weight], row, header[*c_weight]) : 1.0;
    std::vector<double> x;
    x.reserve(c_covs.size());
    for (auto c : c_covs) x.push_back(parse_double(f[c], row, header[c]));

    auto [it, inserted] = by_id.emplace(id, raw.size());
    if (inserted) {
      RawUnit u;
      u.id = id;
      u.group = group;
      u.weight = w;
      if (c_cluster) u.cluster = f[*c_cluster];
      raw.push_back(std::move(u));
    }
    RawUnit& u = raw[it->second];
    if (u.group != group) {
      throw Error(ErrorKind::InvalidGroup, "unit '" + id + "' has more than one first-treatment value");
    }
    if (u.weight != w) {
      throw Error(ErrorKind::InvalidArgument, "unit '" + id + "' has time-varying weights; weights must be per-unit constants");
    }
    if (c_cluster && u.cluster != f[*c_cluster]) {
      throw Error(ErrorKind::InvalidArgument, "unit '" + id + "' changes cluster over time");
    }
    if (!u.rows.emplace(period, std::make_pair(y, std::move(x))).second) {
      throw Error(ErrorKind::DuplicateObservation,
                  "unit '" + id + "' has two observations for period " + std::to_string(period));
    }
    period_set.insert(period);
  }
  if (raw.empty()) throw Error(ErrorKind::InvalidArgument, "input has a header but no data rows");

  std::vector<int> periods(period_set.begin(), period_set.end());
  const int last_period = periods.back();
  const auto T = static_cast<Eigen::Index>(periods.size());
  const auto K = static_cast<Eigen::Index>(c_covs.size());

  std::vector<UnitSeries> units;
  units.reserve(raw.size());
  for (auto& r : raw) {
    if (r.rows.size() != periods.size()) {
      std::string missing;
      for (int p : periods) {
        if (!r.rows.count(p)) missing += (missing.empty() ? "" : ",") + std::to_string(p);
      }
      throw Error(ErrorKind::UnbalancedPanel, "unit '" + r.id + "' is missing periods {" + missing + "}");
    }
    UnitSeries u;
    u.unit_id = r.id;
    u.weight = r.weight;
    u.cluster = r.cluster;
    if (!r.group || *r.group > last_period) {
      u.group = Cohort::never();
    } else if (!std::binary_search(periods.begin(), periods.end(), *r.group)) {
      throw Error(ErrorKind::InvalidGroup,
                  "unit '" + r.id + "' first treated in " + std::to_string(*r.group) + ", which is not an observed period");
    } else {
      u.group = Cohort::at(*r.group);
    }
    u.outcomes.resize(T);
    u.covariates.resize(T, K);
    Eigen::Index t = 0;
    for (auto& [p, obs] : r.rows) {
      u.outcomes(t) = obs.first;
      for (Eigen::Index k = 0; k < K; ++k) u.covariates(t, k) = obs.second[static_cast<std::size_t>(k)];
      ++t;
    }
    units.push_back(std::move(u));
  }
  const WeightKind kind = c_weight ? WeightKind::supplied : WeightKind::uniform;
  return PanelDataset(std::move(periods), std::move(cov_names), kind, std::move(units));
}

PanelDataset load_panel_file(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return load_panel(in, schema);
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

void write_panel(std::ostream& out, const PanelDataset& data, std::string_view never_value) {
  const bool weighted = data.weight_kind() == WeightKind::supplied;
  const bool clustered = std::any_of(data.units().begin(), data.units().end(),
                                     [](const UnitSeries& u) { return !u.cluster.empty(); });
  out << "unit,period,outcome,first_treat";
  if (weighted) out << ",weight";
  if (clustered) out << ",cluster";
  for (const auto& name : data.covariate_names()) out << ',' << csv_field(name);
  out << '\n';
  for (const auto& u : data.units()) {
    const std::string g = u.group.is_never() ? std::string(never_value) : std::to_string(u.group.period());
    for (std::size_t t = 0; t < data.n_periods(); ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      out << csv_field(u.unit_id) << ',' << data.periods()[t] << ',' << fmt17(u.outcomes(ti)) << ',' << g;
      if (weighted) out << ',' << fmt17(u.weight);
      if (clustered) out << ',' << csv_field(u.cluster);
      for (Eigen::Index k = 0; k < u.covariates.cols(); ++k) out << ',' << fmt17(u.covariates(ti, k));
      out << '\n';
    }
  }
}

void write_panel_file(const std::string& path, const PanelDataset& data, std::string_view never_value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  write_panel(out, data, never_value);
}

// ---------------------------------------------------------------------------
// Group normalization

NormalizedPanel normalize_groups(const PanelDataset& data) {
  BalanceReport report;
  report.original_units = data.n_units();
  const int first_period = data.periods().front();

  std::vector<UnitSeries> kept;
  kept.reserve(data.n_units());
  for (const auto& u : data.units()) {
    if (!u.group.is_never() && u.group.period() == first_period) {
      report.dropped_units.push_back({u.unit_id, "treated in the first period " + std::to_string(first_period)});
    } else {
      kept.push_back(u);
    }
  }

  std::vector<int> periods = data.periods();
  const bool has_never =
      std::any_of(kept.begin(), kept.end(), [](const UnitSeries& u) { return u.group.is_never(); });
  if (!has_never && !kept.empty()) {
    int last_cohort = first_period;
    for (const auto& u : kept) last_cohort = std::max(last_cohort, u.group.period());
    std::vector<int> new_periods;
    for (int p : periods) {
      if (p < last_cohort) {
        new_periods.push_back(p);
      } else {
        report.dropped_periods.push_back(p);
      }
    }
    const auto keep_t = static_cast<Eigen::Index>(new_periods.size());
    for (auto& u : kept) {
      if (u.group.period() == last_cohort) u.group = Cohort::never();
      u.outcomes = u.outcomes.head(keep_t).eval();
      u.covariates = u.covariates.topRows(keep_t).eval();
    }
    report.recoded_groups[std::to_string(last_cohort)] = "never";
    periods = std::move(new_periods);
  }

  const bool never_now =
      std::any_of(kept.begin(), kept.end(), [](const UnitSeries& u) { return u.group.is_never(); });
  const bool treated_now =
      std::any_of(kept.begin(), kept.end(), [](const UnitSeries& u) { return !u.group.is_never(); });
  if (periods.size() < 2 || !never_now || !treated_now) {
    throw Error(ErrorKind::NoComparisonPossible,
                "after normalization the panel has " + std::to_string(periods.size()) +
                    " period(s), never-treated units: " + (never_now ? "yes" : "no") +
                    ", treated units: " + (treated_now ? "yes" : "no"));
  }

  for (const auto& u : kept) ++report.units_per_group[to_string(u.group)];
  report.n_periods = periods.size();
  PanelDataset out(std::move(periods), data.covariate_names(), data.weight_kind(), std::move(kept));
  return {std::move(out), std::move(report)};
}

}  // namespace didkit
