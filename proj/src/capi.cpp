#include "didkit/didkit.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <set>
#include <string>

#include "didkit/aggregate.hpp"
#include "didkit/config.hpp"
#include "didkit/diagnostics.hpp"
#include "didkit/error.hpp"
#include "didkit/inference.hpp"
#include "didkit/panel.hpp"
#include "didkit/report.hpp"
#include "didkit/simulate.hpp"
#include "didkit/staggered.hpp"

struct didkit_panel {
  didkit::PanelDataset data;
};

struct didkit_attgt {
  didkit::GroupTimeTable table;
  didkit::json extra_settings = didkit::json::object();
};

struct didkit_curve {
  didkit::EventStudyCurve curve;
};

namespace {

using didkit::Error;
using didkit::ErrorKind;
using didkit::json;

thread_local std::string g_error;
thread_local std::string g_error_kind;

didkit_status fail(didkit_status s, std::string kind, std::string msg) {
  g_error = std::move(msg);
  g_error_kind = std::move(kind);
  return s;
}

template <class F>
didkit_status guarded(F&& body) {
  g_error.clear();
  g_error_kind.clear();
  try {
    body();
    return DIDKIT_OK;
  } catch (const Error& e) {
    return fail(didkit::is_validation_error(e.kind()) ? DIDKIT_ERR_VALIDATION : DIDKIT_ERR_ESTIMATION,
                std::string(didkit::to_string(e.kind())), e.what());
  } catch (const json::exception& e) {
    return fail(DIDKIT_ERR_VALIDATION, "InvalidArgument", std::string("InvalidArgument: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(DIDKIT_ERR_INTERNAL, "Internal", "out of memory");
  } catch (const std::exception& e) {
    return fail(DIDKIT_ERR_INTERNAL, "Internal", e.what());
  }
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Options object with a closed key set.
class Options {
 public:
  Options(const char* text, std::set<std::string> allowed) {
    if (text && *text) {
      try {
        doc_ = json::parse(text);
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("options are not valid JSON: ") + e.what());
      }
      if (!doc_.is_object()) throw Error(ErrorKind::InvalidArgument, "options must be a JSON object");
      for (auto it = doc_.begin(); it != doc_.end(); ++it) {
        if (!allowed.count(it.key())) {
          std::string list;
          for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
          throw Error(ErrorKind::InvalidArgument, "unknown option '" + it.key() + "' (valid: " + list + ")");
        }
      }
    } else {
      doc_ = json::object();
    }
  }

  bool has(const std::string& k) const { return doc_.contains(k) && !doc_[k].is_null(); }

  template <class T>
  T get(const std::string& k, T fallback) const {
    if (!has(k)) return fallback;
    try {
      return doc_[k].get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::InvalidArgument, "option '" + k + "' has the wrong type");
    }
  }

  const json& raw(const std::string& k) const { return doc_[k]; }

 private:
  json doc_;
};

template <class E, class P>
E parse_enum(const Options& o, const std::string& key, E fallback, P parser, const char* valid) {
  if (!o.has(key)) return fallback;
  const auto name = o.get<std::string>(key, "");
  const auto v = parser(name);
  if (!v) throw Error(ErrorKind::InvalidArgument, "unknown " + key + " '" + name + "' (valid: " + valid + ")");
  return *v;
}

didkit::DesignBuilder design_for(const didkit::PanelDataset& data, const Options& o, const std::string& key) {
  if (!o.has(key)) return didkit::DesignBuilder::linear();
  std::vector<std::size_t> cols;
  for (const auto& name : o.get<std::vector<std::string>>(key, {})) {
    const auto& names = data.covariate_names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(ErrorKind::MissingColumn, "covariate '" + name + "' is not in the panel");
    cols.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return didkit::DesignBuilder::linear(std::move(cols));
}

}  // namespace

extern "C" {

const char* didkit_version(void) { return "1.0.0"; }
const char* didkit_last_error(void) { return g_error.c_str(); }
const char* didkit_last_error_kind(void) { return g_error_kind.c_str(); }
void didkit_string_free(char* s) { std::free(s); }

didkit_status didkit_json_canonicalize(const char* doc, char** out) {
  return guarded([&] {
    require(doc, "document");
    require(out, "output");
    json j;
    try {
      j = json::parse(doc);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::InvalidArgument, std::string("not valid JSON: ") + e.what());
    }
    *out = dup_string(didkit::canonical_json(j));
  });
}

didkit_status didkit_panel_load(const char* path, const char* schema_json, didkit_panel** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "output");
    Options o(schema_json, {"unit", "period", "outcome", "first_treat", "weight", "cluster", "covariates", "never_value"});
    didkit::CsvSchema schema;
    schema.unit = o.get<std::string>("unit", schema.unit);
    schema.period = o.get<std::string>("period", schema.period);
    schema.outcome = o.get<std::string>("outcome", schema.outcome);
    schema.first_treat = o.get<std::string>("first_treat", schema.first_treat);
    schema.never_value = o.get<std::string>("never_value", schema.never_value);
    if (o.has("weight")) schema.weight = o.get<std::string>("weight", "");
    if (o.has("cluster")) schema.cluster = o.get<std::string>("cluster", "");
    if (o.has("covariates")) schema.covariates = o.get<std::vector<std::string>>("covariates", {});
    *out = new didkit_panel{didkit::load_panel_file(path, schema)};
  });
}

didkit_status didkit_panel_normalize(const didkit_panel* panel, didkit_panel** out, char** report_json) {
  return guarded([&] {
    require(panel, "panel");
    require(out, "output");
    auto norm = didkit::normalize_groups(panel->data);
    if (report_json) *report_json = dup_string(didkit::canonical_json(didkit::to_json(norm.report)));
    *out = new didkit_panel{std::move(norm.data)};
  });
}

didkit_status didkit_panel_write(const didkit_panel* panel, const char* path) {
  return guarded([&] {
    require(panel, "panel");
    require(path, "path");
    didkit::write_panel_file(path, panel->data);
  });
}

size_t didkit_panel_n_units(const didkit_panel* panel) { return panel ? panel->data.n_units() : 0; }
size_t didkit_panel_n_periods(const didkit_panel* panel) { return panel ? panel->data.n_periods() : 0; }
size_t didkit_panel_n_covariates(const didkit_panel* panel) { return panel ? panel->data.n_covariates() : 0; }
void didkit_panel_free(didkit_panel* panel) { delete panel; }

didkit_status didkit_attgt_estimate(const didkit_panel* panel, const char* options_json, didkit_attgt** out) {
  return guarded([&] {
    require(panel, "panel");
    require(out, "output");
    Options o(options_json, {"assumption", "estimator", "include_pretrends", "covariate_timing", "threads",
                             "outcome_covariates", "propensity_covariates"});
    didkit::AttGtSettings s;
    s.assumption = parse_enum(o, "assumption", s.assumption, didkit::parse_parallel_trends, "never, not_yet, all_periods");
    s.estimator = parse_enum(o, "estimator", s.estimator, didkit::parse_estimator, "means, ra, ipw, dr");
    s.include_pretrends = o.get<bool>("include_pretrends", true);
    const auto timing = o.get<std::string>("covariate_timing", "baseline");
    if (timing == "baseline") {
      s.timing = didkit::CovariateTiming::baseline;
    } else if (timing == "pre_and_post") {
      s.timing = didkit::CovariateTiming::pre_and_post;
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown covariate_timing '" + timing + "' (valid: baseline, pre_and_post)");
    }
    const int threads = o.get<int>("threads", 1);
    if (threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be at least 1");
    s.threads = static_cast<unsigned>(threads);
    s.designs.outcome = design_for(panel->data, o, "outcome_covariates");
    s.designs.propensity = design_for(panel->data, o, "propensity_covariates");
    auto result = std::make_unique<didkit_attgt>();
    result->table = didkit::att_gt(panel->data, s);
    result->extra_settings["covariates"] = panel->data.covariate_names();
    result->extra_settings["weights"] =
        panel->data.weight_kind() == didkit::WeightKind::supplied ? "supplied" : "uniform";
    result->extra_settings["covariate_timing"] = timing;
    result->extra_settings["n_clusters"] = panel->data.n_clusters();
    *out = result.release();
  });
}

didkit_status didkit_attgt_to_json(const didkit_attgt* table, int with_influence, char** out) {
  return guarded([&] {
    require(table, "table");
    require(out, "output");
    json doc = didkit::to_json(table->table, with_influence != 0);
    for (auto it = table->extra_settings.begin(); it != table->extra_settings.end(); ++it) {
      doc["settings"][it.key()] = it.value();
    }
    *out = dup_string(didkit::canonical_json(doc));
  });
}

didkit_status didkit_attgt_from_json(const char* doc, didkit_attgt** out) {
  return guarded([&] {
    require(doc, "document");
    require(out, "output");
    json j;
    try {
      j = json::parse(doc);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::InvalidArgument, std::string("not valid JSON: ") + e.what());
    }
    auto result = std::make_unique<didkit_attgt>();
    result->table = didkit::table_from_json(j);
    static const std::set<std::string> core{"assumption", "estimator", "base_period", "include_pretrends"};
    for (auto it = j["settings"].begin(); it != j["settings"].end(); ++it) {
      if (!core.count(it.key())) result->extra_settings[it.key()] = it.value();
    }
    *out = result.release();
  });
}

size_t didkit_attgt_n_cells(const didkit_attgt* table) { return table ? table->table.cells.size() : 0; }

didkit_status didkit_pretrend_test(const didkit_attgt* table, char** out_json) {
  return guarded([&] {
    require(table, "table");
    require(out_json, "output");
    *out_json = dup_string(didkit::canonical_json(didkit::to_json(didkit::pretrend_joint_test(table->table))));
  });
}

void didkit_attgt_free(didkit_attgt* table) { delete table; }

didkit_status didkit_event_study(const didkit_attgt* table, const char* options_json, didkit_curve** out) {
  return guarded([&] {
    require(table, "table");
    require(out, "output");
    Options o(options_json, {"level", "window", "draws", "seed", "multiplier", "threads"});
    const double level = o.get<double>("level", 0.95);
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
    didkit::BandOptions band;
    band.level = level;
    band.draws = o.get<int>("draws", 999);
    band.seed = o.get<std::uint64_t>("seed", 0);
    band.multiplier = parse_enum(o, "multiplier", band.multiplier, didkit::parse_multiplier, "rademacher, mammen");
    const int threads = o.get<int>("threads", 1);
    if (threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be at least 1");
    band.threads = static_cast<unsigned>(threads);
    if (band.draws != 0 && band.draws < 199) {
      throw Error(ErrorKind::InvalidArgument, "draws must be 0 (no band) or at least 199");
    }
    auto result = std::make_unique<didkit_curve>();
    if (o.has("window")) {
      const auto w = o.get<std::vector<int>>("window", {});
      if (w.size() != 2) throw Error(ErrorKind::InvalidArgument, "window must be [lo, hi]");
      result->curve = didkit::event_study_balanced(table->table, w[0], w[1], level);
    } else {
      result->curve = didkit::event_study(table->table, level);
    }
    if (band.draws > 0) didkit::attach_band(result->curve, band);
    *out = result.release();
  });
}

didkit_status didkit_curve_to_json(const didkit_curve* curve, char** out) {
  return guarded([&] {
    require(curve, "curve");
    require(out, "output");
    *out = dup_string(didkit::canonical_json(didkit::to_json(curve->curve)));
  });
}

didkit_status didkit_curve_from_json(const char* doc, didkit_curve** out) {
  return guarded([&] {
    require(doc, "document");
    require(out, "output");
    json j;
    try {
      j = json::parse(doc);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::InvalidArgument, std::string("not valid JSON: ") + e.what());
    }
    *out = new didkit_curve{didkit::curve_from_json(j)};
  });
}

didkit_status didkit_curve_to_svg(const didkit_curve* curve, char** out) {
  return guarded([&] {
    require(curve, "curve");
    require(out, "output");
    *out = dup_string(didkit::render_event_study_svg(curve->curve));
  });
}

didkit_status didkit_sensitivity(const didkit_curve* curve, const char* options_json, char** out_json) {
  return guarded([&] {
    require(curve, "curve");
    require(out_json, "output");
    Options o(options_json, {"target_e", "mbar", "benchmark", "level", "cumulate"});
    didkit::SensitivityOptions s;
    s.target_e = o.get<int>("target_e", 0);
    s.mbar = o.get<double>("mbar", 1.0);
    s.benchmark = parse_enum(o, "benchmark", s.benchmark, didkit::parse_benchmark, "max_pre_step, absolute");
    s.level = o.get<double>("level", curve->curve.level);
    s.cumulate = o.get<bool>("cumulate", false);
    *out_json = dup_string(didkit::canonical_json(didkit::to_json(didkit::sensitivity_bounds(curve->curve, s))));
  });
}

void didkit_curve_free(didkit_curve* curve) { delete curve; }

didkit_status didkit_balance(const didkit_panel* panel, const char* options_json, char** out_json, char** out_markdown) {
  return guarded([&] {
    require(panel, "panel");
    require(out_json, "output");
    Options o(options_json, {"pre", "post", "weighted"});
    const auto& periods = panel->data.periods();
    const int pre = o.get<int>("pre", periods.front());
    const int post = o.get<int>("post", periods.size() > 1 ? periods[1] : periods.front());
    const auto table = didkit::balance_table(panel->data, pre, post, o.get<bool>("weighted", false));
    auto j = didkit::canonical_json(didkit::to_json(table));
    std::string md = out_markdown ? didkit::balance_markdown(table) : std::string();
    *out_json = dup_string(j);
    if (out_markdown) *out_markdown = dup_string(md);
  });
}

didkit_status didkit_twfe(const didkit_panel* panel, const char* options_json, char** out_json) {
  return guarded([&] {
    require(panel, "panel");
    require(out_json, "output");
    Options o(options_json, {"spec", "weighted"});
    const auto spec = parse_enum(o, "spec", didkit::TwfeSpec::static_effect, didkit::parse_twfe_spec,
                                 "static, dynamic_2xT, saturated_SA");
    const bool weighted = o.get<bool>("weighted", false);
    json doc = didkit::to_json(didkit::twfe_fit(panel->data, spec, weighted));
    if (spec == didkit::TwfeSpec::static_effect && panel->data.n_periods() == 2) {
      bool early = false;
      for (std::size_t i = 0; i < panel->data.n_units(); ++i) early = early || panel->data.group_index(i) == 0u;
      if (!early) doc["long_difference"] = didkit::to_json(didkit::long_difference_fit(panel->data, weighted));
    }
    *out_json = dup_string(didkit::canonical_json(doc));
  });
}

didkit_status didkit_bacon(const didkit_panel* panel, const char* options_json, char** out_json) {
  return guarded([&] {
    require(panel, "panel");
    require(out_json, "output");
    Options o(options_json, {"weighted"});
    const auto d = didkit::bacon_two_period(panel->data, o.get<bool>("weighted", false));
    *out_json = dup_string(didkit::canonical_json(didkit::to_json(d)));
  });
}

didkit_status didkit_simulate(const char* config_text, const char* overrides_json, didkit_panel** out_panel,
                              char** truth_json) {
  return guarded([&] {
    require(out_panel, "output");
    Options o(overrides_json, {"seed", "n_units", "threads"});
    const auto cfg_file = didkit::ConfigFile::parse(config_text ? config_text : "");
    auto cfg = didkit::dgp_from_config(cfg_file);
    if (o.has("seed")) cfg.seed = o.get<std::uint64_t>("seed", 0);
    if (o.has("n_units")) {
      const auto n = o.get<long long>("n_units", 0);
      if (n <= 0) throw Error(ErrorKind::InvalidArgument, "n_units must be positive");
      cfg.n_units = static_cast<std::size_t>(n);
    }
    const int threads = o.get<int>("threads", 1);
    if (threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be at least 1");
    cfg.threads = static_cast<unsigned>(threads);
    auto sim = didkit::simulate_staggered(cfg);
    if (truth_json) *truth_json = dup_string(didkit::canonical_json(didkit::to_json(sim.truth)));
    *out_panel = new didkit_panel{std::move(sim.data)};
  });
}

}  // extern "C"
