// didkit command-line front end. Talks to the library only through didkit.h.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "didkit/didkit.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kEstimation = 3;

struct Failure {
  int code;
  std::string message;
};

void check(didkit_status s) {
  if (s == DIDKIT_OK) return;
  throw Failure{s == DIDKIT_ERR_VALIDATION ? kUsage : kEstimation, didkit_last_error()};
}

struct CString {
  char* p = nullptr;
  ~CString() { didkit_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};
using Panel = Handle<didkit_panel, didkit_panel_free>;
using Table = Handle<didkit_attgt, didkit_attgt_free>;
using Curve = Handle<didkit_curve, didkit_curve_free>;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Failure{kUsage, "Io: cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Failure{kUsage, "Io: cannot write '" + path.string() + "'"};
  f << text;
}

std::string canonical(const json& doc) {
  CString out;
  check(didkit_json_canonicalize(doc.dump().c_str(), &out.p));
  return out.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Flags shared by every subcommand.
struct Common {
  std::string input;
  std::string weights;
  std::string cluster;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
  // column mapping
  std::string unit_col = "unit", period_col = "period", outcome_col = "outcome", group_col = "first_treat";
  std::string never_value = "0";
  std::string covariates;
};

void add_common(CLI::App* sub, Common& c, bool with_config) {
  sub->add_option("--input", c.input, "input file");
  sub->add_option("--weights", c.weights, "sampling-weight column");
  sub->add_option("--cluster", c.cluster, "cluster column (default: unit)");
  sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
  sub->add_option("--unit-col", c.unit_col, "unit id column")->capture_default_str();
  sub->add_option("--period-col", c.period_col, "period column")->capture_default_str();
  sub->add_option("--outcome-col", c.outcome_col, "outcome column")->capture_default_str();
  sub->add_option("--group-col", c.group_col, "first-treatment period column")->capture_default_str();
  sub->add_option("--never-value", c.never_value, "first-treatment value of never-treated units")->capture_default_str();
  sub->add_option("--covariates", c.covariates, "comma-separated covariate columns (default: all others)");
  if (with_config) sub->add_option("--config", "TOML-style file of option values (flags take precedence)");
}

// Arguments supplied by a --config file for options not given on the command line.
std::vector<std::string> config_arguments(CLI::App* sub) {
  std::vector<std::string> extra;
  auto* cfg = sub->get_option_no_throw("--config");
  if (!cfg || cfg->count() == 0) return extra;
  const auto path = cfg->as<std::string>();
  if (!fs::exists(path)) throw Failure{kUsage, "Io: cannot open config file '" + path + "'"};
  for (const auto& item : CLI::ConfigTOML().from_file(path)) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub->get_name())) continue;
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    if (name == "config") throw Failure{kUsage, "config files cannot include other config files"};
    auto* opt = sub->get_option_no_throw("--" + name);
    if (!opt) throw Failure{kUsage, "unknown key '" + item.name + "' in config file '" + path + "'"};
    if (opt->count() > 0) continue;  // the command line wins
    if (opt->get_type_size() == 0) {  // flag
      if (item.inputs.size() == 1 && item.inputs[0] == "true") extra.push_back("--" + name);
      continue;
    }
    extra.push_back("--" + name);
    std::string joined;
    for (const auto& v : item.inputs) joined += (joined.empty() ? "" : ",") + v;
    extra.push_back(joined);
  }
  return extra;
}

std::string schema_json(const Common& c) {
  json s = {{"unit", c.unit_col},
            {"period", c.period_col},
            {"outcome", c.outcome_col},
            {"first_treat", c.group_col},
            {"never_value", c.never_value}};
  if (!c.weights.empty()) s["weight"] = c.weights;
  if (!c.cluster.empty()) s["cluster"] = c.cluster;
  if (!c.covariates.empty()) s["covariates"] = split_list(c.covariates);
  return s.dump();
}

void require_input(const Common& c) {
  if (c.input.empty()) throw Failure{kUsage, "--input is required"};
}

void load(const Common& c, Panel& panel) {
  require_input(c);
  check(didkit_panel_load(c.input.c_str(), schema_json(c).c_str(), &panel.p));
}

std::optional<std::pair<int, int>> parse_window(const std::string& w) {
  if (w.empty()) return std::nullopt;
  const auto parts = split_list(w);
  try {
    if (parts.size() == 2) return std::make_pair(std::stoi(parts[0]), std::stoi(parts[1]));
  } catch (const std::logic_error&) {
  }
  throw Failure{kUsage, "--window expects lo,hi"};
}

struct BandFlags {
  int boot = 999;
  double level = 0.95;
  std::string multiplier = "rademacher";
  std::string window;
};

void add_band(CLI::App* sub, BandFlags& b) {
  sub->add_option("--boot", b.boot, "bootstrap draws for the simultaneous band (0: none)")->capture_default_str();
  sub->add_option("--level", b.level, "confidence level")->check(CLI::Range(0.5, 0.9999))->capture_default_str();
  sub->add_option("--multiplier", b.multiplier, "bootstrap multipliers")
      ->check(CLI::IsMember({"rademacher", "mammen"}))
      ->capture_default_str();
  sub->add_option("--window", b.window, "balanced event-time window lo,hi");
}

void write_event_study(const didkit_attgt* table, const BandFlags& b, const Common& c) {
  json opts = {{"level", b.level}, {"draws", b.boot}, {"seed", c.seed}, {"multiplier", b.multiplier},
               {"threads", c.threads}};
  if (auto w = parse_window(b.window)) opts["window"] = {w->first, w->second};
  Curve curve;
  check(didkit_event_study(table, opts.dump().c_str(), &curve.p));
  CString doc, svg;
  check(didkit_curve_to_json(curve.p, &doc.p));
  check(didkit_curve_to_svg(curve.p, &svg.p));
  write_file(fs::path(c.out_dir) / "event_study.json", doc.str());
  write_file(fs::path(c.out_dir) / "event_study.svg", svg.str());
}

// ---- subcommands ----

struct BalanceFlags {
  std::optional<int> pre, post;
  bool weighted = false;
};

void run_balance(const Common& c, const BalanceFlags& f) {
  Panel panel;
  load(c, panel);
  json opts = {{"weighted", f.weighted}};
  if (f.pre) opts["pre"] = *f.pre;
  if (f.post) opts["post"] = *f.post;
  CString doc, md;
  check(didkit_balance(panel.p, opts.dump().c_str(), &doc.p, &md.p));
  write_file(fs::path(c.out_dir) / "balance.json", doc.str());
  write_file(fs::path(c.out_dir) / "balance.md", md.str());
}

struct AttgtFlags {
  std::string estimator = "means";
  std::string assumption = "not_yet";
  bool no_pretrends = false;
  std::string timing = "baseline";
  bool no_normalize = false;
  BandFlags band;
};

void run_attgt(const Common& c, const AttgtFlags& f) {
  Panel raw;
  load(c, raw);
  Panel norm;
  CString report;
  const didkit_panel* data = raw.p;
  if (!f.no_normalize) {
    check(didkit_panel_normalize(raw.p, &norm.p, &report.p));
    data = norm.p;
  }
  json opts = {{"estimator", f.estimator},
               {"assumption", f.assumption},
               {"include_pretrends", !f.no_pretrends},
               {"covariate_timing", f.timing},
               {"threads", c.threads}};
  Table table;
  check(didkit_attgt_estimate(data, opts.dump().c_str(), &table.p));
  if (didkit_attgt_n_cells(table.p) == 0) throw Failure{kEstimation, "NoComparison: no estimable group-time cell"};

  CString doc;
  check(didkit_attgt_to_json(table.p, 1, &doc.p));
  json out = json::parse(doc.str());
  out["normalization"] = report.p ? json::parse(report.str()) : json(nullptr);
  CString pre;
  if (didkit_pretrend_test(table.p, &pre.p) == DIDKIT_OK) {
    out["pretrend_test"] = json::parse(pre.str());
  } else {
    out["pretrend_test"] = nullptr;
  }
  write_file(fs::path(c.out_dir) / "attgt.json", canonical(out));
  write_event_study(table.p, f.band, c);
}

void run_aggregate(const Common& c, const BandFlags& b) {
  require_input(c);
  const std::string text = read_file(c.input);
  Table table;
  check(didkit_attgt_from_json(text.c_str(), &table.p));
  write_event_study(table.p, b, c);
}

struct TwfeFlags {
  std::string spec = "static";
  bool weighted = false;
};

void run_twfe(const Common& c, const TwfeFlags& f) {
  Panel panel;
  load(c, panel);
  json opts = {{"spec", f.spec}, {"weighted", f.weighted}};
  CString doc;
  check(didkit_twfe(panel.p, opts.dump().c_str(), &doc.p));
  write_file(fs::path(c.out_dir) / "twfe.json", doc.str());
}

void run_bacon(const Common& c, bool weighted) {
  Panel panel;
  load(c, panel);
  json opts = {{"weighted", weighted}};
  CString doc;
  check(didkit_bacon(panel.p, opts.dump().c_str(), &doc.p));
  write_file(fs::path(c.out_dir) / "bacon.json", doc.str());
}

struct SensitivityFlags {
  int target_e = 0;
  double mbar = 1.0;
  std::string benchmark = "max_pre_step";
  std::optional<double> level;
  bool cumulate = false;
};

void run_sensitivity(const Common& c, const SensitivityFlags& f) {
  require_input(c);
  const std::string text = read_file(c.input);
  Curve curve;
  check(didkit_curve_from_json(text.c_str(), &curve.p));
  json opts = {{"target_e", f.target_e}, {"mbar", f.mbar}, {"benchmark", f.benchmark}, {"cumulate", f.cumulate}};
  if (f.level) opts["level"] = *f.level;
  CString doc;
  check(didkit_sensitivity(curve.p, opts.dump().c_str(), &doc.p));
  write_file(fs::path(c.out_dir) / "sensitivity.json", doc.str());
}

struct SimulateFlags {
  std::string config;
  std::string out;
  std::string truth;
  std::optional<long long> n_units;
  bool seed_given = false;
};

void run_simulate(const Common& c, const SimulateFlags& f) {
  const std::string text = f.config.empty() ? std::string() : read_file(f.config);
  json overrides = {{"threads", c.threads}};
  if (f.seed_given) overrides["seed"] = c.seed;
  if (f.n_units) overrides["n_units"] = *f.n_units;
  Panel panel;
  CString truth;
  check(didkit_simulate(text.c_str(), overrides.dump().c_str(), &panel.p, &truth.p));
  const fs::path out = f.out.empty() ? fs::path(c.out_dir) / "sim.csv" : fs::path(f.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  check(didkit_panel_write(panel.p, out.string().c_str()));
  const fs::path truth_path =
      f.truth.empty() ? out.parent_path() / (out.stem().string() + "_truth.json") : fs::path(f.truth);
  write_file(truth_path, truth.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"didkit: difference-in-differences estimation"};
  app.require_subcommand(1);

  std::map<std::string, Common> common;
  auto make = [&](const std::string& name, const std::string& desc, bool with_config = true) {
    auto* sub = app.add_subcommand(name, desc);
    add_common(sub, common[name], with_config);
    return sub;
  };

  BalanceFlags balance;
  auto* s_balance = make("balance", "covariate balance table (balance.json, balance.md)");
  s_balance->add_option("--pre", balance.pre, "period for levels (default: first)");
  s_balance->add_option("--post", balance.post, "second period for changes (default: second)");
  s_balance->add_flag("--weighted", balance.weighted, "use sampling weights");

  AttgtFlags attgt;
  auto* s_attgt = make("attgt", "group-time effects and event study (attgt.json, event_study.json/.svg)");
  s_attgt->add_option("--estimator", attgt.estimator, "2x2 estimator")
      ->check(CLI::IsMember({"means", "ra", "ipw", "dr"}))
      ->capture_default_str();
  s_attgt->add_option("--assumption", attgt.assumption, "comparison group regime")
      ->check(CLI::IsMember({"never", "not_yet", "all_periods"}))
      ->capture_default_str();
  s_attgt->add_flag("--no-pretrends", attgt.no_pretrends, "skip pre-treatment cells");
  s_attgt->add_option("--covariate-timing", attgt.timing, "covariate values used by the working models")
      ->check(CLI::IsMember({"baseline", "pre_and_post"}))
      ->capture_default_str();
  s_attgt->add_flag("--no-normalize", attgt.no_normalize, "use the panel as loaded, without group normalization");
  add_band(s_attgt, attgt.band);

  BandFlags agg;
  auto* s_agg = make("aggregate", "event study from an attgt.json (event_study.json/.svg)");
  add_band(s_agg, agg);

  TwfeFlags twfe;
  auto* s_twfe = make("twfe", "two-way fixed effects regression (twfe.json)");
  s_twfe->add_option("--spec", twfe.spec, "specification")
      ->check(CLI::IsMember({"static", "dynamic_2xT", "saturated_SA"}))
      ->capture_default_str();
  s_twfe->add_flag("--weighted", twfe.weighted, "use sampling weights");

  bool bacon_weighted = false;
  auto* s_bacon = make("bacon", "two-period, three-group TWFE decomposition (bacon.json)");
  s_bacon->add_flag("--weighted", bacon_weighted, "use sampling weights");

  SensitivityFlags sens;
  auto* s_sens = make("sensitivity", "relative-magnitudes bounds from an event_study.json (sensitivity.json)");
  s_sens->add_option("--target-e", sens.target_e, "event time of the bounded effect")->capture_default_str();
  s_sens->add_option("--mbar", sens.mbar, "violation bound multiplier")->check(CLI::NonNegativeNumber)->capture_default_str();
  s_sens->add_option("--benchmark", sens.benchmark, "violation benchmark")
      ->check(CLI::IsMember({"max_pre_step", "absolute"}))
      ->capture_default_str();
  s_sens->add_option("--level", sens.level, "confidence level (default: the curve's)")->check(CLI::Range(0.5, 0.9999));
  s_sens->add_flag("--cumulate", sens.cumulate, "accumulate the violation over post periods");

  SimulateFlags sim;
  auto* s_sim = make("simulate", "synthetic staggered panel (CSV plus true effects JSON)", false);
  s_sim->add_option("--config", sim.config, "generator settings file");
  s_sim->add_option("--out", sim.out, "output CSV (default: <out-dir>/sim.csv)");
  s_sim->add_option("--truth", sim.truth, "true-effects JSON (default: next to the CSV)");
  s_sim->add_option("--n-units", sim.n_units, "override the number of units");

  try {
    app.parse(argc, argv);
    for (auto* sub : app.get_subcommands()) {
      if (sub == s_sim) continue;  // its --config holds generator settings
      const auto extra = config_arguments(sub);
      if (extra.empty()) continue;
      std::vector<std::string> args(argv + 1, argv + argc);
      args.insert(args.end(), extra.begin(), extra.end());
      std::reverse(args.begin(), args.end());
      app.parse(args);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*s_balance) run_balance(common["balance"], balance);
    if (*s_attgt) run_attgt(common["attgt"], attgt);
    if (*s_agg) run_aggregate(common["aggregate"], agg);
    if (*s_twfe) run_twfe(common["twfe"], twfe);
    if (*s_bacon) run_bacon(common["bacon"], bacon_weighted);
    if (*s_sens) run_sensitivity(common["sensitivity"], sens);
    if (*s_sim) {
      sim.seed_given = s_sim->get_option("--seed")->count() > 0;
      run_simulate(common["simulate"], sim);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kEstimation;
  }
  return kOk;
}
