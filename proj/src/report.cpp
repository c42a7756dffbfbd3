#include "didkit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "didkit/error.hpp"

namespace didkit {

namespace {

void dump(const json& v, std::string& out) {
  char buf[64];
  switch (v.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map keeps keys sorted
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        dump(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        dump(v[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
      } else {
        std::snprintf(buf, sizeof buf, "%.10g", d == 0.0 ? 0.0 : d);  // no "-0"
        out += buf;
      }
      break;
    }
    default: out += v.dump();
  }
}

json interval(const Interval& i) { return json::array({i.lower, i.upper}); }

Interval interval_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

ErrorKind kind_from(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::DegenerateSE); ++k) {
    if (to_string(static_cast<ErrorKind>(k)) == name) return static_cast<ErrorKind>(k);
  }
  return ErrorKind::NoComparison;
}

json influence_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

std::string canonical_json(const json& doc) {
  std::string out;
  dump(doc, out);
  out += '\n';
  return out;
}

json to_json(const GroupTimeTable& table, bool with_influence) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "attgt";
  doc["settings"] = {{"assumption", std::string(to_string(table.assumption))},
                     {"estimator", std::string(to_string(table.estimator))},
                     {"base_period", table.base_period},
                     {"include_pretrends", table.include_pretrends}};
  doc["periods"] = table.periods;
  doc["n_units"] = table.n_units;
  doc["cohorts"] = json::array();
  for (const auto& c : table.cohorts) doc["cohorts"].push_back({{"g", c.g}, {"units", c.units}, {"weight", c.weight}});
  doc["cells"] = json::array();
  for (const auto& c : table.cells) {
    json cell = {{"g", c.g},
                 {"t", c.t},
                 {"event_time", c.event_time},
                 {"comparison", std::string(to_string(c.comparison))},
                 {"estimate", c.effect.estimate},
                 {"se", c.effect.se},
                 {"n_treated", c.effect.n_treated},
                 {"n_comparison", c.effect.n_comparison}};
    if (with_influence) cell["influence"] = influence_json(c.effect.influence);
    doc["cells"].push_back(std::move(cell));
  }
  doc["skipped"] = json::array();
  for (const auto& s : table.skipped) {
    doc["skipped"].push_back({{"g", s.g},
                              {"t", s.t},
                              {"event_time", s.event_time},
                              {"error", std::string(to_string(s.kind))},
                              {"reason", s.reason}});
  }
  if (with_influence) doc["cluster_codes"] = table.cluster_codes;
  doc["warnings"] = table.warnings;
  return doc;
}

GroupTimeTable table_from_json(const json& doc) {
  try {
    if (doc.value("kind", std::string()) != "attgt") {
      throw Error(ErrorKind::InvalidArgument, "document is not a group-time table");
    }
    GroupTimeTable t;
    const auto& s = doc.at("settings");
    const auto assumption = parse_parallel_trends(s.at("assumption").get<std::string>());
    const auto estimator = parse_estimator(s.at("estimator").get<std::string>());
    if (!assumption || !estimator) throw Error(ErrorKind::InvalidArgument, "unknown settings in table document");
    t.assumption = *assumption;
    t.estimator = *estimator;
    t.base_period = s.at("base_period").get<std::string>();
    t.include_pretrends = s.at("include_pretrends").get<bool>();
    t.periods = doc.at("periods").get<std::vector<int>>();
    t.n_units = doc.at("n_units").get<std::size_t>();
    auto index_of = [&](int label) {
      const auto it = std::find(t.periods.begin(), t.periods.end(), label);
      if (it == t.periods.end()) throw Error(ErrorKind::InvalidArgument, "cell period not among the periods");
      return static_cast<std::size_t>(it - t.periods.begin());
    };
    for (const auto& c : doc.at("cohorts")) {
      CohortSize cs;
      cs.g = c.at("g").get<int>();
      cs.g_index = index_of(cs.g);
      cs.units = c.at("units").get<std::size_t>();
      cs.weight = c.at("weight").get<double>();
      t.cohorts.push_back(cs);
    }
    if (!doc.contains("cluster_codes")) {
      throw Error(ErrorKind::InvalidArgument, "table document carries no influence data");
    }
    t.cluster_codes = doc.at("cluster_codes").get<std::vector<int>>();
    if (t.cluster_codes.size() != t.n_units) throw Error(ErrorKind::InvalidArgument, "cluster codes length mismatch");
    for (const auto& c : doc.at("cells")) {
      GroupTimeEffect e;
      e.g = c.at("g").get<int>();
      e.t = c.at("t").get<int>();
      e.g_index = index_of(e.g);
      e.t_index = index_of(e.t);
      e.event_time = c.at("event_time").get<int>();
      const auto tag = c.at("comparison").get<std::string>();
      e.comparison = tag == "never" ? ComparisonTag::never : tag == "not_yet" ? ComparisonTag::not_yet : ComparisonTag::pooled_pre;
      e.effect.estimate = c.at("estimate").get<double>();
      e.effect.se = c.at("se").get<double>();
      e.effect.n_treated = c.at("n_treated").get<std::size_t>();
      e.effect.n_comparison = c.at("n_comparison").get<std::size_t>();
      e.effect.estimator = t.estimator;
      if (!c.contains("influence")) throw Error(ErrorKind::InvalidArgument, "table document carries no influence data");
      const auto inf = c.at("influence").get<std::vector<double>>();
      if (inf.size() != t.n_units) throw Error(ErrorKind::InvalidArgument, "influence vector length mismatch");
      e.effect.influence = Eigen::Map<const Eigen::VectorXd>(inf.data(), static_cast<Eigen::Index>(inf.size()));
      t.cells.push_back(std::move(e));
    }
    for (const auto& c : doc.at("skipped")) {
      t.skipped.push_back({c.at("g").get<int>(), c.at("t").get<int>(), c.at("event_time").get<int>(),
                           kind_from(c.at("error").get<std::string>()), c.at("reason").get<std::string>()});
    }
    if (doc.contains("warnings")) t.warnings = doc.at("warnings").get<std::vector<std::string>>();
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed table document: ") + e.what());
  }
}

json to_json(const EventStudyCurve& curve) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "event_study";
  doc["balanced"] = curve.balanced;
  doc["window"] = curve.window ? json::array({curve.window->first, curve.window->second}) : json(nullptr);
  doc["level"] = curve.level;
  doc["points"] = json::array();
  for (const auto& p : curve.points) {
    json w = json::array();
    for (const auto& cw : p.weights) w.push_back({{"g", cw.g}, {"weight", cw.weight}});
    doc["points"].push_back({{"e", p.e},
                             {"estimate", p.estimate},
                             {"se", p.se},
                             {"pointwise", interval(p.pointwise)},
                             {"simultaneous", p.simultaneous ? interval(*p.simultaneous) : json(nullptr)},
                             {"weights", std::move(w)}});
  }
  doc["overall"] = curve.overall ? json{{"estimate", curve.overall->estimate}, {"se", curve.overall->se}} : json(nullptr);
  if (curve.band) {
    doc["band"] = {{"critical_value", curve.band->critical_value},
                   {"pointwise_critical_value", curve.band->pointwise_critical_value},
                   {"draws", curve.band->draws},
                   {"seed", curve.band->seed},
                   {"multiplier", curve.band->multiplier},
                   {"degenerate_event_times", curve.band->degenerate_event_times}};
  } else {
    doc["band"] = nullptr;
  }
  return doc;
}

EventStudyCurve curve_from_json(const json& doc) {
  try {
    if (doc.value("kind", std::string()) != "event_study") {
      throw Error(ErrorKind::InvalidArgument, "document is not an event-study curve");
    }
    EventStudyCurve c;
    c.balanced = doc.at("balanced").get<bool>();
    if (!doc.at("window").is_null()) c.window = std::make_pair(doc["window"].at(0).get<int>(), doc["window"].at(1).get<int>());
    c.level = doc.at("level").get<double>();
    for (const auto& p : doc.at("points")) {
      EventStudyPoint pt;
      pt.e = p.at("e").get<int>();
      pt.estimate = p.at("estimate").get<double>();
      pt.se = p.at("se").get<double>();
      pt.pointwise = interval_from(p.at("pointwise"));
      if (!p.at("simultaneous").is_null()) pt.simultaneous = interval_from(p.at("simultaneous"));
      for (const auto& w : p.at("weights")) pt.weights.push_back({w.at("g").get<int>(), w.at("weight").get<double>()});
      c.points.push_back(std::move(pt));
    }
    std::sort(c.points.begin(), c.points.end(), [](const auto& a, const auto& b) { return a.e < b.e; });
    if (doc.contains("overall") && !doc["overall"].is_null()) {
      EffectEstimate o;
      o.estimate = doc["overall"].at("estimate").get<double>();
      o.se = doc["overall"].at("se").get<double>();
      c.overall = o;
    }
    if (doc.contains("band") && !doc["band"].is_null()) {
      const auto& b = doc["band"];
      BandInfo info;
      info.critical_value = b.at("critical_value").get<double>();
      info.pointwise_critical_value = b.at("pointwise_critical_value").get<double>();
      info.draws = b.at("draws").get<int>();
      info.seed = b.at("seed").get<std::uint64_t>();
      info.multiplier = b.at("multiplier").get<std::string>();
      info.degenerate_event_times = b.value("degenerate_event_times", std::vector<int>{});
      c.band = info;
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed event-study document: ") + e.what());
  }
}

json to_json(const PretrendTest& t) {
  json cells = json::array();
  for (const auto& [g, tt] : t.cells) cells.push_back({{"g", g}, {"t", tt}});
  return {{"statistic", t.statistic}, {"dof", t.dof},     {"p_value", t.p_value},
          {"rank", t.rank},           {"pseudo_inverse", t.pseudo_inverse}, {"cells", cells}};
}

json to_json(const SensitivityResult& r) {
  return {{"schema_version", kSchemaVersion},
          {"kind", "sensitivity"},
          {"target_e", r.target_e},
          {"mbar", r.mbar},
          {"benchmark", std::string(to_string(r.benchmark))},
          {"level", r.level},
          {"cumulate", r.cumulate},
          {"estimate", r.estimate},
          {"se", r.se},
          {"max_pre_step", r.max_pre_step ? json(*r.max_pre_step) : json(nullptr)},
          {"violation_budget", r.violation},
          {"identified_set", interval(r.identified)},
          {"robust_ci", interval(r.robust_ci)}};
}

json to_json(const BalanceTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"variable", r.variable},
                    {"kind", r.kind == BalanceKind::level ? "level" : "difference"},
                    {"mean_treated", r.mean_treated},
                    {"mean_comparison", r.mean_comparison},
                    {"var_treated", r.var_treated},
                    {"var_comparison", r.var_comparison},
                    {"normalized_difference", r.normalized_difference},
                    {"zero_variance", r.zero_variance}});
  }
  return {{"schema_version", kSchemaVersion}, {"kind", "balance"},          {"pre", t.pre},
          {"post", t.post},                   {"weighted", t.weighted},      {"n_treated", t.n_treated},
          {"n_comparison", t.n_comparison},   {"rows", rows}};
}

json to_json(const TwfeFit& f) {
  json coefs = json::array();
  for (std::size_t k = 0; k < f.names.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    coefs.push_back({{"name", f.names[k]}, {"estimate", f.coefficients(i)}, {"se", f.se(i)}});
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "twfe"},
          {"spec", std::string(to_string(f.spec))},
          {"weighted", f.weighted},
          {"n_units", f.n_units},
          {"n_periods", f.n_periods},
          {"coefficients", coefs}};
}

json to_json(const LongDifferenceFit& f) {
  return {{"intercept", f.intercept}, {"coefficient", f.coefficient}, {"se", f.se}};
}

json to_json(const BaconDecomposition& d) {
  auto terms = [](const std::vector<BaconTerm>& v) {
    json a = json::array();
    for (const auto& t : v) a.push_back({{"label", t.label}, {"estimate", t.estimate}, {"weight", t.weight}});
    return a;
  };
  return {{"schema_version", kSchemaVersion},
          {"kind", "bacon"},
          {"weighted", d.weighted},
          {"shares", {{"early", d.share_early}, {"late", d.share_late}, {"never", d.share_never}}},
          {"w1", d.w1},
          {"comparisons", terms(d.comparisons)},
          {"components", terms(d.components)},
          {"beta", d.beta}};
}

json to_json(const TrueEffects& truth) {
  json cells = json::array();
  for (const auto& [k, v] : truth.att_gt) cells.push_back({{"g", k.first}, {"t", k.second}, {"att", v}});
  json es = json::array();
  for (const auto& [e, v] : truth.event_study) es.push_back({{"e", e}, {"att", v}});
  return {{"schema_version", kSchemaVersion}, {"kind", "truth"}, {"att_gt", cells}, {"event_study", es},
          {"overall", truth.overall}};
}

json to_json(const BalanceReport& r) {
  json dropped = json::array();
  for (const auto& d : r.dropped_units) dropped.push_back({{"unit", d.unit_id}, {"reason", d.reason}});
  return {{"original_units", r.original_units}, {"n_periods", r.n_periods},
          {"units_per_group", r.units_per_group}, {"dropped_units", dropped},
          {"dropped_periods", r.dropped_periods}, {"recoded_groups", r.recoded_groups}};
}

// ---------------------------------------------------------------------------

std::string render_event_study_svg(const EventStudyCurve& curve) {
  constexpr double W = 640, H = 400, left = 60, right = 20, top = 20, bottom = 50;
  std::ostringstream os;
  char buf[256];
  auto emit = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof buf, fmt, args...);
    os << buf;
  };
  emit("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n", W, H, W,
       H);
  emit("<rect x=\"0\" y=\"0\" width=\"%.0f\" height=\"%.0f\" fill=\"white\"/>\n", W, H);
  if (curve.points.empty()) {
    os << "</svg>\n";
    return os.str();
  }
  int emin = curve.points.front().e, emax = curve.points.back().e;
  for (const auto& p : curve.points) {
    emin = std::min(emin, p.e);
    emax = std::max(emax, p.e);
  }
  emin = std::min(emin, -1);
  emax = std::max(emax, 0);
  double ylo = 0.0, yhi = 0.0;
  for (const auto& p : curve.points) {
    const Interval outer = p.simultaneous ? *p.simultaneous : p.pointwise;
    ylo = std::min({ylo, outer.lower, p.pointwise.lower, p.estimate});
    yhi = std::max({yhi, outer.upper, p.pointwise.upper, p.estimate});
  }
  if (yhi - ylo < 1e-12) {
    ylo -= 1.0;
    yhi += 1.0;
  }
  const double pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;
  const double x0 = emin - 0.5, x1 = emax + 0.5;
  auto X = [&](double e) { return left + (e - x0) / (x1 - x0) * (W - left - right); };
  auto Y = [&](double v) { return top + (yhi - v) / (yhi - ylo) * (H - top - bottom); };

  // axes
  emit("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", left, H - bottom, W - right,
       H - bottom);
  emit("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", left, top, left, H - bottom);
  // zero line and treatment-onset marker
  emit("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"gray\" stroke-width=\"0.5\"/>\n", left, Y(0.0),
       W - right, Y(0.0));
  emit("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"gray\" stroke-dasharray=\"4,4\"/>\n", X(-0.5), top,
       X(-0.5), H - bottom);
  for (int e = emin; e <= emax; ++e) {
    emit("<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"middle\">%d</text>\n", X(e), H - bottom + 16, e);
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = ylo + (yhi - ylo) * k / 4.0;
    emit("<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"end\">%.2f</text>\n", left - 6, Y(v) + 4, v);
  }
  emit("<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">event time</text>\n", (left + W - right) / 2,
       H - 10);

  for (const auto& p : curve.points) {
    const double x = X(p.e);
    if (p.simultaneous) {
      emit("<line class=\"simultaneous\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"red\" stroke-width=\"1\"/>\n",
           x, Y(p.simultaneous->upper), x, Y(p.simultaneous->lower));
    }
    emit("<line class=\"pointwise\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\" stroke-width=\"2.5\"/>\n",
         x, Y(p.pointwise.upper), x, Y(p.pointwise.lower));
    emit("<circle class=\"estimate\" cx=\"%.2f\" cy=\"%.2f\" r=\"3.5\" fill=\"black\"/>\n", x, Y(p.estimate));
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace didkit
