#pragma once

#include <string>

#include "json.hpp"

#include "didkit/aggregate.hpp"
#include "didkit/diagnostics.hpp"
#include "didkit/inference.hpp"
#include "didkit/panel.hpp"
#include "didkit/simulate.hpp"
#include "didkit/staggered.hpp"

namespace didkit {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Sorted keys, no whitespace, floating-point numbers as %.10g, non-finite
/// numbers as null, trailing newline.
std::string canonical_json(const json& doc);

json to_json(const GroupTimeTable& table, bool with_influence = true);
/// Inverse of to_json for tables serialized with influence vectors.
GroupTimeTable table_from_json(const json& doc);

json to_json(const EventStudyCurve& curve);
/// Points, bands and weights; influence vectors are not part of the document.
EventStudyCurve curve_from_json(const json& doc);

json to_json(const PretrendTest& test);
json to_json(const SensitivityResult& result);
json to_json(const BalanceTable& table);
json to_json(const TwfeFit& fit);
json to_json(const LongDifferenceFit& fit);
json to_json(const BaconDecomposition& decomposition);
json to_json(const TrueEffects& truth);
json to_json(const BalanceReport& report);

/// Event-study figure: point estimates with pointwise (black) and simultaneous
/// (red) intervals, dashed line between e = -1 and e = 0.
std::string render_event_study_svg(const EventStudyCurve& curve);

}  // namespace didkit
