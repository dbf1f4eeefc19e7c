#pragma once

#include <string>

#include "marginforge/classification.hpp"
#include "marginforge/protocol.hpp"

namespace marginforge {

// Deterministic JSON; non-finite numbers are written as "inf", "-inf" or "nan".
std::string report_to_json(const EvaluationReport& report);

// `kind,x,y` rows; far_frr emits a "far" row and an "frr" row per threshold level.
std::string curve_to_csv(const CurveSeries& curve);

// Writes the JSON report and, when curves_dir is nonempty, <kind>.csv for
// every aggregated curve. All writes are atomic.
void write_report(const EvaluationReport& report, const std::string& json_path, const std::string& curves_dir);

}  // namespace marginforge
