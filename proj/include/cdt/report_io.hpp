#pragma once

#include <string>

#include "cdt/pipeline.hpp"
#include "cdt/simulation.hpp"
#include "cdt/stability.hpp"

namespace cdt {

inline constexpr int kReportSchemaVersion = 1;

// Canonical serialization: fixed key order, two-space indent, floats with
// 17 significant digits so load-then-emit reproduces the bytes exactly.
std::string report_to_json(const CdtReport& report);

// Inverse of report_to_json; DataError on malformed documents or a
// schema_version this build does not speak. Tree fields that only matter
// while fitting (per-node weights and errors) are not carried.
CdtReport report_from_json(const std::string& text);

void write_report_file(const std::string& path, const CdtReport& report);
CdtReport read_report_file(const std::string& path);

// Teacher-selection summary in the same canonical style (one direction
// only; the per-bootstrap detail travels in the companion CSV).
std::string stability_to_json(const StabilityReport& report);

// Study grid from a config document. Unknown keys are rejected so typos
// fail loudly; absent keys keep the built-in defaults. Worker counts are
// not part of the file, they come from the command line.
StudyConfig study_config_from_json(const std::string& text);
std::string study_config_to_json(const StudyConfig& cfg);

}  // namespace cdt
