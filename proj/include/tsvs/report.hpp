#pragma once

#include "tsvs/sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

namespace tsvs::report {

inline constexpr std::string_view kVersion = "0.1.0";

using KeyValues = std::map<std::string, std::string>;

/// `key = value` lines; blank lines and lines starting with '#' are skipped.
/// Duplicate keys and lines without '=' are ParseErrors.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

/// Simulation settings plus selector settings read from a key-value config.
struct IvStudyConfig {
  sim::IvSimSpec spec;
  sim::Selectors selectors;
  sim::IvEstimators estimators;
};

struct MediationStudyConfig {
  sim::MediationSimSpec spec;
  sim::Selectors selectors;
};

/// Keys not listed in the README are rejected with InvalidArgument.
IvStudyConfig iv_config_from(const KeyValues& kv, IvStudyConfig base = {});
MediationStudyConfig mediation_config_from(const KeyValues& kv, MediationStudyConfig base = {});

/// The config in the same key-value format, in a fixed key order.
KeyValues to_key_values(const IvStudyConfig& c);
KeyValues to_key_values(const MediationStudyConfig& c);

/// Fixed six-decimal rendering; NaN prints as NA.
std::string format_number(double v);

/// Metadata lines ("# key = value") followed by a header row and one row
/// per selector x estimator (IV) or per selector (mediation).
void write_csv(std::ostream& out, const IvStudyConfig& config, const sim::IvStudyMetrics& m);
void write_csv(std::ostream& out, const MediationStudyConfig& config, const sim::MediationStudyMetrics& m);

nlohmann::json to_json(const IvStudyConfig& config, const sim::IvStudyMetrics& m);
nlohmann::json to_json(const MediationStudyConfig& config, const sim::MediationStudyMetrics& m);

}  // namespace tsvs::report
