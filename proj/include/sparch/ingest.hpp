#ifndef SPARCH_INGEST_HPP
#define SPARCH_INGEST_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sparch/types.hpp"

namespace sparch {

struct RawPanelRecord {
    std::string location_id;
    std::string variable;
    std::string time;  // sortable label, e.g. ISO month
    double value = 0.0;
};

enum class MissingPolicy { CarryForward, Error };

struct IngestOptions {
    MissingPolicy missing_policy = MissingPolicy::CarryForward;
    double jitter_sd = 0.0001;
    std::uint64_t jitter_seed = 0;
};

struct PanelSchema {
    std::string location_column = "location";
    std::string variable_column = "variable";
    std::string time_column = "time";
    std::string value_column = "value";
    char delimiter = ',';
};

// Long-format delimiter-separated file with a header row. Values must be
// positive prices; duplicate (location, variable, time) keys are rejected.
std::vector<RawPanelRecord> load_panel(const std::string& path, const PanelSchema& schema);

// Log-returns per (location, variable) series over the common time index;
// exact-zero returns replaced by seeded Normal(0, jitter_sd^2) draws; the
// first return slice becomes Y0.
Panel to_returns(const std::vector<RawPanelRecord>& records, const IngestOptions& options);

struct PanelSummary {
    Dimensions dims;
    std::vector<std::string> variable_names;
    // per variable: time series of cross-location mean returns
    std::vector<std::vector<double>> mean_by_time;
    std::vector<double> overall_mean;
    std::vector<double> overall_var;
    int jittered_zeros = 0;
    std::string to_text() const;
};

PanelSummary panel_summary(const Panel& panel);

// Observation panel (already in model units, e.g. returns) serialization in
// the same long format.
Panel load_observation_panel(const std::string& path, const PanelSchema& schema);
void save_observation_panel(const Panel& panel, const std::string& path, char delimiter = ',');

}  // namespace sparch

#endif  // SPARCH_INGEST_HPP
