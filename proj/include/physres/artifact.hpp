#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "physres/config.hpp"
#include "physres/pipeline.hpp"

namespace physres {

inline constexpr int kArtifactFormatVersion = 1;

// Versioned JSON model artifact with a content checksum. Numbers use
// shortest round-trip encoding, so save/load is numerically exact.
nlohmann::json artifact_to_json(const TrainedModel& model, const RunConfig& cfg);

struct LoadedArtifact {
    TrainedModel model;
    nlohmann::json config_echo;
};

LoadedArtifact artifact_from_json(const nlohmann::json& doc);

void save_artifact(const std::string& path, const TrainedModel& model, const RunConfig& cfg);
LoadedArtifact load_artifact(const std::string& path);

std::string fnv1a64_hex(const std::string& payload);

}  // namespace physres
