#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "physres/pipeline.hpp"

namespace physres {

// Resolved run configuration: JSON in, defaults applied, unknown keys
// rejected. The resolved document is echoed verbatim into every output.
struct RunConfig {
    PipelineConfig pipeline;
    int held_out = 5;
    std::vector<double> shift_levels = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0};

    nlohmann::json resolved() const;
};

RunConfig default_config();
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config_file(const std::string& path);

}  // namespace physres
