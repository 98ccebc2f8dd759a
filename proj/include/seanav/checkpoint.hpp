#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace seanav::checkpoint {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape table + 64-bit weights in a small binary container, with a JSON
// sidecar (<path>.json) carrying config, config hash, step and ablation.
struct Checkpoint {
    std::vector<std::vector<int>> shapes;
    std::vector<double> params;
    nlohmann::json meta;
};

void save(const std::string& path, const Checkpoint& ck);
Checkpoint load(const std::string& path);

}  // namespace seanav::checkpoint
