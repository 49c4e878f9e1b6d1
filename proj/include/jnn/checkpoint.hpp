#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "jnn/net.hpp"

namespace jnn {

struct CheckpointMeta {
    uint32_t version = 1;
    uint64_t digest = 0;
    uint32_t epoch = 0;
    std::string spec_text;
    std::string rng_state;
};

/// Versioned header plus little-endian 64-bit floats per parameter in
/// shared_parameters order. load(save(model)) reproduces forward outputs
/// bitwise.
void save_checkpoint(const std::filesystem::path& path, const JointModel& model, uint64_t digest,
                     uint32_t epoch, const std::string& rng_state);

/// Validates magic/version, the config digest and the architecture text, then
/// fills the model parameters. Throws IoError without touching the model on
/// any mismatch or truncation.
CheckpointMeta load_checkpoint(const std::filesystem::path& path, JointModel& model,
                               uint64_t expected_digest);

}  // namespace jnn
