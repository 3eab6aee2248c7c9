#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcgan/losses.hpp"
#include "fcgan/parameters.hpp"

namespace fcgan {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepRecord {
    std::uint64_t step = 0;   // 1-based
    std::uint64_t epoch = 0;  // 1-based
    losses::LossBreakdown losses;
};

/// Everything needed to continue a run bit-identically.
struct CheckpointData {
    std::string config_json;
    std::uint64_t step = 0;
    std::string rng_state;
    std::map<std::string, std::uint64_t> counters;
    std::map<std::string, ParameterSet> groups;
    std::vector<StepRecord> history;
};

enum class TensorPrecision : std::uint8_t { f32 = 0, f64 = 1 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: "FCGANCKP", u32 version, u64 payload size, payload, u32 CRC-32
/// of the payload. Integers little-endian. Written via a temporary file and
/// renamed into place.
void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data,
                      TensorPrecision precision = TensorPrecision::f64);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace fcgan
