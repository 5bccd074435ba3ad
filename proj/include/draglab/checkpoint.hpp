#pragma once

#include <draglab/model.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace draglab {

inline constexpr char kCheckpointMagic[4] = {'D', 'L', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Everything needed to rebuild a model and continue training exactly.
struct Checkpoint {
    ModelConfig model;
    /// Training configuration snapshot (free-form JSON).
    nlohmann::json train_config = nlohmann::json::object();
    long long step = 0;
    std::string rng_state;
    std::vector<NamedTensor> parameters;
    long long optimizer_steps = 0;
    std::vector<Tensor> first_moments;
    std::vector<Tensor> second_moments;
};

/// Single-file archive: magic "DLCK", u32 version, u64 header length, JSON
/// header, then raw little-endian tensor payloads in header order.
std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws LoadError for unreadable, malformed or incompatible archives.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies the model's parameters into a checkpoint (no optimizer state).
Checkpoint snapshot_model(const DragModel& model);
/// Overwrites model parameters by name; any missing or misshapen tensor is a LoadError.
void restore_parameters(DragModel& model, const Checkpoint& checkpoint);
std::unique_ptr<DragModel> model_from_checkpoint(const Checkpoint& checkpoint);

/// Hex FNV-1a hash of the canonical JSON dump.
std::string config_hash(const nlohmann::json& config);

}  // namespace draglab
