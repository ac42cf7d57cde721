#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "snrflow/lora.hpp"
#include "snrflow/net.hpp"

namespace snrflow {

// .snrf checkpoint container:
//   bytes 0-3   magic "SNRF"
//   bytes 4-7   format version, u32 little-endian (currently 1)
//   bytes 8-11  JSON header length, u32 little-endian
//   header      UTF-8 JSON: kind, architecture / adapter settings, seed,
//               config echo, and the tensor manifest (name + shape)
//   payload     raw 32-bit little-endian floats, tensors in manifest order,
//               coefficients in column-major order

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// f32 payload of the parameter tensors in canonical order; doubles are
/// rounded to float on the way out.
std::string f32_payload(const DenoiserParams<double>& params);
std::string f32_payload(const LoraAdapter<double>& adapter);

void save_base_checkpoint(const std::filesystem::path& path, const DenoiserParams<double>& params,
                          std::uint64_t seed, const nlohmann::json& config_echo);

struct LoadedBase {
    DenoiserParams<double> params;
    nlohmann::json header;
};
LoadedBase load_base_checkpoint(const std::filesystem::path& path);

void save_adapter_checkpoint(const std::filesystem::path& path, const LoraAdapter<double>& adapter,
                             std::uint64_t seed, const nlohmann::json& config_echo);

struct LoadedAdapter {
    LoraAdapter<double> adapter;
    nlohmann::json header;
};
/// Shapes are validated against the base network's target layers; mismatches
/// report the offending layer by name.
LoadedAdapter load_adapter_checkpoint(const std::filesystem::path& path,
                                      const DenoiserParams<double>& base);

}  // namespace snrflow
