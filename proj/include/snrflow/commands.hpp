#pragma once

#include <filesystem>

#include "snrflow/config.hpp"

namespace snrflow {

// Command implementations behind the CLI. Each is deterministic given its
// configuration; outputs land in out_dir (created if missing).

void cmd_analyze_sampler(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_pretrain(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_finetune(const RunConfig& cfg, const std::filesystem::path& base_path,
                  const std::filesystem::path& out_dir);
void cmd_sample(const RunConfig& cfg, const std::filesystem::path& base_path,
                const std::filesystem::path& adapter_path, const std::filesystem::path& out_dir);
void cmd_switch(const RunConfig& cfg, const std::filesystem::path& base_path,
                const std::filesystem::path& adapter_path, const std::filesystem::path& out_dir);
void cmd_ablate(const RunConfig& cfg, const std::filesystem::path& base_path,
                const std::filesystem::path& out_dir);

}  // namespace snrflow
