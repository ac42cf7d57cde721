#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "snrflow/generate.hpp"
#include "snrflow/net.hpp"
#include "snrflow/sampler.hpp"
#include "snrflow/train.hpp"

namespace snrflow {

// JSON run configuration. Every section is optional and falls back to the
// documented defaults; unknown keys are rejected. CLI overrides are applied
// as dotted-path assignments into the JSON document before parsing.

struct CorpusConfig {
    int height = 16;
    int width = 16;
    int per_pair = 8;
    std::uint64_t seed = 7;
    int holdout_style = 3;   // style excluded from pretraining, used as reference
    int ref_content = -1;    // restrict fine-tuning references to one content; -1 = all
};

struct ArchConfig {
    std::vector<int> hidden_widths{256, 256};
    int time_embed_dim = 32;
    int cond_embed_dim = 16;
};

struct NamedSampler {
    std::string name;
    SnrSampler sampler;
};

struct AnalyzeConfig {
    std::vector<NamedSampler> samplers;  // defaults to the standard comparison set
    int grid = 512;
    double lambda_min = -15.0;
    double lambda_max = 10.0;
    int mc_samples = 1000000;
    int hist_bins = 64;
    std::uint64_t seed = 3;
};

struct SampleCmdConfig {
    GenerationConfig gen;
    int samples = 16;
    int content = 0;        // -1 = null token
    int style = 0;          // -1 = null token
};

struct SwitchCmdConfig {
    std::vector<double> fractions{0.0, 0.1, 1.0};
    int content = 0;
    int early_style = kNullId;  // style used for the first ceil(f*steps) steps
    int late_style = 1;
};

struct AblateConfig {
    std::vector<double> mu{0.0, -2.0, -4.0, -6.0, -8.0};
    std::vector<double> sigma{1.0, 2.0, 3.0};
    std::vector<int> rank{4, 32};
};

struct RunConfig {
    CorpusConfig corpus;
    ArchConfig arch;
    TrainConfig train;          // sampler and lora sections are folded in
    SampleCmdConfig sample;
    SwitchCmdConfig condition_switch;
    AnalyzeConfig analyze;
    AblateConfig ablate;
    bool export_corpus = false;
    nlohmann::json raw;         // full document echoed into outputs
};

SnrSampler sampler_from_json(const nlohmann::json& j);

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

/// Applies "section.key=json-literal" assignments to a JSON document.
void apply_override(nlohmann::json& doc, const std::string& assignment);

Architecture make_architecture(const RunConfig& cfg);

}  // namespace snrflow
