#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snrflow/commands.hpp"

using namespace snrflow;

int main(int argc, char** argv) {
    CLI::App app{"snrflow: rectified-flow training lab with pluggable noise-level samplers"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string base_path;
    std::string adapter_path;
    std::vector<std::string> overrides;
    bool export_corpus = false;

    auto add_common = [&](CLI::App* cmd, bool needs_base, bool takes_adapter) {
        cmd->add_option("--config", config_path, "JSON run configuration");
        cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
        cmd->add_option("--set", overrides,
                        "override a config value, e.g. --set train.steps=500");
        if (needs_base)
            cmd->add_option("--base", base_path, "base checkpoint (.snrf)")->required();
        if (takes_adapter)
            cmd->add_option("--adapter", adapter_path, "adapter checkpoint (.snrf)");
    };

    CLI::App* analyze = app.add_subcommand("analyze-sampler",
                                           "emit noise-level density tables and histograms");
    add_common(analyze, false, false);

    CLI::App* pretrain = app.add_subcommand("pretrain", "train a base model on the corpus");
    add_common(pretrain, false, false);
    pretrain->add_flag("--export-corpus", export_corpus, "also write the corpus PNGs + manifest");

    CLI::App* finetune =
        app.add_subcommand("finetune", "LoRA fine-tune on the held-out reference style");
    add_common(finetune, true, false);

    CLI::App* sample = app.add_subcommand("sample", "generate images for one condition");
    add_common(sample, true, true);

    CLI::App* cswitch =
        app.add_subcommand("switch", "condition-switching generation over a fraction grid");
    add_common(cswitch, true, true);

    CLI::App* ablate =
        app.add_subcommand("ablate", "fine-tune + score over a (mu, sigma, rank) grid");
    add_common(ablate, true, false);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_run_config(config_path, overrides);
        if (export_corpus) cfg.export_corpus = true;

        if (analyze->parsed()) cmd_analyze_sampler(cfg, out_dir);
        if (pretrain->parsed()) cmd_pretrain(cfg, out_dir);
        if (finetune->parsed()) cmd_finetune(cfg, base_path, out_dir);
        if (sample->parsed()) cmd_sample(cfg, base_path, adapter_path, out_dir);
        if (cswitch->parsed()) cmd_switch(cfg, base_path, adapter_path, out_dir);
        if (ablate->parsed()) cmd_ablate(cfg, base_path, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
