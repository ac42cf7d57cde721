#include "snrflow/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "snrflow/checkpoint.hpp"
#include "snrflow/csv.hpp"
#include "snrflow/png_io.hpp"
#include "snrflow/stats.hpp"
#include "snrflow/styledata.hpp"

namespace snrflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string pad3(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", i);
    return buf;
}

StyleCorpus build_corpus(const RunConfig& cfg) {
    const auto contents = default_contents();
    const auto styles = default_styles();
    if (cfg.corpus.holdout_style < 0 ||
        cfg.corpus.holdout_style >= static_cast<int>(styles.size()))
        throw std::invalid_argument("corpus.holdout_style outside the shipped style set");
    return gen_corpus(contents, styles, ImageShape{3, cfg.corpus.height, cfg.corpus.width},
                      cfg.corpus.per_pair, cfg.corpus.seed);
}

std::vector<DataPoint> pretrain_items(const StyleCorpus& corpus, int holdout_style) {
    std::vector<DataPoint> items;
    for (const auto& dp : corpus.items)
        if (dp.style_id != holdout_style) items.push_back(dp);
    return items;
}

std::vector<DataPoint> reference_items(const StyleCorpus& corpus, int holdout_style,
                                       int ref_content) {
    std::vector<DataPoint> items;
    for (const auto& dp : corpus.items)
        if (dp.style_id == holdout_style &&
            (ref_content < 0 || dp.content_id == ref_content))
            items.push_back(dp);
    return items;
}

void write_loss_trace(const fs::path& path, const std::vector<double>& trace) {
    CsvWriter csv(path, {"step", "loss"});
    for (std::size_t i = 0; i < trace.size(); ++i)
        csv.row({std::to_string(i), csv_num(trace[i])});
}

void check_arch_match(const DenoiserParams<double>& base, const RunConfig& cfg) {
    const ImageShape expected{3, cfg.corpus.height, cfg.corpus.width};
    if (!(base.arch.image == expected))
        throw std::runtime_error(
            "checkpoint image shape does not match the configured corpus dimensions");
}

VectorXd clamp_image(VectorXd img) {
    return img.cwiseMax(-1.0).cwiseMin(1.0);
}

/// One image per (cond, sample-index) cell; the per-sample noise stream
/// depends only on (seed, index), so paired experiments reuse noise.
std::vector<VectorXd> generate_batch(const DenoiserParams<double>& params,
                                     const LoraAdapter<double>* adapter,
                                     const std::vector<Condition>& conds,
                                     const GenerationConfig& gen) {
    RandomSource base(gen.seed);
    std::vector<VectorXd> out;
    out.reserve(conds.size());
    for (std::size_t i = 0; i < conds.size(); ++i) {
        RandomSource rng = base.stream(i);
        out.push_back(clamp_image(euler_sample(params, adapter, conds[i], gen, rng)));
    }
    return out;
}

json gen_echo(const GenerationConfig& gen) {
    return {{"steps", gen.steps},
            {"guidance_scale", gen.guidance_scale},
            {"shift", gen.shift},
            {"seed", gen.seed}};
}

void write_sidecar(const fs::path& path, const json& doc) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write sidecar " + path.string());
    f << doc.dump(2) << '\n';
}

json style_to_json(const StyleSpec& s) {
    return {{"style_id", s.style_id},
            {"background", {s.background[0], s.background[1], s.background[2]}},
            {"palette", {s.palette[0], s.palette[1], s.palette[2]}},
            {"gradient_dir", {s.gradient_dir[0], s.gradient_dir[1]}},
            {"gradient_amplitude", s.gradient_amplitude},
            {"stroke_thickness", s.stroke_thickness}};
}

json content_to_json(const ContentSpec& c) {
    return {{"content_id", c.content_id},
            {"shape", shape_name(c.shape)},
            {"base_radius", c.base_radius},
            {"center_jitter", c.center_jitter},
            {"size_jitter", c.size_jitter}};
}

void export_corpus_dir(const StyleCorpus& corpus, const RunConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    json manifest = {{"seed", corpus.seed},
                     {"image", {{"channels", corpus.image.channels},
                                {"height", corpus.image.height},
                                {"width", corpus.image.width}}},
                     {"n_content", corpus.n_content},
                     {"n_style", corpus.n_style},
                     {"per_pair", cfg.corpus.per_pair},
                     {"contents", json::array()},
                     {"styles", json::array()},
                     {"items", json::array()}};
    for (const auto& c : default_contents()) manifest["contents"].push_back(content_to_json(c));
    for (const auto& s : default_styles()) manifest["styles"].push_back(style_to_json(s));

    std::map<std::pair<int, int>, int> counters;
    for (const auto& dp : corpus.items) {
        const int k = counters[{dp.content_id, dp.style_id}]++;
        const std::string name = "c" + std::to_string(dp.content_id) + "_s" +
                                 std::to_string(dp.style_id) + "_" + pad3(k) + ".png";
        write_png_rgb8(dir / name, dp.x0, corpus.image);
        manifest["items"].push_back(
            {{"file", name}, {"content", dp.content_id}, {"style", dp.style_id}});
    }
    write_sidecar(dir / "manifest.json", manifest);
}

}  // namespace

void cmd_analyze_sampler(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const AnalyzeConfig& a = cfg.analyze;

    CsvWriter summary(out_dir / "summary.csv",
                      {"sampler", "ks_lambda", "mass_t_0.8_1.0", "lambda_integral",
                       "time_integral", "mc_samples"});

    for (const auto& named : a.samplers) {
        const SnrSampler& s = named.sampler;

        const DensityTable lt = lambda_density_table(s, a.grid, a.lambda_min, a.lambda_max);
        CsvWriter lcsv(out_dir / (named.name + "_density_lambda.csv"), {"x", "p"});
        for (std::size_t i = 0; i < lt.x.size(); ++i)
            lcsv.row({csv_num(lt.x[i]), csv_num(lt.p[i])});

        const DensityTable tt = time_density_table(s, a.grid);
        CsvWriter tcsv(out_dir / (named.name + "_density_time.csv"), {"x", "p"});
        for (std::size_t i = 0; i < tt.x.size(); ++i)
            tcsv.row({csv_num(tt.x[i]), csv_num(tt.p[i])});

        RandomSource rng = RandomSource(a.seed).stream(std::hash<std::string>{}(named.name));
        std::vector<double> lambdas;
        lambdas.reserve(static_cast<std::size_t>(a.mc_samples));
        int in_band = 0;
        for (int i = 0; i < a.mc_samples; ++i) {
            const SnrDraw d = sample_one(s, rng);
            lambdas.push_back(d.log_snr);
            if (d.t >= 0.8 && d.t <= 1.0) ++in_band;
        }

        // Equal-width histogram with open-ended edge bins for cross-checking
        // the closed-form density.
        const double lo = a.lambda_min, hi = a.lambda_max;
        const double bin_w = (hi - lo) / a.hist_bins;
        std::vector<long> counts(static_cast<std::size_t>(a.hist_bins), 0);
        for (double l : lambdas) {
            int b = static_cast<int>(std::floor((l - lo) / bin_w));
            b = std::max(0, std::min(a.hist_bins - 1, b));
            ++counts[static_cast<std::size_t>(b)];
        }
        CsvWriter hist(out_dir / (named.name + "_hist_lambda.csv"),
                       {"bin_lo", "bin_hi", "count", "expected"});
        for (int b = 0; b < a.hist_bins; ++b) {
            const double blo = lo + b * bin_w, bhi = lo + (b + 1) * bin_w;
            const double p_lo = b == 0 ? 0.0 : cdf_lambda(s, blo);
            const double p_hi = b == a.hist_bins - 1 ? 1.0 : cdf_lambda(s, bhi);
            hist.row({csv_num(blo), csv_num(bhi), std::to_string(counts[b]),
                      csv_num(a.mc_samples * (p_hi - p_lo))});
        }

        const double ks = ks_statistic(lambdas, [&s](double x) { return cdf_lambda(s, x); });
        double li = 0.0, ti = 0.0;
        for (double p : lt.p) li += p * lt.cell_width;
        for (double p : tt.p) ti += p * tt.cell_width;

        summary.row({named.name, csv_num(ks),
                     csv_num(static_cast<double>(in_band) / a.mc_samples), csv_num(li),
                     csv_num(ti), std::to_string(a.mc_samples)});
    }
}

void cmd_pretrain(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const StyleCorpus corpus = build_corpus(cfg);
    const auto items = pretrain_items(corpus, cfg.corpus.holdout_style);
    const Architecture arch = make_architecture(cfg);

    TrainConfig tc = cfg.train;
    tc.lora.reset();  // pretraining updates every parameter

    std::vector<double> trace;
    try {
        PretrainResult<double> result = pretrain<double>(items, arch, tc);
        trace = result.loss_trace;
        write_loss_trace(out_dir / "pretrain_loss.csv", trace);
        save_base_checkpoint(out_dir / "base.snrf", result.params, tc.seed, cfg.raw);
    } catch (const TrainingDiverged& e) {
        write_loss_trace(out_dir / "pretrain_loss.csv", e.loss_trace);
        throw std::runtime_error(std::string(e.what()) + " (trace written)");
    }
    if (cfg.export_corpus) export_corpus_dir(corpus, cfg, out_dir / "corpus");
}

void cmd_finetune(const RunConfig& cfg, const fs::path& base_path, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    LoadedBase base = load_base_checkpoint(base_path);
    check_arch_match(base.params, cfg);

    const StyleCorpus corpus = build_corpus(cfg);
    const auto refs =
        reference_items(corpus, cfg.corpus.holdout_style, cfg.corpus.ref_content);

    TrainConfig tc = cfg.train;
    if (!tc.lora) tc.lora = LoraTrainConfig{};

    try {
        FinetuneResult<double> result = finetune<double>(base.params, refs, tc);
        write_loss_trace(out_dir / "finetune_loss.csv", result.loss_trace);
        save_adapter_checkpoint(out_dir / "adapter.snrf", result.adapter, tc.seed, cfg.raw);
    } catch (const TrainingDiverged& e) {
        write_loss_trace(out_dir / "finetune_loss.csv", e.loss_trace);
        throw std::runtime_error(std::string(e.what()) + " (trace written)");
    }
}

void cmd_sample(const RunConfig& cfg, const fs::path& base_path, const fs::path& adapter_path,
                const fs::path& out_dir) {
    fs::create_directories(out_dir);
    LoadedBase base = load_base_checkpoint(base_path);
    check_arch_match(base.params, cfg);

    LoraAdapter<double> adapter;
    const bool with_adapter = !adapter_path.empty();
    if (with_adapter) adapter = load_adapter_checkpoint(adapter_path, base.params).adapter;

    const SampleCmdConfig& sc = cfg.sample;
    const Condition cond{sc.content, sc.style};
    std::vector<Condition> conds(static_cast<std::size_t>(sc.samples), cond);
    const auto images =
        generate_batch(base.params, with_adapter ? &adapter : nullptr, conds, sc.gen);

    const ImageShape shape = base.params.arch.image;
    RandomSource seed_probe(sc.gen.seed);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string stem = "sample_" + pad3(static_cast<int>(i));
        write_png_rgb8(out_dir / (stem + ".png"), images[i], shape);
        write_sidecar(out_dir / (stem + ".json"),
                      {{"generation", gen_echo(sc.gen)},
                       {"sample_index", i},
                       {"stream_seed", seed_probe.stream(i).seed()},
                       {"content", sc.content},
                       {"style", sc.style},
                       {"adapter", with_adapter},
                       {"config", cfg.raw}});
    }

    const auto styles = default_styles();
    const auto contents = default_contents();
    double ss = std::numeric_limits<double>::quiet_NaN();
    double cs = std::numeric_limits<double>::quiet_NaN();
    if (sc.style >= 0 && sc.style < static_cast<int>(styles.size()))
        ss = style_score(images, styles[static_cast<std::size_t>(sc.style)], shape);
    if (sc.content >= 0 && sc.content < static_cast<int>(contents.size()))
        cs = content_score(images, contents[static_cast<std::size_t>(sc.content)], shape);

    CsvWriter metrics(out_dir / "metrics.csv",
                      {"content", "style", "samples", "style_score", "content_score"});
    metrics.row({std::to_string(sc.content), std::to_string(sc.style),
                 std::to_string(sc.samples), csv_num(ss), csv_num(cs)});
}

void cmd_switch(const RunConfig& cfg, const fs::path& base_path, const fs::path& adapter_path,
                const fs::path& out_dir) {
    fs::create_directories(out_dir);
    LoadedBase base = load_base_checkpoint(base_path);
    check_arch_match(base.params, cfg);

    LoraAdapter<double> adapter;
    const bool with_adapter = !adapter_path.empty();
    if (with_adapter) adapter = load_adapter_checkpoint(adapter_path, base.params).adapter;
    const LoraAdapter<double>* adapter_ptr = with_adapter ? &adapter : nullptr;

    const SwitchCmdConfig& sw = cfg.condition_switch;
    const SampleCmdConfig& sc = cfg.sample;
    const ImageShape shape = base.params.arch.image;
    const auto styles = default_styles();
    const auto contents = default_contents();

    CsvWriter metrics(out_dir / "metrics.csv",
                      {"f", "content", "early_style", "late_style", "samples", "style_score",
                       "content_score"});

    for (double f : sw.fractions) {
        SwitchPlan plan;
        plan.cond_early = Condition{sw.content, sw.early_style};
        plan.cond_late = Condition{sw.content, sw.late_style};
        plan.switch_fraction = f;

        // Per-sample noise streams are shared across fractions so rows are
        // directly comparable.
        RandomSource seed_base(sc.gen.seed);
        std::vector<VectorXd> images;
        images.reserve(static_cast<std::size_t>(sc.samples));
        char fbuf[32];
        std::snprintf(fbuf, sizeof(fbuf), "%g", f);
        for (int i = 0; i < sc.samples; ++i) {
            RandomSource rng = seed_base.stream(static_cast<std::uint64_t>(i));
            images.push_back(
                clamp_image(switched_sample(base.params, adapter_ptr, plan, sc.gen, rng)));
            const std::string stem = std::string("switch_f") + fbuf + "_" + pad3(i);
            write_png_rgb8(out_dir / (stem + ".png"), images.back(), shape);
            write_sidecar(out_dir / (stem + ".json"),
                          {{"generation", gen_echo(sc.gen)},
                           {"sample_index", i},
                           {"stream_seed", seed_base.stream(i).seed()},
                           {"f", f},
                           {"content", sw.content},
                           {"early_style", sw.early_style},
                           {"late_style", sw.late_style},
                           {"adapter", with_adapter}});
        }

        double ss = std::numeric_limits<double>::quiet_NaN();
        double cs = std::numeric_limits<double>::quiet_NaN();
        if (sw.late_style >= 0 && sw.late_style < static_cast<int>(styles.size()))
            ss = style_score(images, styles[static_cast<std::size_t>(sw.late_style)], shape);
        if (sw.content >= 0 && sw.content < static_cast<int>(contents.size()))
            cs = content_score(images, contents[static_cast<std::size_t>(sw.content)], shape);
        metrics.row({csv_num(f), std::to_string(sw.content), std::to_string(sw.early_style),
                     std::to_string(sw.late_style), std::to_string(sc.samples), csv_num(ss),
                     csv_num(cs)});
    }
}

void cmd_ablate(const RunConfig& cfg, const fs::path& base_path, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    LoadedBase base = load_base_checkpoint(base_path);
    check_arch_match(base.params, cfg);

    const StyleCorpus corpus = build_corpus(cfg);
    const auto refs =
        reference_items(corpus, cfg.corpus.holdout_style, cfg.corpus.ref_content);
    const auto styles = default_styles();
    const auto contents = default_contents();
    const StyleSpec& ref_style = styles[static_cast<std::size_t>(cfg.corpus.holdout_style)];
    const ImageShape shape = base.params.arch.image;

    CsvWriter csv(out_dir / "ablation.csv",
                  {"mu", "sigma", "rank", "train_seed", "gen_seed", "style_score",
                   "content_score", "wall_ms"});

    for (double mu : cfg.ablate.mu) {
        for (double sigma : cfg.ablate.sigma) {
            for (int rank : cfg.ablate.rank) {
                const auto t0 = std::chrono::steady_clock::now();

                TrainConfig tc = cfg.train;
                tc.sampler = SnrSampler::style_friendly(mu, sigma);
                LoraTrainConfig lora = cfg.train.lora.value_or(LoraTrainConfig{});
                lora.rank = rank;
                lora.alpha = static_cast<double>(rank);
                tc.lora = lora;

                FinetuneResult<double> ft = finetune<double>(base.params, refs, tc);

                std::vector<Condition> conds;
                conds.reserve(static_cast<std::size_t>(cfg.sample.samples));
                for (int i = 0; i < cfg.sample.samples; ++i)
                    conds.push_back(Condition{i % static_cast<int>(contents.size()),
                                              cfg.corpus.holdout_style});
                const auto images =
                    generate_batch(base.params, &ft.adapter, conds, cfg.sample.gen);

                const double ss = style_score(images, ref_style, shape);
                double cs = 0.0;
                int cs_groups = 0;
                for (std::size_t ci = 0; ci < contents.size(); ++ci) {
                    std::vector<VectorXd> group;
                    for (std::size_t i = 0; i < images.size(); ++i)
                        if (conds[i].content == static_cast<int>(ci)) group.push_back(images[i]);
                    if (!group.empty()) {
                        cs += content_score(group, contents[ci], shape);
                        ++cs_groups;
                    }
                }
                if (cs_groups > 0) cs /= cs_groups;

                const auto t1 = std::chrono::steady_clock::now();
                const long wall_ms =
                    std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
                csv.row({csv_num(mu), csv_num(sigma), std::to_string(rank),
                         std::to_string(tc.seed), std::to_string(cfg.sample.gen.seed),
                         csv_num(ss), csv_num(cs), std::to_string(wall_ms)});
            }
        }
    }
}

}  // namespace snrflow
