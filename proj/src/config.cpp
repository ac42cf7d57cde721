#include "snrflow/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "snrflow/styledata.hpp"

namespace snrflow {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) throw std::invalid_argument("config: '" + ctx + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + ctx);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (j.contains(key)) return j.at(key).get<T>();
    return fallback;
}

}  // namespace

SnrSampler sampler_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const double shift = get_or(j, "shift", 1.0);
    if (kind == "uniform_time") {
        check_keys(j, {"kind", "shift", "name"}, "sampler(uniform_time)");
        return SnrSampler::uniform_time(shift);
    }
    if (kind == "logit_normal") {
        check_keys(j, {"kind", "m", "s", "shift", "name"}, "sampler(logit_normal)");
        return SnrSampler::logit_normal(get_or(j, "m", 0.0), get_or(j, "s", 1.0), shift);
    }
    if (kind == "style_friendly") {
        check_keys(j, {"kind", "mu", "sigma", "shift", "name"}, "sampler(style_friendly)");
        return SnrSampler::style_friendly(get_or(j, "mu", -6.0), get_or(j, "sigma", 2.0), shift);
    }
    if (kind == "edm_log_normal") {
        check_keys(j, {"kind", "p_mean", "p_std", "shift", "name"}, "sampler(edm_log_normal)");
        return SnrSampler::edm_log_normal(get_or(j, "p_mean", -1.2), get_or(j, "p_std", 1.2),
                                          shift);
    }
    throw std::invalid_argument("config: unknown sampler kind '" + kind + "'");
}

namespace {

std::vector<NamedSampler> default_analyze_samplers() {
    return {
        {"style_friendly", SnrSampler::style_friendly(-6.0, 2.0)},
        {"sd3_shift3", SnrSampler::logit_normal(0.0, 1.0, 3.0)},
        {"sd3", SnrSampler::logit_normal(0.0, 1.0)},
        {"edm", SnrSampler::edm_log_normal(-1.2, 1.2)},
        {"uniform", SnrSampler::uniform_time()},
    };
}

CorpusConfig parse_corpus(const json& j) {
    check_keys(j, {"height", "width", "per_pair", "seed", "holdout_style", "ref_content"},
               "corpus");
    CorpusConfig c;
    c.height = get_or(j, "height", c.height);
    c.width = get_or(j, "width", c.width);
    c.per_pair = get_or(j, "per_pair", c.per_pair);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.holdout_style = get_or(j, "holdout_style", c.holdout_style);
    c.ref_content = get_or(j, "ref_content", c.ref_content);
    return c;
}

ArchConfig parse_arch(const json& j) {
    check_keys(j, {"hidden_widths", "time_embed_dim", "cond_embed_dim"}, "arch");
    ArchConfig a;
    a.hidden_widths = get_or(j, "hidden_widths", a.hidden_widths);
    a.time_embed_dim = get_or(j, "time_embed_dim", a.time_embed_dim);
    a.cond_embed_dim = get_or(j, "cond_embed_dim", a.cond_embed_dim);
    return a;
}

void parse_train(const json& j, TrainConfig& t) {
    check_keys(j,
               {"objective", "steps", "lr", "grad_accum", "batch_size", "p_drop", "offset_scale",
                "beta_t", "seed"},
               "train");
    if (j.contains("objective")) {
        const std::string obj = j.at("objective").get<std::string>();
        if (obj == "dm")
            t.objective = Objective::Dm;
        else if (obj == "dco")
            t.objective = Objective::Dco;
        else
            throw std::invalid_argument("config: train.objective must be 'dm' or 'dco'");
    }
    t.steps = get_or(j, "steps", t.steps);
    t.lr = get_or(j, "lr", t.lr);
    t.grad_accum = get_or(j, "grad_accum", t.grad_accum);
    t.batch_size = get_or(j, "batch_size", t.batch_size);
    t.p_drop = get_or(j, "p_drop", t.p_drop);
    t.offset.scale = get_or(j, "offset_scale", t.offset.scale);
    t.beta_t = get_or(j, "beta_t", t.beta_t);
    t.seed = get_or<std::uint64_t>(j, "seed", t.seed);
}

LoraTrainConfig parse_lora(const json& j) {
    check_keys(j, {"targets", "rank", "alpha"}, "lora");
    LoraTrainConfig l;
    l.targets = get_or(j, "targets", l.targets);
    l.rank = get_or(j, "rank", l.rank);
    if (j.contains("alpha"))
        l.alpha = j.at("alpha").get<double>();
    else
        l.alpha = static_cast<double>(l.rank);
    return l;
}

AnalyzeConfig parse_analyze(const json& j) {
    check_keys(j,
               {"samplers", "grid", "lambda_min", "lambda_max", "mc_samples", "hist_bins", "seed"},
               "analyze");
    AnalyzeConfig a;
    if (j.contains("samplers")) {
        for (const auto& s : j.at("samplers")) {
            NamedSampler named;
            named.sampler = sampler_from_json(s);
            named.name = get_or<std::string>(s, "name", s.at("kind").get<std::string>());
            a.samplers.push_back(std::move(named));
        }
    }
    a.grid = get_or(j, "grid", a.grid);
    a.lambda_min = get_or(j, "lambda_min", a.lambda_min);
    a.lambda_max = get_or(j, "lambda_max", a.lambda_max);
    a.mc_samples = get_or(j, "mc_samples", a.mc_samples);
    a.hist_bins = get_or(j, "hist_bins", a.hist_bins);
    a.seed = get_or<std::uint64_t>(j, "seed", a.seed);
    return a;
}

SampleCmdConfig parse_sample(const json& j) {
    check_keys(j, {"steps", "guidance_scale", "shift", "seed", "samples", "content", "style"},
               "generation");
    SampleCmdConfig s;
    s.gen.steps = get_or(j, "steps", s.gen.steps);
    s.gen.guidance_scale = get_or(j, "guidance_scale", s.gen.guidance_scale);
    s.gen.shift = get_or(j, "shift", s.gen.shift);
    s.gen.seed = get_or<std::uint64_t>(j, "seed", s.gen.seed);
    s.samples = get_or(j, "samples", s.samples);
    s.content = get_or(j, "content", s.content);
    s.style = get_or(j, "style", s.style);
    return s;
}

SwitchCmdConfig parse_switch(const json& j) {
    check_keys(j, {"fractions", "content", "early_style", "late_style"}, "switch");
    SwitchCmdConfig s;
    s.fractions = get_or(j, "fractions", s.fractions);
    s.content = get_or(j, "content", s.content);
    s.early_style = get_or(j, "early_style", s.early_style);
    s.late_style = get_or(j, "late_style", s.late_style);
    return s;
}

AblateConfig parse_ablate(const json& j) {
    check_keys(j, {"mu", "sigma", "rank"}, "ablate");
    AblateConfig a;
    a.mu = get_or(j, "mu", a.mu);
    a.sigma = get_or(j, "sigma", a.sigma);
    a.rank = get_or(j, "rank", a.rank);
    return a;
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
    check_keys(doc,
               {"corpus", "arch", "sampler", "train", "lora", "generation", "switch", "analyze",
                "ablate", "export_corpus"},
               "top level");
    RunConfig cfg;
    cfg.raw = doc;
    if (doc.contains("corpus")) cfg.corpus = parse_corpus(doc.at("corpus"));
    if (doc.contains("arch")) cfg.arch = parse_arch(doc.at("arch"));
    if (doc.contains("train")) parse_train(doc.at("train"), cfg.train);
    if (doc.contains("sampler")) cfg.train.sampler = sampler_from_json(doc.at("sampler"));
    if (doc.contains("lora")) cfg.train.lora = parse_lora(doc.at("lora"));
    if (doc.contains("generation")) cfg.sample = parse_sample(doc.at("generation"));
    if (doc.contains("switch")) cfg.condition_switch = parse_switch(doc.at("switch"));
    if (doc.contains("analyze")) cfg.analyze = parse_analyze(doc.at("analyze"));
    if (doc.contains("ablate")) cfg.ablate = parse_ablate(doc.at("ablate"));
    cfg.export_corpus = get_or(doc, "export_corpus", false);
    if (cfg.analyze.samplers.empty()) cfg.analyze.samplers = default_analyze_samplers();
    return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("override must look like section.key=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;  // bare strings are allowed unquoted
    }

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw std::invalid_argument("override has an empty path segment");
        if (dot == std::string::npos) {
            (*node)[key] = parsed;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("config: cannot open " + path.string());
        doc = json::parse(f);
    }
    for (const auto& ov : overrides) apply_override(doc, ov);
    return parse_run_config(doc);
}

Architecture make_architecture(const RunConfig& cfg) {
    Architecture arch;
    arch.image = ImageShape{3, cfg.corpus.height, cfg.corpus.width};
    arch.hidden_widths = cfg.arch.hidden_widths;
    arch.time_embed_dim = cfg.arch.time_embed_dim;
    arch.cond_embed_dim = cfg.arch.cond_embed_dim;
    arch.n_content = static_cast<int>(default_contents().size());
    arch.n_style = static_cast<int>(default_styles().size());
    arch.validate();
    return arch;
}

}  // namespace snrflow
