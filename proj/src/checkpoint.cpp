#include "snrflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace snrflow {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'N', 'R', 'F'};

void append_f32(std::string& out, const double* data, Eigen::Index n) {
    const std::size_t base = out.size();
    out.resize(base + static_cast<std::size_t>(n) * sizeof(float));
    float* dst = reinterpret_cast<float*>(out.data() + base);
    for (Eigen::Index i = 0; i < n; ++i) dst[i] = static_cast<float>(data[i]);
}

template <typename Views>
std::string payload_of(const Views& views) {
    std::string out;
    for (const auto& v : views) append_f32(out, v.data, v.size());
    return out;
}

template <typename Views>
json tensor_manifest(const Views& views) {
    json tensors = json::array();
    for (const auto& v : views)
        tensors.push_back({{"name", v.name}, {"shape", {v.rows, v.cols}}});
    return tensors;
}

void write_file(const std::filesystem::path& path, const json& header,
                const std::string& payload) {
    const std::string header_str = header.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());
    f.write(kMagic, 4);
    const std::uint32_t version = kCheckpointVersion;
    const std::uint32_t header_len = static_cast<std::uint32_t>(header_str.size());
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&header_len), 4);
    f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

struct RawFile {
    json header;
    std::string payload;
};

RawFile read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic (not an SNRF file): " + path.string());
    std::uint32_t version = 0, header_len = 0;
    std::memcpy(&version, bytes.data() + 4, 4);
    std::memcpy(&header_len, bytes.data() + 8, 4);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version) + " in " + path.string());
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
        throw std::runtime_error("checkpoint: truncated header: " + path.string());
    RawFile raw;
    raw.header = json::parse(bytes.substr(12, header_len));
    raw.payload = bytes.substr(12 + header_len);
    return raw;
}

/// Copies the next tensor out of the payload, converting f32 -> f64.
void read_tensor(const std::string& payload, std::size_t& offset, double* dst, Eigen::Index rows,
                 Eigen::Index cols, const std::string& name) {
    const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (offset + n * sizeof(float) > payload.size())
        throw std::runtime_error("checkpoint: payload too short at tensor '" + name + "'");
    const float* src = reinterpret_cast<const float*>(payload.data() + offset);
    for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<double>(src[i]);
    offset += n * sizeof(float);
}

void check_manifest_entry(const json& entry, const std::string& expected_name,
                          Eigen::Index rows, Eigen::Index cols) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape");
    if (name != expected_name)
        throw std::runtime_error("checkpoint: expected tensor '" + expected_name + "', found '" +
                                 name + "'");
    if (shape.size() != 2 || shape[0].get<Eigen::Index>() != rows ||
        shape[1].get<Eigen::Index>() != cols)
        throw std::runtime_error("checkpoint: shape mismatch for layer '" + expected_name +
                                 "': file has " + shape.dump() + ", expected [" +
                                 std::to_string(rows) + "," + std::to_string(cols) + "]");
}

json arch_to_json(const Architecture& a) {
    return {{"channels", a.image.channels}, {"height", a.image.height},
            {"width", a.image.width},       {"hidden_widths", a.hidden_widths},
            {"time_embed_dim", a.time_embed_dim}, {"n_content", a.n_content},
            {"n_style", a.n_style},         {"cond_embed_dim", a.cond_embed_dim}};
}

Architecture arch_from_json(const json& j) {
    Architecture a;
    a.image.channels = j.at("channels").get<int>();
    a.image.height = j.at("height").get<int>();
    a.image.width = j.at("width").get<int>();
    a.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
    a.time_embed_dim = j.at("time_embed_dim").get<int>();
    a.n_content = j.at("n_content").get<int>();
    a.n_style = j.at("n_style").get<int>();
    a.cond_embed_dim = j.at("cond_embed_dim").get<int>();
    a.validate();
    return a;
}

}  // namespace

std::string f32_payload(const DenoiserParams<double>& params) {
    return payload_of(collect_tensors(params));
}
std::string f32_payload(const LoraAdapter<double>& adapter) {
    return payload_of(collect_tensors(adapter));
}

void save_base_checkpoint(const std::filesystem::path& path, const DenoiserParams<double>& params,
                          std::uint64_t seed, const json& config_echo) {
    const auto views = collect_tensors(params);
    json header = {{"kind", "base"},
                   {"layout", "col_major"},
                   {"arch", arch_to_json(params.arch)},
                   {"seed", seed},
                   {"config", config_echo},
                   {"tensors", tensor_manifest(views)}};
    write_file(path, header, payload_of(views));
}

LoadedBase load_base_checkpoint(const std::filesystem::path& path) {
    RawFile raw = read_file(path);
    if (raw.header.at("kind").get<std::string>() != "base")
        throw std::runtime_error("checkpoint: '" + path.string() + "' is not a base checkpoint");

    LoadedBase loaded;
    loaded.header = raw.header;
    const Architecture arch = arch_from_json(raw.header.at("arch"));

    // Shape the parameter set from the architecture, then fill from payload.
    RandomSource dummy(0);
    loaded.params = init<double>(arch, dummy);
    auto views = collect_tensors(loaded.params);

    const json& manifest = raw.header.at("tensors");
    if (manifest.size() != views.size())
        throw std::runtime_error("checkpoint: tensor count mismatch in " + path.string());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < views.size(); ++i) {
        check_manifest_entry(manifest[i], views[i].name, views[i].rows, views[i].cols);
        read_tensor(raw.payload, offset, views[i].data, views[i].rows, views[i].cols,
                    views[i].name);
    }
    if (offset != raw.payload.size())
        throw std::runtime_error("checkpoint: payload length does not match manifest in " +
                                 path.string());
    return loaded;
}

void save_adapter_checkpoint(const std::filesystem::path& path, const LoraAdapter<double>& adapter,
                             std::uint64_t seed, const json& config_echo) {
    const auto views = collect_tensors(adapter);
    json targets = json::array();
    for (const auto& t : adapter.targets) targets.push_back(t.name);
    json header = {{"kind", "adapter"},
                   {"layout", "col_major"},
                   {"rank", adapter.rank},
                   {"alpha", adapter.alpha},
                   {"targets", targets},
                   {"seed", seed},
                   {"config", config_echo},
                   {"tensors", tensor_manifest(views)}};
    write_file(path, header, payload_of(views));
}

LoadedAdapter load_adapter_checkpoint(const std::filesystem::path& path,
                                      const DenoiserParams<double>& base) {
    RawFile raw = read_file(path);
    if (raw.header.at("kind").get<std::string>() != "adapter")
        throw std::runtime_error("checkpoint: '" + path.string() +
                                 "' is not an adapter checkpoint");

    LoadedAdapter loaded;
    loaded.header = raw.header;
    loaded.adapter.rank = raw.header.at("rank").get<int>();
    loaded.adapter.alpha = raw.header.at("alpha").get<double>();
    for (const auto& name_json : raw.header.at("targets")) {
        const std::string name = name_json.get<std::string>();
        const Linear<double>* layer = find_layer(base, name);
        if (!layer)
            throw std::runtime_error("checkpoint: adapter targets unknown layer '" + name + "'");
        LoraTarget<double> t;
        t.name = name;
        t.A = MatrixXd::Zero(loaded.adapter.rank, layer->weight.cols());
        t.B = MatrixXd::Zero(layer->weight.rows(), loaded.adapter.rank);
        loaded.adapter.targets.push_back(std::move(t));
    }

    auto views = collect_tensors(loaded.adapter);
    const json& manifest = raw.header.at("tensors");
    if (manifest.size() != views.size())
        throw std::runtime_error("checkpoint: tensor count mismatch in " + path.string());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < views.size(); ++i) {
        check_manifest_entry(manifest[i], views[i].name, views[i].rows, views[i].cols);
        read_tensor(raw.payload, offset, views[i].data, views[i].rows, views[i].cols,
                    views[i].name);
    }
    if (offset != raw.payload.size())
        throw std::runtime_error("checkpoint: payload length does not match manifest in " +
                                 path.string());
    return loaded;
}

}  // namespace snrflow
