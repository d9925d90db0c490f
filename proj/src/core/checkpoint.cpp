#include "checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace pgs {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

constexpr char kModelMagic[8] = {'P', 'G', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr char kStateMagic[8] = {'P', 'G', 'S', 'S', 'T', 'A', 'T', '1'};

void write_u32(std::ofstream& f, std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
    std::uint32_t v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), sizeof v))
        throw IoError("checkpoint " + path + ": truncated header");
    return v;
}

void write_string(std::ofstream& f, const std::string& s) {
    write_u32(f, static_cast<std::uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& f, const std::string& path) {
    const std::uint32_t n = read_u32(f, path);
    std::string s(n, '\0');
    if (!f.read(s.data(), n)) throw IoError("checkpoint " + path + ": truncated string");
    return s;
}

template <typename T>
void write_array(std::ofstream& f, const std::vector<T>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_array(std::ifstream& f, std::vector<T>& v, const std::string& path) {
    if (!f.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(T))))
        throw IoError("checkpoint " + path + ": truncated payload");
}

std::string pdin_init_name(PdinInit init) {
    switch (init) {
        case PdinInit::Constant: return "constant";
        case PdinInit::Normal: return "normal";
        case PdinInit::Uniform: return "uniform";
    }
    return "constant";
}

PdinInit pdin_init_from(const std::string& s) {
    if (s == "constant") return PdinInit::Constant;
    if (s == "normal") return PdinInit::Normal;
    if (s == "uniform") return PdinInit::Uniform;
    throw ConfigError("unknown pdin init mode '" + s + "'");
}

}  // namespace

std::string pgnet_config_json(const PgnetConfig& cfg) {
    nlohmann::json j;
    j["bands"] = cfg.bands;
    j["endmembers"] = cfg.endmembers;
    j["sab_count"] = cfg.sab_count;
    j["pan_mid_channels"] = cfg.pan_mid_channels;
    j["decoder_mid_channels"] = cfg.decoder_mid_channels;
    j["ratio"] = cfg.ratio;
    j["stage_factors"] = cfg.stage_factors;
    j["leaky_slope"] = cfg.leaky_slope;
    j["seed"] = cfg.seed;
    j["pdin_init"] = pdin_init_name(cfg.pdin_init);
    j["ablation"] = {{"use_q", cfg.ablation.use_q},
                     {"use_pan_weights", cfg.ablation.use_pan_weights},
                     {"use_bias", cfg.ablation.use_bias},
                     {"use_residual", cfg.ablation.use_residual}};
    return j.dump();
}

PgnetConfig pgnet_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
    }
    PgnetConfig cfg;
    try {
        cfg.bands = j.at("bands").get<int>();
        cfg.endmembers = j.at("endmembers").get<int>();
        cfg.sab_count = j.at("sab_count").get<int>();
        cfg.pan_mid_channels = j.at("pan_mid_channels").get<int>();
        cfg.decoder_mid_channels = j.at("decoder_mid_channels").get<int>();
        cfg.ratio = j.at("ratio").get<int>();
        cfg.stage_factors = j.at("stage_factors").get<std::vector<int>>();
        cfg.leaky_slope = j.at("leaky_slope").get<float>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.pdin_init = pdin_init_from(j.at("pdin_init").get<std::string>());
        const auto& a = j.at("ablation");
        cfg.ablation.use_q = a.at("use_q").get<bool>();
        cfg.ablation.use_pan_weights = a.at("use_pan_weights").get<bool>();
        cfg.ablation.use_bias = a.at("use_bias").get<bool>();
        cfg.ablation.use_residual = a.at("use_residual").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config is missing fields: ") + e.what());
    }
    return cfg;
}

void save_model(const std::string& path, Pgnet& net) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(kModelMagic, sizeof kModelMagic);
    write_string(f, pgnet_config_json(net.config()));

    auto params = net.parameters();
    auto bufs = net.buffers();
    write_u32(f, static_cast<std::uint32_t>(params.size() + bufs.size()));
    for (auto* p : params) {
        write_string(f, p->name());
        const Shape& s = p->value.shape;
        write_u32(f, static_cast<std::uint32_t>(s.nd));
        for (int i = 0; i < s.nd; ++i) write_u32(f, static_cast<std::uint32_t>(s[i]));
        write_array(f, *p->value.data);
    }
    for (auto& b : bufs) {
        write_string(f, b.name);
        write_u32(f, 1);
        write_u32(f, static_cast<std::uint32_t>(b.data->size()));
        write_array(f, *b.data);
    }
    if (!f) throw IoError("failed writing checkpoint " + path);
}

Pgnet load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    char magic[8];
    if (!f.read(magic, sizeof magic) || std::memcmp(magic, kModelMagic, sizeof magic) != 0)
        throw IoError("checkpoint " + path + ": bad magic");

    Pgnet net(pgnet_config_from_json(read_string(f, path)));

    std::map<std::string, ParameterT<float>*> params;
    for (auto* p : net.parameters()) params[p->name()] = p;
    std::map<std::string, std::vector<float>*> bufs;
    for (auto& b : net.buffers()) bufs[b.name] = b.data;

    const std::uint32_t count = read_u32(f, path);
    if (count != params.size() + bufs.size())
        throw IoError("checkpoint " + path + ": expected " +
                      std::to_string(params.size() + bufs.size()) + " blobs, found " +
                      std::to_string(count));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = read_string(f, path);
        const std::uint32_t nd = read_u32(f, path);
        if (nd > 4) throw IoError("checkpoint " + path + ": blob " + name + " has rank " +
                                  std::to_string(nd));
        std::size_t numel = 1;
        Shape s;
        s.nd = static_cast<int>(nd);
        for (std::uint32_t d = 0; d < nd; ++d) {
            s.d[d] = static_cast<int>(read_u32(f, path));
            numel *= static_cast<std::size_t>(s.d[d]);
        }
        if (auto it = params.find(name); it != params.end()) {
            if (it->second->value.shape != s)
                throw IoError("checkpoint " + path + ": parameter " + name + " has shape " +
                              s.str() + ", model expects " + it->second->value.shape.str());
            read_array(f, *it->second->value.data, path);
        } else if (auto bit = bufs.find(name); bit != bufs.end()) {
            if (bit->second->size() != numel)
                throw IoError("checkpoint " + path + ": buffer " + name + " has " +
                              std::to_string(numel) + " values, model expects " +
                              std::to_string(bit->second->size()));
            read_array(f, *bit->second, path);
        } else {
            throw IoError("checkpoint " + path + ": unknown blob " + name);
        }
    }
    return net;
}

void save_train_state(const std::string& path, const TrainState& st,
                      const std::vector<std::string>& param_names) {
    require(st.m.size() == param_names.size() && st.v.size() == param_names.size(),
            "train state: moment count does not match parameter count");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(kStateMagic, sizeof kStateMagic);
    nlohmann::json j;
    j["schema"] = 1;
    j["next_epoch"] = st.next_epoch;
    j["best_psnr"] = st.best_psnr;
    j["rng_state"] = st.rng_state;
    j["adam_steps"] = st.adam_steps;
    write_string(f, j.dump());
    write_u32(f, static_cast<std::uint32_t>(param_names.size()));
    for (std::size_t i = 0; i < param_names.size(); ++i) {
        write_string(f, param_names[i]);
        write_u32(f, static_cast<std::uint32_t>(st.m[i].size()));
        write_array(f, st.m[i]);
        write_array(f, st.v[i]);
    }
    if (!f) throw IoError("failed writing train state " + path);
}

TrainState load_train_state(const std::string& path, const std::vector<std::string>& param_names) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open train state " + path);
    char magic[8];
    if (!f.read(magic, sizeof magic) || std::memcmp(magic, kStateMagic, sizeof magic) != 0)
        throw IoError("train state " + path + ": bad magic");

    TrainState st;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_string(f, path));
        st.next_epoch = j.at("next_epoch").get<int>();
        st.best_psnr = j.at("best_psnr").get<double>();
        st.rng_state = j.at("rng_state").get<std::string>();
        st.adam_steps = j.at("adam_steps").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("train state " + path + ": bad header: " + e.what());
    }

    const std::uint32_t count = read_u32(f, path);
    if (count != param_names.size())
        throw IoError("train state " + path + ": expected " + std::to_string(param_names.size()) +
                      " parameter entries, found " + std::to_string(count));
    st.m.resize(count);
    st.v.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = read_string(f, path);
        if (name != param_names[i])
            throw IoError("train state " + path + ": entry " + std::to_string(i) + " is " + name +
                          ", model expects " + param_names[i]);
        const std::uint32_t n = read_u32(f, path);
        st.m[i].resize(n);
        st.v[i].resize(n);
        read_array(f, st.m[i], path);
        read_array(f, st.v[i], path);
    }
    return st;
}

}  // namespace pgs
