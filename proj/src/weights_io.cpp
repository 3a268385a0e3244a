#include "specssm/model.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace specssm {

using ordered_json = nlohmann::ordered_json;

namespace {

struct tensor_ref {
    std::string name;
    const tensor * t;
};

std::vector<tensor_ref> enumerate_tensors(const model_weights & w) {
    std::vector<tensor_ref> refs;
    refs.push_back({"embedding", &w.embedding});
    refs.push_back({"norm_final", &w.norm_final});
    for (size_t l = 0; l < w.layers.size(); ++l) {
        const layer_weights & lw = w.layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        refs.push_back({p + "in_proj", &lw.in_proj});
        refs.push_back({p + "conv", &lw.conv});
        refs.push_back({p + "a_log", &lw.a_log});
        refs.push_back({p + "d_skip", &lw.d_skip});
        refs.push_back({p + "out_proj", &lw.out_proj});
        refs.push_back({p + "norm_in", &lw.norm_in});
        refs.push_back({p + "norm_ssm", &lw.norm_ssm});
    }
    return refs;
}

std::vector<std::pair<std::string, tensor *>> enumerate_tensors_mut(model_weights & w) {
    std::vector<std::pair<std::string, tensor *>> refs;
    refs.push_back({"embedding", &w.embedding});
    refs.push_back({"norm_final", &w.norm_final});
    for (size_t l = 0; l < w.layers.size(); ++l) {
        layer_weights & lw = w.layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        refs.push_back({p + "in_proj", &lw.in_proj});
        refs.push_back({p + "conv", &lw.conv});
        refs.push_back({p + "a_log", &lw.a_log});
        refs.push_back({p + "d_skip", &lw.d_skip});
        refs.push_back({p + "out_proj", &lw.out_proj});
        refs.push_back({p + "norm_in", &lw.norm_in});
        refs.push_back({p + "norm_ssm", &lw.norm_ssm});
    }
    return refs;
}

void write_u32_le(std::ostream & os, uint32_t v) {
    unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xFF),
        static_cast<unsigned char>((v >> 8) & 0xFF),
        static_cast<unsigned char>((v >> 16) & 0xFF),
        static_cast<unsigned char>((v >> 24) & 0xFF),
    };
    os.write(reinterpret_cast<const char *>(b), 4);
}

uint32_t read_u32_le(std::istream & is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char *>(b), 4);
    if (!is) throw io_error("weights: truncated header length");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_floats_le(std::ostream & os, const std::vector<float> & data) {
    // float32 payload, little-endian
    static_assert(sizeof(float) == 4);
    for (float f : data) {
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32_le(os, bits);
    }
}

void read_floats_le(std::istream & is, std::vector<float> & data) {
    for (float & f : data) {
        const uint32_t bits = read_u32_le(is);
        std::memcpy(&f, &bits, 4);
    }
}

} // namespace

void save_weights(const model_weights & w, const std::string & path) {
    const auto refs = enumerate_tensors(w);

    ordered_json header;
    header["format"] = "specssm-weights-v1";
    header["config"] = {
        {"n_layers", w.config.n_layers},       {"d_model", w.config.d_model},
        {"n_heads", w.config.n_heads},         {"head_dim", w.config.head_dim},
        {"state_dim", w.config.state_dim},     {"conv_kernel", w.config.conv_kernel},
        {"vocab", w.config.vocab},
        {"readout", w.config.readout == state_readout::previous ? "previous" : "current"},
        {"linear_discretization", w.config.linear_discretization},
        {"embed_seed", w.config.embed_seed},
    };
    ordered_json tensors = ordered_json::array();
    int64_t offset = 0;
    for (const auto & r : refs) {
        tensors.push_back({{"name", r.name}, {"shape", r.t->shape}, {"offset", offset}});
        offset += r.t->numel();
    }
    header["tensors"]        = tensors;
    header["payload_floats"] = offset;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("weights: cannot open " + path + " for writing");
    const std::string hs = header.dump();
    write_u32_le(os, static_cast<uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto & r : refs) write_floats_le(os, r.t->data);
    if (!os) throw io_error("weights: write failed for " + path);
}

model_weights load_weights(const std::string & path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("weights: cannot open " + path);
    const uint32_t hlen = read_u32_le(is);
    std::string hs(hlen, '\0');
    is.read(hs.data(), hlen);
    if (!is) throw io_error("weights: truncated header");

    ordered_json header = ordered_json::parse(hs, nullptr, true);
    if (header.value("format", "") != "specssm-weights-v1") {
        throw io_error("weights: unknown format tag");
    }
    const auto & jc = header.at("config");
    model_config cfg;
    cfg.n_layers    = jc.at("n_layers").get<int64_t>();
    cfg.d_model     = jc.at("d_model").get<int64_t>();
    cfg.n_heads     = jc.at("n_heads").get<int64_t>();
    cfg.head_dim    = jc.at("head_dim").get<int64_t>();
    cfg.state_dim   = jc.at("state_dim").get<int64_t>();
    cfg.conv_kernel = jc.at("conv_kernel").get<int64_t>();
    cfg.vocab       = jc.at("vocab").get<int64_t>();
    cfg.readout     = jc.at("readout").get<std::string>() == "current" ? state_readout::current
                                                                       : state_readout::previous;
    cfg.linear_discretization = jc.at("linear_discretization").get<bool>();
    cfg.embed_seed            = jc.at("embed_seed").get<int64_t>();
    cfg.validate();

    model_weights w;
    w.config = cfg;
    w.layers.resize(static_cast<size_t>(cfg.n_layers));
    auto refs = enumerate_tensors_mut(w);

    const auto & jt = header.at("tensors");
    if (jt.size() != refs.size()) throw io_error("weights: tensor count mismatch");
    for (size_t i = 0; i < refs.size(); ++i) {
        const auto & e = jt.at(i);
        if (e.at("name").get<std::string>() != refs[i].first) {
            throw io_error("weights: unexpected tensor " + e.at("name").get<std::string>());
        }
        *refs[i].second = tensor(e.at("shape").get<std::vector<int64_t>>());
        read_floats_le(is, refs[i].second->data);
    }
    if (!is) throw io_error("weights: truncated payload");
    return w;
}

} // namespace specssm
