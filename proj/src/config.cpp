#include "specssm/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace specssm {

using ordered_json = nlohmann::ordered_json;

run_config default_run_config() {
    run_config cfg;
    cfg.target_model = model_config{};            // 2 layers, d_model 16, h=2 p=4 n=8
    cfg.draft_model  = model_config{};
    cfg.draft_model.n_layers = 1;
    cfg.target_model.embed_seed = 7;
    cfg.draft_model.embed_seed  = 7;

    cfg.decode.prediction_length = 16;
    cfg.decode.topology          = default_tree_profile(16);
    cfg.decode.max_new_tokens    = 32;

    cfg.ablation.cost = cfg.cost;
    cfg.ablation.workload.tree_nodes    = 16;
    cfg.ablation.workload.target_layers = 64;
    cfg.ablation.workload.draft_layers  = 24;
    cfg.ablation.workload.state_bytes_target =
        transfer_workload::state_bytes_for(80, 64, 128, 2);
    cfg.ablation.workload.state_bytes_draft =
        transfer_workload::state_bytes_for(24, 64, 128, 2);
    cfg.ablation.workload.weight_bytes_target_pass = 4 * 8 * 64;
    cfg.ablation.workload.weight_bytes_draft_pass  = 4 * 8 * 16;
    return cfg;
}

namespace {

void check_known_keys(const ordered_json & j, const std::set<std::string> & known,
                      const std::string & where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            throw config_error("config: unknown key '" + where + it.key() + "'");
        }
    }
}

model_config parse_model_section(const ordered_json & j, const std::string & where,
                                 uint64_t & weight_seed) {
    check_known_keys(j, {"n_layers", "d_model", "n_heads", "head_dim", "state_dim",
                         "conv_kernel", "vocab", "seed", "embed_seed"},
                     where);
    model_config m;
    m.n_layers    = j.value("n_layers", m.n_layers);
    m.d_model     = j.value("d_model", m.d_model);
    m.n_heads     = j.value("n_heads", m.n_heads);
    m.head_dim    = j.value("head_dim", m.head_dim);
    m.state_dim   = j.value("state_dim", m.state_dim);
    m.conv_kernel = j.value("conv_kernel", m.conv_kernel);
    m.vocab       = j.value("vocab", m.vocab);
    m.embed_seed  = j.value("embed_seed", m.embed_seed);
    weight_seed   = j.value("seed", weight_seed);
    return m;
}

ordered_json parse_or_throw(const std::string & text) {
    try {
        return ordered_json::parse(text);
    } catch (const ordered_json::parse_error & e) {
        throw config_error(std::string("config: ") + e.what());
    }
}

// dotted-path override; the value is parsed as JSON when possible, else kept
// as a string
void apply_override(ordered_json & j, const std::string & kv) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
        throw config_error("config: override '" + kv + "' is not key=value");
    }
    const std::string path = kv.substr(0, eq);
    const std::string raw  = kv.substr(eq + 1);
    ordered_json value;
    try {
        value = ordered_json::parse(raw);
    } catch (const ordered_json::parse_error &) {
        value = raw;
    }
    ordered_json * cur = &j;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw config_error("config: empty override path");
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        cur = &((*cur)[parts[i]]);
    }
    (*cur)[parts.back()] = value;
}

} // namespace

run_config parse_run_config(const std::string & json_text,
                            const std::vector<std::string> & overrides) {
    ordered_json j = parse_or_throw(json_text);
    for (const auto & ov : overrides) apply_override(j, ov);

    check_known_keys(j, {"seed", "model", "decode", "cost", "output"}, "");
    run_config cfg = default_run_config();
    cfg.seed = j.value("seed", cfg.seed);

    try {
        if (j.contains("model")) {
            const auto & jm = j.at("model");
            check_known_keys(jm, {"target", "draft", "eq2_state_convention",
                                  "linear_discretization"},
                             "model.");
            if (jm.contains("target")) {
                cfg.target_model =
                    parse_model_section(jm.at("target"), "model.target.", cfg.target_weight_seed);
            }
            if (jm.contains("draft")) {
                cfg.draft_model =
                    parse_model_section(jm.at("draft"), "model.draft.", cfg.draft_weight_seed);
            }
            const std::string conv = jm.value("eq2_state_convention", "previous");
            if (conv != "previous" && conv != "current") {
                throw config_error("config: eq2_state_convention must be previous|current");
            }
            const state_readout ro =
                conv == "previous" ? state_readout::previous : state_readout::current;
            cfg.target_model.readout = ro;
            cfg.draft_model.readout  = ro;
            const bool lin = jm.value("linear_discretization", false);
            cfg.target_model.linear_discretization = lin;
            cfg.draft_model.linear_discretization  = lin;
        }

        if (j.contains("decode")) {
            const auto & jd = j.at("decode");
            check_known_keys(jd, {"prediction_length", "topology", "temperature",
                                  "acceptance_mode", "policy", "max_new_tokens", "seed",
                                  "tile_rows", "sampled_children", "prompt_len", "prompt"},
                             "decode.");
            cfg.decode.prediction_length = jd.value("prediction_length", cfg.decode.prediction_length);
            if (jd.contains("topology")) {
                cfg.decode.topology.branching = jd.at("topology").get<std::vector<int64_t>>();
            }
            cfg.decode.temperature = jd.value("temperature", cfg.decode.temperature);
            if (jd.contains("acceptance_mode")) {
                cfg.decode.mode =
                    acceptance_mode_from_string(jd.at("acceptance_mode").get<std::string>());
            }
            if (jd.contains("policy")) {
                cfg.decode.policy =
                    backtrack_policy_from_string(jd.at("policy").get<std::string>());
            }
            cfg.decode.max_new_tokens = jd.value("max_new_tokens", cfg.decode.max_new_tokens);
            cfg.decode.seed           = jd.value("seed", cfg.seed);
            cfg.decode.tile_rows      = jd.value("tile_rows", cfg.decode.tile_rows);
            if (jd.contains("sampled_children")) {
                cfg.decode.sampled_children = jd.at("sampled_children").get<bool>() ? 1 : 0;
            }
            cfg.prompt_len = jd.value("prompt_len", cfg.prompt_len);
            if (jd.contains("prompt")) {
                cfg.prompt = jd.at("prompt").get<std::vector<int64_t>>();
            }
        } else {
            cfg.decode.seed = cfg.seed;
        }

        if (j.contains("cost")) {
            const auto & jc = j.at("cost");
            check_known_keys(jc, {"blocks_b", "tiles_t", "tokens_l", "tile_rows_g",
                                  "bytes_per_weight_tile", "offchip_bandwidth", "state_bytes",
                                  "pipeline_fill", "tree_nodes", "mean_accepted", "prefill_len",
                                  "decode_len", "target_layers", "draft_layers",
                                  "state_bytes_target", "state_bytes_draft",
                                  "weight_bytes_target_pass", "weight_bytes_draft_pass"},
                             "cost.");
            cost_params & c = cfg.cost;
            c.blocks_b    = jc.value("blocks_b", c.blocks_b);
            c.tiles_t     = jc.value("tiles_t", c.tiles_t);
            c.tokens_l    = jc.value("tokens_l", c.tokens_l);
            c.tile_rows_g = jc.value("tile_rows_g", c.tile_rows_g);
            c.bytes_per_weight_tile = jc.value("bytes_per_weight_tile", c.bytes_per_weight_tile);
            c.offchip_bandwidth     = jc.value("offchip_bandwidth", c.offchip_bandwidth);
            c.state_bytes           = jc.value("state_bytes", c.state_bytes);
            c.pipeline_fill         = jc.value("pipeline_fill", c.pipeline_fill);

            ablation_scenario & s = cfg.ablation;
            s.cost         = c;
            s.prefill_len  = jc.value("prefill_len", s.prefill_len);
            s.decode_len   = jc.value("decode_len", s.decode_len);
            s.mean_accepted = jc.value("mean_accepted", s.mean_accepted);
            transfer_workload & w = s.workload;
            w.tree_nodes    = jc.value("tree_nodes", w.tree_nodes);
            w.target_layers = jc.value("target_layers", w.target_layers);
            w.draft_layers  = jc.value("draft_layers", w.draft_layers);
            w.state_bytes_target = jc.value("state_bytes_target", w.state_bytes_target);
            w.state_bytes_draft  = jc.value("state_bytes_draft", w.state_bytes_draft);
            w.weight_bytes_target_pass =
                jc.value("weight_bytes_target_pass", w.weight_bytes_target_pass);
            w.weight_bytes_draft_pass =
                jc.value("weight_bytes_draft_pass", w.weight_bytes_draft_pass);
        }

        if (j.contains("output")) {
            const auto & jo = j.at("output");
            check_known_keys(jo, {"dir"}, "output.");
            cfg.out_dir = jo.value("dir", cfg.out_dir);
        }
    } catch (const ordered_json::exception & e) {
        throw config_error(std::string("config: ") + e.what());
    }

    cfg.target_model.validate();
    cfg.draft_model.validate();
    cfg.cost.validate();
    if (cfg.target_model.vocab != cfg.draft_model.vocab) {
        throw config_error("config: draft and target vocab sizes must match");
    }
    if (cfg.decode.prediction_length < 1) {
        throw config_error("config: prediction_length must be >= 1");
    }
    if (cfg.decode.temperature < 0.0) {
        throw config_error("config: temperature must be >= 0");
    }
    if (cfg.prompt.empty() && cfg.prompt_len < 1) {
        throw config_error("config: prompt_len must be >= 1");
    }
    cfg.normalized_text = j.dump(2) + "\n";
    return cfg;
}

run_config load_run_config(const std::string & path,
                           const std::vector<std::string> & overrides) {
    std::ifstream is(path);
    if (!is) throw io_error("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_run_config(ss.str(), overrides);
}

std::string run_config_to_json(const run_config & cfg) {
    ordered_json j;
    j["seed"] = cfg.seed;
    auto model_json = [](const model_config & m, uint64_t seed) {
        ordered_json mj;
        mj["n_layers"]    = m.n_layers;
        mj["d_model"]     = m.d_model;
        mj["n_heads"]     = m.n_heads;
        mj["head_dim"]    = m.head_dim;
        mj["state_dim"]   = m.state_dim;
        mj["conv_kernel"] = m.conv_kernel;
        mj["vocab"]       = m.vocab;
        mj["seed"]        = seed;
        mj["embed_seed"]  = m.embed_seed;
        return mj;
    };
    j["model"]["target"] = model_json(cfg.target_model, cfg.target_weight_seed);
    j["model"]["draft"]  = model_json(cfg.draft_model, cfg.draft_weight_seed);
    j["model"]["eq2_state_convention"] =
        cfg.target_model.readout == state_readout::previous ? "previous" : "current";
    j["model"]["linear_discretization"] = cfg.target_model.linear_discretization;
    j["decode"] = {{"prediction_length", cfg.decode.prediction_length},
                   {"topology", cfg.decode.topology.branching},
                   {"temperature", cfg.decode.temperature},
                   {"acceptance_mode", to_string(cfg.decode.mode)},
                   {"policy", to_string(cfg.decode.policy)},
                   {"max_new_tokens", cfg.decode.max_new_tokens},
                   {"seed", cfg.decode.seed},
                   {"tile_rows", cfg.decode.tile_rows},
                   {"prompt_len", cfg.prompt_len}};
    j["cost"] = {{"blocks_b", cfg.cost.blocks_b},
                 {"tiles_t", cfg.cost.tiles_t},
                 {"tokens_l", cfg.cost.tokens_l},
                 {"tile_rows_g", cfg.cost.tile_rows_g},
                 {"bytes_per_weight_tile", cfg.cost.bytes_per_weight_tile},
                 {"offchip_bandwidth", cfg.cost.offchip_bandwidth},
                 {"state_bytes", cfg.cost.state_bytes},
                 {"pipeline_fill", cfg.cost.pipeline_fill}};
    j["output"] = {{"dir", cfg.out_dir}};
    return j.dump(2) + "\n";
}

config_models materialize_models(const run_config & cfg) {
    config_models m;
    m.target = init_weights(cfg.target_model, cfg.target_weight_seed);
    m.draft  = init_weights(cfg.draft_model, cfg.draft_weight_seed);
    if (!cfg.prompt.empty()) {
        for (int64_t t : cfg.prompt) {
            if (t < 0 || t >= cfg.target_model.vocab) {
                throw config_error("config: prompt token out of vocab range");
            }
        }
        m.prompt = cfg.prompt;
    } else {
        rng_stream rng(derive_seed(cfg.seed, "prompt"));
        m.prompt = synthetic_prompt(cfg.target_model.vocab, cfg.prompt_len, cfg.prompt_len, rng);
    }
    return m;
}

} // namespace specssm
