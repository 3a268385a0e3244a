#pragma once

#include "specssm/cost_model.hpp"
#include "specssm/engine.hpp"
#include "specssm/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace specssm {

// The JSON run configuration. Unknown keys anywhere in the document are
// rejected; `--set a.b.c=value` overrides individual fields before
// validation.
struct run_config {
    uint64_t seed = 42;

    model_config target_model;
    model_config draft_model;
    uint64_t target_weight_seed = 1;
    uint64_t draft_weight_seed  = 1;

    decode_params decode;
    int64_t prompt_len = 24;
    std::vector<int64_t> prompt;   // explicit prompt wins over prompt_len

    cost_params cost;
    ablation_scenario ablation;

    std::string out_dir = "out";
    // original text after overrides, for hashing/manifests
    std::string normalized_text;
};

run_config default_run_config();

run_config parse_run_config(const std::string & json_text,
                            const std::vector<std::string> & overrides);

run_config load_run_config(const std::string & path,
                           const std::vector<std::string> & overrides);

std::string run_config_to_json(const run_config & cfg);

// Builds the model pair and the prompt the decode/report commands use.
struct config_models {
    model_weights target;
    model_weights draft;
    std::vector<int64_t> prompt;
};
config_models materialize_models(const run_config & cfg);

} // namespace specssm
