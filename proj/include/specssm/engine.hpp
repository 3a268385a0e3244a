#pragma once

#include "specssm/model.hpp"
#include "specssm/state_manager.hpp"
#include "specssm/token_tree.hpp"
#include "specssm/verifier.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace specssm {

enum class acceptance_mode { greedy, stochastic };

const char * to_string(acceptance_mode m);
acceptance_mode acceptance_mode_from_string(const std::string & s);

struct decode_params {
    int64_t prediction_length = 16;
    tree_topology topology;                 // empty branching -> chain(prediction_length)
    double temperature = 1.0;
    acceptance_mode mode = acceptance_mode::greedy;
    backtrack_policy policy = backtrack_policy::hybrid;
    int64_t max_new_tokens = 32;
    uint64_t seed = 0;
    int64_t tile_rows = 0;                  // verification G; 0 = untiled
    // -1: auto (sampled children for stochastic acceptance, top-b for greedy)
    int sampled_children = -1;

    tree_topology effective_topology() const;
    bool effective_sampled_children() const;
};

struct round_metrics {
    int64_t accepted  = 0;      // committed tokens this round (accepted drafts + bonus)
    traffic_ledger ledger_delta;
};

struct decode_metrics {
    int64_t rounds     = 0;
    int64_t tokens_out = 0;
    std::vector<int64_t> accepted_per_round;
    double mean_accepted = 0.0;
    std::vector<round_metrics> per_round;
    traffic_ledger ledger_total;

    std::string to_json() const;
};

struct decode_result {
    std::vector<int64_t> tokens;
    decode_metrics metrics;
};

// Walks the verified tree greedily: a child is accepted when its token equals
// the target argmax at its parent. Returns the accepted node ids (root
// excluded) and the bonus token.
struct accept_result {
    std::vector<int64_t> path;   // accepted node ids in the verification tree
    int64_t bonus_token = -1;
};
accept_result greedy_accept_path(const token_tree & vtree,
                                 const std::vector<tensor> & node_logits);

// Sibling-ordered rejection sampling: child c accepted with probability
// min(1, p(tok_c)/q_c); on rejection the target residual drops the draft
// distribution (max(0, p - q), renormalized) before the next sibling; the
// bonus token is drawn from the final residual. Preserves the target
// distribution when children are sampled from the draft softmax.
accept_result stochastic_accept_path(const token_tree & vtree,
                                     const std::vector<tensor> & node_logits,
                                     double temperature, rng_stream & rng);

// The two pieces of the acceptance lottery, exposed so tests can enumerate
// the exact output distribution they induce.
double accept_probability(const std::vector<double> & p_cur, const std::vector<double> & q,
                          int64_t tok);
std::vector<double> residual_after_reject(const std::vector<double> & p_cur,
                                          const std::vector<double> & q);

// Full speculative decoding loop (draft tree -> tree verification ->
// acceptance -> backtracking bookkeeping). Greedy mode reproduces target-only
// greedy decoding token for token under every backtracking policy.
decode_result decode(const model_weights & target, const model_weights & draft,
                     const std::vector<int64_t> & prompt, const decode_params & params);

// Target-only reference decoders used by the oracles.
std::vector<int64_t> greedy_reference(const model_weights & target,
                                      const std::vector<int64_t> & prompt,
                                      int64_t max_new_tokens);
int64_t sample_reference_token(const model_weights & target,
                               const std::vector<int64_t> & prompt,
                               double temperature, rng_stream & rng);

struct accept_report_cell {
    std::string topology;       // "sequence" or "tree"
    std::string dataset;
    int64_t prediction_length = 0;
    double mean_accepted = 0.0;
    int64_t rounds = 0;
    int64_t tokens = 0;
};

struct accept_report_options {
    std::vector<int64_t> prediction_lengths = {6, 8, 10, 12, 14, 16};
    int64_t prompts_per_cell = 20;
    int64_t prompt_len_min = 16;
    int64_t prompt_len_max = 64;
    int64_t max_new_tokens = 48;
    acceptance_mode mode = acceptance_mode::greedy;
    uint64_t seed = 0;
    std::string dataset_tag = "synthetic";
};

// Branching profile used for "tree" cells, truncated to the node budget.
tree_topology default_tree_profile(int64_t prediction_length);

std::vector<accept_report_cell> acceptance_report(const model_weights & target,
                                                  const model_weights & draft,
                                                  const accept_report_options & opts);

std::vector<int64_t> synthetic_prompt(int64_t vocab, int64_t len_min, int64_t len_max,
                                      rng_stream & rng);

} // namespace specssm
