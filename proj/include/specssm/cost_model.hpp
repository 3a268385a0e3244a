#pragma once

#include "specssm/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace specssm {

// First-order dataflow parameters: weights stream as B output-channel blocks
// of T input-channel tiles (one tile per cycle at peak bandwidth); the SSM
// unit consumes one token-tile per cycle, L tokens in flight.
struct cost_params {
    int64_t blocks_b  = 4;
    int64_t tiles_t   = 8;
    int64_t tokens_l  = 8;
    int64_t tile_rows_g = 8;
    int64_t bytes_per_weight_tile = 64;
    int64_t offchip_bandwidth     = 16;   // bytes per cycle
    int64_t state_bytes           = 1024; // per layer, per token state
    int64_t pipeline_fill         = 0;

    void validate() const;
};

int64_t linear_cycles(int64_t b, int64_t t);   // B*T
int64_t ssm_cycles(int64_t l, int64_t b);      // L*B

// Closed form for the producer/consumer overlap: block i is ready at i*T and
// the SSM consumes blocks serially at L cycles each.
//   L <= T : B*T + L        (consumer drains right behind the producer)
//   L >  T : T + B*L        (consumer is the bottleneck after the first block)
int64_t overlapped_latency(int64_t b, int64_t t, int64_t l);

// Discrete-event reference for the same pipeline.
int64_t simulate_pipeline(int64_t b, int64_t t, int64_t l);

enum class transfer_policy { naive_spec, t1, t1_t2, hybrid_full };

const char * to_string(transfer_policy p);
transfer_policy transfer_policy_from_string(const std::string & s);

// One decode round's worth of model shape for the byte model.
struct transfer_workload {
    uint64_t rounds        = 1;
    uint64_t tree_nodes    = 16;   // verified tree size (committed root included)
    uint64_t target_layers = 64;
    uint64_t draft_layers  = 24;
    uint64_t state_bytes_target = 0;   // per layer per token state
    uint64_t state_bytes_draft  = 0;
    uint64_t weight_bytes_target_pass = 0;   // per layer linear pass
    uint64_t weight_bytes_draft_pass  = 0;

    static uint64_t state_bytes_for(uint64_t heads, uint64_t head_dim, uint64_t state_dim,
                                    uint64_t bytes_per_element) {
        return heads * head_dim * state_dim * bytes_per_element;
    }
};

// Byte model per policy. All policies keep the draft on off-chip state
// storage; they differ in the target's backtracking store (all nodes vs one
// anchor) and in whether verification spills working states off-chip.
//   naive_spec : per-node backtracking store + verification spill
//   t1         : one anchor per round + verification spill
//   t1_t2      : one anchor per round, FIFO keeps verification tiles on-chip
//   hybrid_full: t1_t2 (the remaining toggle changes cycles, not bytes)
struct transfer_breakdown {
    uint64_t weight_bytes       = 0;
    uint64_t draft_state_bytes  = 0;
    uint64_t target_state_bytes = 0;
    uint64_t total              = 0;
    // size of the per-node backtracking store a naive plan would hold
    uint64_t target_store_footprint = 0;
};
transfer_breakdown transfer_bytes(transfer_policy policy, const transfer_workload & w);

// Analytic footprint of keeping every verified node's state, all layers.
uint64_t full_tree_state_footprint(uint64_t tree_nodes, uint64_t layers,
                                   uint64_t heads, uint64_t head_dim, uint64_t state_dim,
                                   uint64_t bytes_per_element);

struct ablation_toggles {
    bool t1 = false;   // hybrid backtracking
    bool t2 = false;   // FIFO tree verification with tiling
    bool t3 = false;   // linear-parallel / SSM-sequential overlap

    std::string label() const;
};

struct ablation_scenario {
    int64_t prefill_len = 64;
    int64_t decode_len  = 512;
    double  mean_accepted = 2.5;   // committed tokens per round
    cost_params cost;
    transfer_workload workload;    // rounds is derived from decode_len
};

struct cost_report {
    uint64_t linear_cycles = 0;
    uint64_t ssm_cycles    = 0;
    uint64_t total_cycles  = 0;
    uint64_t offchip_bytes = 0;
    std::map<std::string, uint64_t> breakdown;
};

cost_report ablation_run(const ablation_toggles & toggles, const ablation_scenario & scenario);

} // namespace specssm
