#include "specssm/cost_model.hpp"

#include <algorithm>
#include <cmath>

namespace specssm {

void cost_params::validate() const {
    if (blocks_b < 1 || tiles_t < 1 || tokens_l < 1 || tile_rows_g < 1 ||
        bytes_per_weight_tile < 1 || state_bytes < 1 || pipeline_fill < 0) {
        throw config_error("cost_params: integral fields must be >= 1");
    }
    if (offchip_bandwidth < 1) throw config_error("cost_params: bandwidth must be positive");
}

int64_t linear_cycles(int64_t b, int64_t t) { return b * t; }
int64_t ssm_cycles(int64_t l, int64_t b) { return l * b; }

int64_t overlapped_latency(int64_t b, int64_t t, int64_t l) {
    if (b < 1 || t < 1 || l < 1) throw usage_error("overlapped_latency: B,T,L must be >= 1");
    return l <= t ? b * t + l : t + b * l;
}

int64_t simulate_pipeline(int64_t b, int64_t t, int64_t l) {
    if (b < 1 || t < 1 || l < 1) throw usage_error("simulate_pipeline: B,T,L must be >= 1");
    int64_t consumer_free = 0;
    int64_t finish = 0;
    for (int64_t i = 1; i <= b; ++i) {
        const int64_t ready = i * t;
        const int64_t start = std::max(ready, consumer_free);
        finish        = start + l;
        consumer_free = finish;
    }
    return finish;
}

const char * to_string(transfer_policy p) {
    switch (p) {
        case transfer_policy::naive_spec:  return "naive_spec";
        case transfer_policy::t1:          return "t1";
        case transfer_policy::t1_t2:       return "t1_t2";
        case transfer_policy::hybrid_full: return "hybrid_full";
    }
    return "?";
}

transfer_policy transfer_policy_from_string(const std::string & s) {
    if (s == "naive_spec")  return transfer_policy::naive_spec;
    if (s == "t1")          return transfer_policy::t1;
    if (s == "t1_t2")       return transfer_policy::t1_t2;
    if (s == "hybrid_full") return transfer_policy::hybrid_full;
    throw usage_error("unknown transfer policy: " + s);
}

uint64_t full_tree_state_footprint(uint64_t tree_nodes, uint64_t layers,
                                   uint64_t heads, uint64_t head_dim, uint64_t state_dim,
                                   uint64_t bytes_per_element) {
    return tree_nodes * layers * heads * head_dim * state_dim * bytes_per_element;
}

transfer_breakdown transfer_bytes(transfer_policy policy, const transfer_workload & w) {
    if (w.rounds < 1 || w.tree_nodes < 1) {
        throw usage_error("transfer_bytes: rounds and tree size must be >= 1");
    }
    const uint64_t n = w.tree_nodes;       // drafted tokens per round
    const uint64_t m = n + 1;              // verified nodes (committed root included)
    const uint64_t target_state = w.state_bytes_target * w.target_layers;
    const uint64_t draft_state  = w.state_bytes_draft * w.draft_layers;

    transfer_breakdown out;
    // target weights once per verification round ("single weight loading"),
    // draft weights once per autoregressively drafted token
    out.weight_bytes = w.rounds * (w.target_layers * w.weight_bytes_target_pass +
                                   n * w.draft_layers * w.weight_bytes_draft_pass);

    // draft backtracking: one state per drafted node except the live frontier
    // copy, plus one resume read; identical across the compared policies
    const uint64_t draft_transfers = n > 1 ? (n - 1) + 1 : 0;
    out.draft_state_bytes = w.rounds * draft_transfers * draft_state;

    // target side: backtracking store + verification working-state spill
    uint64_t backtrack_transfers = 0;   // per round
    uint64_t spill_transfers     = 0;
    switch (policy) {
        case transfer_policy::naive_spec:
            backtrack_transfers = m + 1;            // store every node + commit read
            spill_transfers     = m + (m - 1);      // node writes + parent reads
            break;
        case transfer_policy::t1:
            backtrack_transfers = 2;                // one anchor written and read back
            spill_transfers     = m + (m - 1);
            break;
        case transfer_policy::t1_t2:
        case transfer_policy::hybrid_full:
            backtrack_transfers = 2;
            spill_transfers     = 0;                // FIFO keeps tiles on-chip
            break;
    }
    out.target_state_bytes = w.rounds * (backtrack_transfers + spill_transfers) * target_state;
    out.target_store_footprint = n * target_state;
    out.total = out.weight_bytes + out.draft_state_bytes + out.target_state_bytes;
    return out;
}

std::string ablation_toggles::label() const {
    if (!t1 && !t2 && !t3) return "none";
    std::string s;
    if (t1) s += "T1";
    if (t2) s += s.empty() ? "T2" : "+T2";
    if (t3) s += s.empty() ? "T3" : "+T3";
    return s;
}

cost_report ablation_run(const ablation_toggles & toggles, const ablation_scenario & scenario) {
    scenario.cost.validate();
    if (scenario.decode_len < 1 || scenario.prefill_len < 0 || scenario.mean_accepted <= 0.0) {
        throw usage_error("ablation_run: invalid scenario");
    }
    const cost_params & c = scenario.cost;
    const uint64_t rounds = static_cast<uint64_t>(
        std::ceil(static_cast<double>(scenario.decode_len) / scenario.mean_accepted));

    transfer_workload w = scenario.workload;
    w.rounds = rounds;
    const uint64_t n = w.tree_nodes;       // drafted tokens
    const uint64_t m = n + 1;              // verified in parallel

    transfer_policy policy = transfer_policy::naive_spec;
    if (toggles.t1 && toggles.t2) {
        policy = transfer_policy::t1_t2;
    } else if (toggles.t1) {
        policy = transfer_policy::t1;
    }
    transfer_breakdown bytes = transfer_bytes(policy, w);
    if (!toggles.t1 && toggles.t2) {
        // tiling without the hybrid store: the spill goes away, the per-node
        // backtracking store stays
        const uint64_t spill =
            w.rounds * (m + (m - 1)) * w.state_bytes_target * w.target_layers;
        bytes.target_state_bytes -= spill;
        bytes.total -= spill;
    }

    auto per_pass = [&](int64_t l_tokens) -> uint64_t {
        const int64_t lin = linear_cycles(c.blocks_b, c.tiles_t);
        const int64_t ssm = ssm_cycles(l_tokens, c.blocks_b);
        const int64_t body = toggles.t3 ? overlapped_latency(c.blocks_b, c.tiles_t, l_tokens)
                                        : lin + ssm;
        return static_cast<uint64_t>(body + c.pipeline_fill);
    };

    cost_report rep;
    // prefill: one parallel pass over the prompt per target layer
    uint64_t prefill_cycles = 0;
    if (scenario.prefill_len > 0) {
        prefill_cycles = w.target_layers * per_pass(scenario.prefill_len);
    }
    // per round: one parallel verification pass + n autoregressive draft steps
    const uint64_t verify_cycles = w.target_layers * per_pass(static_cast<int64_t>(m));
    const uint64_t draft_cycles  = w.draft_layers * per_pass(1) * n;
    const uint64_t compute_cycles = prefill_cycles + rounds * (verify_cycles + draft_cycles);

    // state traffic is not overlapped with compute; weights already stream at
    // one tile per cycle inside the linear phases
    const uint64_t state_bytes_moved = bytes.draft_state_bytes + bytes.target_state_bytes;
    const uint64_t transfer_cycles =
        (state_bytes_moved + static_cast<uint64_t>(c.offchip_bandwidth) - 1) /
        static_cast<uint64_t>(c.offchip_bandwidth);

    const uint64_t lin_unit = static_cast<uint64_t>(linear_cycles(c.blocks_b, c.tiles_t));
    rep.linear_cycles = lin_unit * (w.target_layers * rounds + w.draft_layers * rounds * n +
                                    (scenario.prefill_len > 0 ? w.target_layers : 0));
    rep.ssm_cycles =
        static_cast<uint64_t>(ssm_cycles(static_cast<int64_t>(m), c.blocks_b)) *
            w.target_layers * rounds +
        static_cast<uint64_t>(ssm_cycles(1, c.blocks_b)) * w.draft_layers * rounds * n +
        (scenario.prefill_len > 0
             ? static_cast<uint64_t>(ssm_cycles(scenario.prefill_len, c.blocks_b)) *
                   w.target_layers
             : 0);
    rep.total_cycles  = compute_cycles + transfer_cycles;
    rep.offchip_bytes = bytes.total;
    rep.breakdown["rounds"]             = rounds;
    rep.breakdown["prefill_cycles"]     = prefill_cycles;
    rep.breakdown["verify_cycles"]      = rounds * verify_cycles;
    rep.breakdown["draft_cycles"]       = rounds * draft_cycles;
    rep.breakdown["transfer_cycles"]    = transfer_cycles;
    rep.breakdown["weight_bytes"]       = bytes.weight_bytes;
    rep.breakdown["draft_state_bytes"]  = bytes.draft_state_bytes;
    rep.breakdown["target_state_bytes"] = bytes.target_state_bytes;
    return rep;
}

} // namespace specssm
