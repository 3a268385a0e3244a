#pragma once

#include "specssm/model.hpp"
#include "specssm/state_manager.hpp"
#include "specssm/token_tree.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace specssm {

// One event in the per-layer verification schedule. Timestep t computes node
// t (BFS order). For pop/reuse the node id names the parent entry involved;
// load_root both computes the root and enqueues its entry, which the first
// child claims without an explicit pop.
enum class schedule_kind { load_root, pop, reuse, compute, retain, discard };

const char * to_string(schedule_kind k);

struct schedule_action {
    int64_t timestep;
    int64_t node;
    schedule_kind kind;
};

// BFS-valid means: node 0 is the single root, every parent precedes its
// children, and parents are non-decreasing along the list (children grouped).
std::vector<schedule_action> schedule_fifo(const token_tree & tree);

// Maximum simultaneous FIFO entries when replaying the schedule.
int64_t fifo_peak_occupancy(const std::vector<schedule_action> & schedule);

std::string schedule_to_json(const std::vector<schedule_action> & schedule);

struct verify_options {
    int64_t tile_rows = 0;         // G; 0 means the whole h*p axis in one tile
    int64_t fifo_capacity = 0;     // 0 means ceil(N/2)
    backtrack_policy policy = backtrack_policy::hybrid;
};

struct verify_result {
    std::vector<tensor> node_logits;                            // per node
    std::vector<std::vector<step_activations>> node_acts;       // per node, per layer
    std::vector<schedule_action> schedule;
    int64_t tile_iterations = 0;                                // D/G, per layer
    int64_t fifo_peak = 0;
    traffic_ledger ledger_delta;
    // populated only under store_all (read back from the store by id = node)
    bool node_states_stored = false;
};

// Verifies a whole tree against the committed state in one pass: linear/conv
// work per node first, then the FIFO schedule per layer and tile iteration.
// The committed state is not modified. Under store_all every node's state is
// written to `store` (id = node index); under recompute/hybrid only the
// activations in the result are kept.
verify_result verify_tree(const model_weights & target, const model_state & committed,
                          const token_tree & tree, const verify_options & opts,
                          state_store & store, traffic_ledger & ledger);

} // namespace specssm
