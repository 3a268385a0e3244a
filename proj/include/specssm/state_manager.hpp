#pragma once

#include "specssm/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace specssm {

// How a model recovers state after a rejection.
//   store_all : every per-node state is written off-chip and loaded back
//   recompute : lightweight activations are cached on-chip, states recomputed
//   hybrid    : draft stores, target recomputes + one off-chip anchor per round
enum class backtrack_policy { store_all, recompute, hybrid };

const char * to_string(backtrack_policy p);
backtrack_policy backtrack_policy_from_string(const std::string & s);

enum class model_tag { draft, target };

// Simulated off-chip byte counters plus the on-chip cache and recompute-work
// gauges the policy comparisons need. Monotone within a round; resettable.
struct traffic_ledger {
    uint64_t draft_state_write  = 0;
    uint64_t draft_state_read   = 0;
    uint64_t target_state_write = 0;
    uint64_t target_state_read  = 0;
    uint64_t weight_read        = 0;
    // tracked, not counted as off-chip
    uint64_t activation_cache_bytes = 0;
    uint64_t conv_cache_bytes       = 0;
    uint64_t draft_recompute_flops  = 0;
    uint64_t target_recompute_flops = 0;

    void reset() { *this = traffic_ledger{}; }
    uint64_t offchip_state_bytes(model_tag tag) const {
        return tag == model_tag::draft ? draft_state_write + draft_state_read
                                       : target_state_write + target_state_read;
    }
    traffic_ledger delta_since(const traffic_ledger & before) const;
    std::string to_json() const;
    std::string to_csv() const;   // counter,bytes rows
};

// Off-chip store of serialized per-layer states keyed by (model, id). Every
// store/load is counted on the ledger at the serialized size.
class state_store {
public:
    explicit state_store(traffic_ledger & ledger) : ledger_(&ledger) {}

    void store(model_tag tag, int64_t id, const std::vector<layer_state> & layers);
    std::vector<layer_state> load(model_tag tag, int64_t id) const;
    bool contains(model_tag tag, int64_t id) const;
    void erase_all(model_tag tag);
    size_t entry_count() const { return entries_.size(); }

    static uint64_t serialized_bytes(const std::vector<layer_state> & layers);

private:
    traffic_ledger * ledger_;
    std::map<std::pair<int, int64_t>, std::vector<layer_state>> entries_;
};

// On-chip activation cache for one model: per (position, layer) the decay,
// B, delta and X of that step. Consumed by recompute_path; positions must
// arrive in increasing order.
class activation_cache {
public:
    activation_cache(model_tag tag, traffic_ledger & ledger) : tag_(tag), ledger_(&ledger) {}

    void cache(int64_t token_pos, int64_t layer, const step_activations & acts);
    void clear();
    bool empty() const { return entries_.empty(); }
    int64_t first_position() const;
    int64_t last_position() const;
    const step_activations & at(int64_t token_pos, int64_t layer) const;

    model_tag tag() const { return tag_; }

private:
    model_tag tag_;
    traffic_ledger * ledger_;
    std::map<std::pair<int64_t, int64_t>, step_activations> entries_;
    std::map<int64_t, int64_t> layers_seen_;   // layer -> highest position cached
};

// Folds the recurrence over cached activations from base (exclusive) through
// `positions` (contiguous, ascending) and returns the state at the last one.
// Bitwise-identical to the pass that produced the cache; the only off-chip
// state access is the caller supplying base_state.
model_state recompute_path(const model_config & cfg, const model_state & base_state,
                           const activation_cache & cache,
                           const std::vector<int64_t> & positions,
                           traffic_ledger & ledger);

uint64_t recompute_flops_per_step(const model_config & cfg);

// One decode round of state bookkeeping under the hybrid protocol (or its
// store-all / recompute-everywhere counterparts). The engine calls this after
// acceptance; see engine.cpp for the surrounding loop.
struct round_record {
    int64_t accepted_nodes   = 0;   // accepted draft nodes (excl. the committed root)
    int64_t target_recompute_steps = 0;
    int64_t draft_recompute_steps  = 0;
    int64_t anchor_writes    = 0;
    traffic_ledger ledger_delta;
};

} // namespace specssm
