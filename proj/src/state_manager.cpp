#include "specssm/state_manager.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

namespace specssm {

using ordered_json = nlohmann::ordered_json;

const char * to_string(backtrack_policy p) {
    switch (p) {
        case backtrack_policy::store_all: return "store_all";
        case backtrack_policy::recompute: return "recompute";
        case backtrack_policy::hybrid:    return "hybrid";
    }
    return "?";
}

backtrack_policy backtrack_policy_from_string(const std::string & s) {
    if (s == "store_all") return backtrack_policy::store_all;
    if (s == "recompute") return backtrack_policy::recompute;
    if (s == "hybrid")    return backtrack_policy::hybrid;
    throw config_error("unknown backtracking policy: " + s);
}

traffic_ledger traffic_ledger::delta_since(const traffic_ledger & before) const {
    traffic_ledger d;
    d.draft_state_write      = draft_state_write - before.draft_state_write;
    d.draft_state_read       = draft_state_read - before.draft_state_read;
    d.target_state_write     = target_state_write - before.target_state_write;
    d.target_state_read      = target_state_read - before.target_state_read;
    d.weight_read            = weight_read - before.weight_read;
    d.activation_cache_bytes = activation_cache_bytes - before.activation_cache_bytes;
    d.conv_cache_bytes       = conv_cache_bytes - before.conv_cache_bytes;
    d.draft_recompute_flops  = draft_recompute_flops - before.draft_recompute_flops;
    d.target_recompute_flops = target_recompute_flops - before.target_recompute_flops;
    return d;
}

std::string traffic_ledger::to_json() const {
    ordered_json j;
    j["draft_state_write"]      = draft_state_write;
    j["draft_state_read"]       = draft_state_read;
    j["target_state_write"]     = target_state_write;
    j["target_state_read"]      = target_state_read;
    j["weight_read"]            = weight_read;
    j["activation_cache_bytes"] = activation_cache_bytes;
    j["conv_cache_bytes"]       = conv_cache_bytes;
    j["draft_recompute_flops"]  = draft_recompute_flops;
    j["target_recompute_flops"] = target_recompute_flops;
    return j.dump();
}

std::string traffic_ledger::to_csv() const {
    std::ostringstream os;
    os << "counter,bytes\n";
    os << "draft_state_write," << draft_state_write << "\n";
    os << "draft_state_read," << draft_state_read << "\n";
    os << "target_state_write," << target_state_write << "\n";
    os << "target_state_read," << target_state_read << "\n";
    os << "weight_read," << weight_read << "\n";
    os << "activation_cache_bytes," << activation_cache_bytes << "\n";
    os << "conv_cache_bytes," << conv_cache_bytes << "\n";
    os << "draft_recompute_flops," << draft_recompute_flops << "\n";
    os << "target_recompute_flops," << target_recompute_flops << "\n";
    return os.str();
}

uint64_t state_store::serialized_bytes(const std::vector<layer_state> & layers) {
    uint64_t n = 0;
    for (const auto & l : layers) n += static_cast<uint64_t>(l.byte_size());
    return n;
}

void state_store::store(model_tag tag, int64_t id, const std::vector<layer_state> & layers) {
    const auto key = std::make_pair(static_cast<int>(tag), id);
    if (entries_.count(key)) {
        throw usage_error("state_store: duplicate id " + std::to_string(id));
    }
    const uint64_t bytes = serialized_bytes(layers);
    if (tag == model_tag::draft) {
        ledger_->draft_state_write += bytes;
    } else {
        ledger_->target_state_write += bytes;
    }
    entries_[key] = layers;
}

std::vector<layer_state> state_store::load(model_tag tag, int64_t id) const {
    const auto key = std::make_pair(static_cast<int>(tag), id);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw not_found_error("state_store: id " + std::to_string(id) + " not stored");
    }
    const uint64_t bytes = serialized_bytes(it->second);
    if (tag == model_tag::draft) {
        const_cast<traffic_ledger *>(ledger_)->draft_state_read += bytes;
    } else {
        const_cast<traffic_ledger *>(ledger_)->target_state_read += bytes;
    }
    return it->second;
}

bool state_store::contains(model_tag tag, int64_t id) const {
    return entries_.count(std::make_pair(static_cast<int>(tag), id)) > 0;
}

void state_store::erase_all(model_tag tag) {
    for (auto it = entries_.begin(); it != entries_.end();) {
        if (it->first.first == static_cast<int>(tag)) {
            it = entries_.erase(it);
        } else {
            ++it;
        }
    }
}

void activation_cache::cache(int64_t token_pos, int64_t layer, const step_activations & acts) {
    auto ls = layers_seen_.find(layer);
    if (ls != layers_seen_.end() && token_pos <= ls->second) {
        throw usage_error("activation_cache: position " + std::to_string(token_pos) +
                          " not increasing for layer " + std::to_string(layer));
    }
    layers_seen_[layer] = token_pos;
    // a_bar + delta (h each), B (n), X (h*p); the conv column is tracked on
    // its own gauge so the A/B/delta/X footprint stays comparable to states.
    const uint64_t core_bytes = static_cast<uint64_t>(
        (acts.a_bar.numel() + acts.b_vec.numel() + acts.delta.numel() + acts.x_conv.numel()) *
        static_cast<int64_t>(sizeof(float)));
    ledger_->activation_cache_bytes += core_bytes;
    ledger_->conv_cache_bytes +=
        static_cast<uint64_t>(acts.conv_in.numel() * static_cast<int64_t>(sizeof(float)));
    entries_[{token_pos, layer}] = acts;
}

void activation_cache::clear() {
    entries_.clear();
    layers_seen_.clear();
}

int64_t activation_cache::first_position() const {
    if (entries_.empty()) throw usage_error("activation_cache: empty");
    return entries_.begin()->first.first;
}

int64_t activation_cache::last_position() const {
    if (entries_.empty()) throw usage_error("activation_cache: empty");
    return entries_.rbegin()->first.first;
}

const step_activations & activation_cache::at(int64_t token_pos, int64_t layer) const {
    auto it = entries_.find({token_pos, layer});
    if (it == entries_.end()) {
        throw error("activation_cache: missing entry pos=" + std::to_string(token_pos) +
                    " layer=" + std::to_string(layer));
    }
    return it->second;
}

uint64_t recompute_flops_per_step(const model_config & cfg) {
    // state update: 3 ops per (row, n) cell, plus the delta*x products
    return static_cast<uint64_t>(cfg.n_layers) *
           static_cast<uint64_t>(cfg.d_inner()) *
           (3u * static_cast<uint64_t>(cfg.state_dim) + 1u);
}

model_state recompute_path(const model_config & cfg, const model_state & base_state,
                           const activation_cache & cache,
                           const std::vector<int64_t> & positions,
                           traffic_ledger & ledger) {
    if (positions.empty()) return base_state;

    int64_t expect = base_state.position + 1;
    for (int64_t p : positions) {
        if (p != expect) {
            throw error("recompute_path: positions not contiguous after base (want " +
                        std::to_string(expect) + ", got " + std::to_string(p) + ")");
        }
        ++expect;
    }

    model_state out = base_state;
    for (int64_t l = 0; l < cfg.n_layers; ++l) {
        std::vector<const step_activations *> steps;
        steps.reserve(positions.size());
        for (int64_t p : positions) steps.push_back(&cache.at(p, l));
        out.layers[static_cast<size_t>(l)] =
            replay_layer(cfg, base_state.layers[static_cast<size_t>(l)], steps, cfg.readout);
    }
    out.position = positions.back();

    const uint64_t flops =
        recompute_flops_per_step(cfg) * static_cast<uint64_t>(positions.size());
    if (cache.tag() == model_tag::draft) {
        ledger.draft_recompute_flops += flops;
    } else {
        ledger.target_recompute_flops += flops;
    }
    return out;
}

} // namespace specssm
