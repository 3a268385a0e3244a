#include "specssm/verifier.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>

namespace specssm {

using ordered_json = nlohmann::ordered_json;

const char * to_string(schedule_kind k) {
    switch (k) {
        case schedule_kind::load_root: return "load_root";
        case schedule_kind::pop:       return "pop";
        case schedule_kind::reuse:     return "reuse";
        case schedule_kind::compute:   return "compute";
        case schedule_kind::retain:    return "retain";
        case schedule_kind::discard:   return "discard";
    }
    return "?";
}

static void check_bfs_valid(const token_tree & tree) {
    tree.validate();
    const int64_t n = tree.size();
    if (tree.nodes[0].parent != -1) throw structure_error("schedule: node 0 must be the root");
    for (int64_t i = 1; i < n; ++i) {
        if (tree.nodes[static_cast<size_t>(i)].parent == -1) {
            throw structure_error("schedule: multiple roots (node " + std::to_string(i) + ")");
        }
        if (tree.nodes[static_cast<size_t>(i)].parent <
            tree.nodes[static_cast<size_t>(i - 1)].parent) {
            throw structure_error("schedule: children not grouped by parent at node " +
                                  std::to_string(i));
        }
    }
}

std::vector<schedule_action> schedule_fifo(const token_tree & tree) {
    check_bfs_valid(tree);
    const int64_t n = tree.size();

    std::vector<bool> internal(static_cast<size_t>(n), false);
    for (int64_t i = 1; i < n; ++i) {
        internal[static_cast<size_t>(tree.nodes[static_cast<size_t>(i)].parent)] = true;
    }

    std::vector<schedule_action> actions;
    actions.push_back({0, 0, schedule_kind::load_root});
    actions.push_back({0, 0, schedule_kind::compute});
    if (!internal[0]) actions.push_back({0, 0, schedule_kind::discard});

    int64_t held_parent = -1;   // parent state currently in the working register
    for (int64_t i = 1; i < n; ++i) {
        const int64_t par = tree.nodes[static_cast<size_t>(i)].parent;
        if (i == 1) {
            // first child claims the root entry enqueued by load_root
            held_parent = 0;
        } else if (par == held_parent) {
            actions.push_back({i, par, schedule_kind::reuse});
        } else {
            actions.push_back({i, par, schedule_kind::pop});
            held_parent = par;
        }
        actions.push_back({i, i, schedule_kind::compute});
        actions.push_back({i, i, internal[static_cast<size_t>(i)] ? schedule_kind::retain
                                                                  : schedule_kind::discard});
    }
    return actions;
}

int64_t fifo_peak_occupancy(const std::vector<schedule_action> & schedule) {
    int64_t occ = 0, peak = 0;
    bool root_enqueued = false;
    for (const auto & a : schedule) {
        switch (a.kind) {
            case schedule_kind::load_root:
                ++occ;
                root_enqueued = true;
                break;
            case schedule_kind::pop:
                --occ;
                break;
            case schedule_kind::retain:
                ++occ;
                break;
            case schedule_kind::compute:
                if (a.node != 0 && root_enqueued) {
                    // the first child's implicit claim of the root entry
                    --occ;
                    root_enqueued = false;
                }
                break;
            case schedule_kind::discard:
                if (a.node == 0 && root_enqueued) {
                    --occ;
                    root_enqueued = false;
                }
                break;
            case schedule_kind::reuse:
                break;
        }
        peak = std::max(peak, occ);
    }
    return peak;
}

std::string schedule_to_json(const std::vector<schedule_action> & schedule) {
    ordered_json arr = ordered_json::array();
    for (const auto & a : schedule) {
        arr.push_back({{"t", a.timestep}, {"action", to_string(a.kind)}, {"node", a.node}});
    }
    return arr.dump(2);
}

namespace {

// Everything the recurrence needs for one node in one layer, produced by the
// batched linear/conv phase.
struct node_preamble {
    step_activations acts;
    tensor c_vec;
    tensor delta_x;    // h*p
    tensor new_tail;   // (k-1) x h*p
};

struct fifo_entry {
    int64_t node;
    tensor tile;   // G x n
};

} // namespace

verify_result verify_tree(const model_weights & target, const model_state & committed,
                          const token_tree & tree, const verify_options & opts,
                          state_store & store, traffic_ledger & ledger) {
    const model_config & cfg = target.config;
    const int64_t n_nodes = tree.size();
    const int64_t di = cfg.d_inner();
    const int64_t g = opts.tile_rows > 0 ? opts.tile_rows : di;
    if (di % g != 0) {
        throw config_error("verify_tree: tile rows " + std::to_string(g) +
                           " do not divide the state rows " + std::to_string(di));
    }
    const int64_t capacity = opts.fifo_capacity > 0 ? opts.fifo_capacity : (n_nodes + 1) / 2;
    const int64_t tile_iters = di / g;
    if (static_cast<int64_t>(committed.layers.size()) != cfg.n_layers) {
        throw dimension_error("verify_tree: committed state layer count mismatch");
    }

    verify_result res;
    res.schedule        = schedule_fifo(tree);
    res.tile_iterations = tile_iters;
    const traffic_ledger before = ledger;

    // per-node inputs to the current layer (starts as token embeddings)
    std::vector<tensor> xcur(static_cast<size_t>(n_nodes));
    for (int64_t i = 0; i < n_nodes; ++i) {
        const int64_t tok = tree.nodes[static_cast<size_t>(i)].token;
        if (tok < 0 || tok >= cfg.vocab) throw usage_error("verify_tree: token out of range");
        tensor x({cfg.d_model});
        for (int64_t c = 0; c < cfg.d_model; ++c) x.at(c) = target.embedding.at(tok, c);
        xcur[static_cast<size_t>(i)] = std::move(x);
    }

    res.node_acts.assign(static_cast<size_t>(n_nodes), {});
    const bool keep_states = opts.policy == backtrack_policy::store_all;
    std::vector<std::vector<layer_state>> node_states;
    if (keep_states) {
        node_states.assign(static_cast<size_t>(n_nodes),
                           std::vector<layer_state>(static_cast<size_t>(cfg.n_layers)));
    }

    for (int64_t l = 0; l < cfg.n_layers; ++l) {
        const layer_weights & lw = target.layers[static_cast<size_t>(l)];
        const layer_state & base = committed.layers[static_cast<size_t>(l)];

        // ---- batched linear/conv phase, one weight pass over all nodes ----
        std::vector<node_preamble> pre(static_cast<size_t>(n_nodes));
        for (int64_t i = 0; i < n_nodes; ++i) {
            const int64_t par = tree.nodes[static_cast<size_t>(i)].parent;
            const tensor & tail = par == -1 ? base.conv_tail : pre[static_cast<size_t>(par)].new_tail;
            block_step_result blk;   // reuse block_step's linear phase via a scratch state
            {
                layer_state scratch;
                scratch.ssm       = tensor({di, cfg.state_dim});   // untouched by phase 1
                scratch.conv_tail = tail;
                blk = block_step(cfg, lw, scratch, xcur[static_cast<size_t>(i)]);
            }
            node_preamble & p = pre[static_cast<size_t>(i)];
            p.acts     = std::move(blk.acts);
            p.c_vec    = std::move(blk.c_vec);
            p.new_tail = std::move(blk.new_state.conv_tail);
            p.delta_x  = tensor({di});
            for (int64_t r = 0; r < di; ++r) {
                p.delta_x.at(r) = p.acts.delta.at(r / cfg.head_dim) * p.acts.x_conv.at(r);
            }
        }

        // ---- FIFO schedule, one pass per tile iteration ----
        std::vector<tensor> y(static_cast<size_t>(n_nodes));
        for (auto & t : y) t = tensor({di});
        std::vector<tensor> full_state;
        if (keep_states) {
            full_state.assign(static_cast<size_t>(n_nodes), tensor({di, cfg.state_dim}));
        }

        for (int64_t it = 0; it < tile_iters; ++it) {
            const int64_t row0 = it * g;
            auto slice_rows = [&](const tensor & full) {
                tensor t({g, cfg.state_dim});
                for (int64_t r = 0; r < g; ++r) {
                    for (int64_t c = 0; c < cfg.state_dim; ++c) {
                        t.at(r, c) = full.at(row0 + r, c);
                    }
                }
                return t;
            };
            auto step_node = [&](int64_t node, const tensor & parent_tile) {
                const node_preamble & p = pre[static_cast<size_t>(node)];
                std::vector<float> a_rows(static_cast<size_t>(g)), dx_rows(static_cast<size_t>(g));
                std::vector<float> d_rows(static_cast<size_t>(g)), x_rows(static_cast<size_t>(g));
                for (int64_t r = 0; r < g; ++r) {
                    const int64_t gr = row0 + r;
                    a_rows[static_cast<size_t>(r)]  = p.acts.a_bar.at(gr / cfg.head_dim);
                    dx_rows[static_cast<size_t>(r)] = p.delta_x.at(gr);
                    d_rows[static_cast<size_t>(r)]  = lw.d_skip.at(gr / cfg.head_dim);
                    x_rows[static_cast<size_t>(r)]  = p.acts.x_conv.at(gr);
                }
                tiled_step_result st = tiled_ssm_step(parent_tile, a_rows, dx_rows, p.acts.b_vec,
                                                      p.c_vec, d_rows, x_rows, cfg.readout);
                for (int64_t r = 0; r < g; ++r) {
                    y[static_cast<size_t>(node)].at(row0 + r) = st.y_rows[static_cast<size_t>(r)];
                }
                if (keep_states) {
                    for (int64_t r = 0; r < g; ++r) {
                        for (int64_t c = 0; c < cfg.state_dim; ++c) {
                            full_state[static_cast<size_t>(node)].at(row0 + r, c) =
                                st.new_tile.at(r, c);
                        }
                    }
                }
                return std::move(st.new_tile);
            };

            std::deque<fifo_entry> fifo;
            fifo_entry reg{-2, tensor{}};
            bool root_enqueued = false;
            tensor pending_tile;
            int64_t pending_node = -1;
            auto push = [&](int64_t node, tensor tile) {
                fifo.push_back({node, std::move(tile)});
                if (static_cast<int64_t>(fifo.size()) > capacity) {
                    throw capacity_error("verify_tree: FIFO occupancy " +
                                         std::to_string(fifo.size()) + " exceeds capacity " +
                                         std::to_string(capacity));
                }
                res.fifo_peak = std::max(res.fifo_peak, static_cast<int64_t>(fifo.size()));
            };

            for (const auto & a : res.schedule) {
                switch (a.kind) {
                    case schedule_kind::load_root: {
                        tensor root_tile = step_node(0, slice_rows(base.ssm));
                        pending_node = 0;
                        push(0, std::move(root_tile));
                        root_enqueued = true;
                        break;
                    }
                    case schedule_kind::pop: {
                        if (fifo.empty()) throw structure_error("verify_tree: pop on empty FIFO");
                        reg = std::move(fifo.front());
                        fifo.pop_front();
                        if (reg.node != a.node) {
                            throw structure_error("verify_tree: FIFO head " +
                                                  std::to_string(reg.node) +
                                                  " does not match scheduled pop " +
                                                  std::to_string(a.node));
                        }
                        break;
                    }
                    case schedule_kind::reuse:
                        if (reg.node != a.node) {
                            throw structure_error("verify_tree: reuse of a parent not held");
                        }
                        break;
                    case schedule_kind::compute: {
                        if (a.node == 0) break;   // folded into load_root
                        if (root_enqueued) {
                            // first child claims the root entry
                            reg = std::move(fifo.front());
                            fifo.pop_front();
                            root_enqueued = false;
                        }
                        if (reg.node != tree.nodes[static_cast<size_t>(a.node)].parent) {
                            throw structure_error("verify_tree: register does not hold parent of " +
                                                  std::to_string(a.node));
                        }
                        pending_tile = step_node(a.node, reg.tile);
                        pending_node = a.node;
                        break;
                    }
                    case schedule_kind::retain:
                        if (pending_node != a.node) {
                            throw structure_error("verify_tree: retain without a computed tile");
                        }
                        push(a.node, std::move(pending_tile));
                        pending_node = -1;
                        break;
                    case schedule_kind::discard:
                        if (a.node == 0 && root_enqueued) {
                            fifo.pop_front();   // childless root
                            root_enqueued = false;
                        }
                        pending_node = -1;
                        pending_tile = tensor{};
                        break;
                }
            }
        }

        // ---- output phase: y -> norm -> out_proj -> residual, per node ----
        for (int64_t i = 0; i < n_nodes; ++i) {
            const tensor yn = ops::rmsnorm(y[static_cast<size_t>(i)], lw.norm_ssm, 1e-5f);
            const tensor yrow({1, di}, yn.data);
            const tensor out = ops::matmul(yrow, lw.out_proj);
            tensor nx({cfg.d_model});
            for (int64_t c = 0; c < cfg.d_model; ++c) {
                nx.at(c) = xcur[static_cast<size_t>(i)].at(c) + out.at(c);
            }
            xcur[static_cast<size_t>(i)] = std::move(nx);
            res.node_acts[static_cast<size_t>(i)].push_back(std::move(pre[static_cast<size_t>(i)].acts));
            if (keep_states) {
                node_states[static_cast<size_t>(i)][static_cast<size_t>(l)].ssm =
                    std::move(full_state[static_cast<size_t>(i)]);
                node_states[static_cast<size_t>(i)][static_cast<size_t>(l)].conv_tail =
                    std::move(pre[static_cast<size_t>(i)].new_tail);
            }
        }
    }

    // final norm + tied head
    res.node_logits.resize(static_cast<size_t>(n_nodes));
    for (int64_t i = 0; i < n_nodes; ++i) {
        const tensor xf = ops::rmsnorm(xcur[static_cast<size_t>(i)], target.norm_final, 1e-5f);
        tensor logits({cfg.vocab});
        for (int64_t v = 0; v < cfg.vocab; ++v) {
            float acc = 0.0f;
            for (int64_t c = 0; c < cfg.d_model; ++c) acc += target.embedding.at(v, c) * xf.at(c);
            logits.at(v) = acc;
        }
        ops::check_finite(logits, "verify_tree logits");
        res.node_logits[static_cast<size_t>(i)] = std::move(logits);
    }

    if (keep_states) {
        for (int64_t i = 0; i < n_nodes; ++i) {
            store.store(model_tag::target, i, node_states[static_cast<size_t>(i)]);
        }
        res.node_states_stored = true;
    }
    res.ledger_delta = ledger.delta_since(before);
    return res;
}

} // namespace specssm
