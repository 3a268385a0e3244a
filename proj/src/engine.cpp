#include "specssm/engine.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace specssm {

using ordered_json = nlohmann::ordered_json;

const char * to_string(acceptance_mode m) {
    return m == acceptance_mode::greedy ? "greedy" : "stochastic";
}

acceptance_mode acceptance_mode_from_string(const std::string & s) {
    if (s == "greedy") return acceptance_mode::greedy;
    if (s == "stochastic") return acceptance_mode::stochastic;
    throw config_error("unknown acceptance mode: " + s);
}

tree_topology decode_params::effective_topology() const {
    tree_topology t = topology;
    if (t.branching.empty()) t = tree_topology::chain(prediction_length);
    t.max_nodes = prediction_length;
    return t;
}

bool decode_params::effective_sampled_children() const {
    if (sampled_children >= 0) return sampled_children != 0;
    return mode == acceptance_mode::stochastic;
}

std::string decode_metrics::to_json() const {
    ordered_json j;
    j["rounds"]             = rounds;
    j["tokens_out"]         = tokens_out;
    j["mean_accepted"]      = mean_accepted;
    j["accepted_per_round"] = accepted_per_round;
    j["ledger"]             = ordered_json::parse(ledger_total.to_json());
    ordered_json rr = ordered_json::array();
    for (const auto & r : per_round) {
        rr.push_back({{"accepted", r.accepted},
                      {"ledger", ordered_json::parse(r.ledger_delta.to_json())}});
    }
    j["per_round"] = rr;
    return j.dump(2);
}

accept_result greedy_accept_path(const token_tree & vtree,
                                 const std::vector<tensor> & node_logits) {
    if (node_logits.size() != vtree.nodes.size()) {
        throw dimension_error("greedy_accept_path: logits per node required");
    }
    accept_result res;
    int64_t cur = 0;
    for (;;) {
        const int64_t want = ops::argmax(node_logits[static_cast<size_t>(cur)]);
        int64_t next = -1;
        for (int64_t c : vtree.children_of(cur)) {
            if (vtree.nodes[static_cast<size_t>(c)].token == want) {
                next = c;
                break;
            }
        }
        if (next == -1) {
            res.bonus_token = want;
            return res;
        }
        res.path.push_back(next);
        cur = next;
    }
}

double accept_probability(const std::vector<double> & p_cur, const std::vector<double> & q,
                          int64_t tok) {
    const double qt = q[static_cast<size_t>(tok)];
    if (qt <= 0.0) throw numeric_error("stochastic accept: zero draft probability");
    return std::min(1.0, p_cur[static_cast<size_t>(tok)] / qt);
}

std::vector<double> residual_after_reject(const std::vector<double> & p_cur,
                                          const std::vector<double> & q) {
    std::vector<double> r(p_cur.size());
    double z = 0.0;
    for (size_t i = 0; i < p_cur.size(); ++i) {
        r[i] = std::max(0.0, p_cur[i] - q[i]);
        z += r[i];
    }
    if (z <= 0.0) {
        // the draft distribution covers the target mass; fall back to it
        return q;
    }
    for (double & v : r) v /= z;
    return r;
}

namespace {

int64_t sample_from(const std::vector<double> & p, rng_stream & rng) {
    const double u = rng.next_uniform();
    double cum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        cum += p[i];
        if (u < cum) return static_cast<int64_t>(i);
    }
    return static_cast<int64_t>(p.size()) - 1;
}

} // namespace

accept_result stochastic_accept_path(const token_tree & vtree,
                                     const std::vector<tensor> & node_logits,
                                     double temperature, rng_stream & rng) {
    if (node_logits.size() != vtree.nodes.size()) {
        throw dimension_error("stochastic_accept_path: logits per node required");
    }
    const double temp = temperature > 0.0 ? temperature : 1.0;
    accept_result res;
    int64_t cur = 0;
    for (;;) {
        std::vector<double> p_cur = ops::softmax(node_logits[static_cast<size_t>(cur)], temp);
        const std::vector<double> q_dist =
            ops::softmax(vtree.nodes[static_cast<size_t>(cur)].logits, temp);
        // siblings considered in draft-probability order; any fixed order
        // preserves the target distribution
        std::vector<int64_t> kids = vtree.children_of(cur);
        std::stable_sort(kids.begin(), kids.end(), [&](int64_t a, int64_t b) {
            return vtree.nodes[static_cast<size_t>(a)].q > vtree.nodes[static_cast<size_t>(b)].q;
        });
        int64_t accepted = -1;
        for (int64_t c : kids) {
            const int64_t tok = vtree.nodes[static_cast<size_t>(c)].token;
            const double alpha = accept_probability(p_cur, q_dist, tok);
            if (rng.next_uniform() < alpha) {
                accepted = c;
                break;
            }
            p_cur = residual_after_reject(p_cur, q_dist);
        }
        if (accepted == -1) {
            res.bonus_token = sample_from(p_cur, rng);
            return res;
        }
        res.path.push_back(accepted);
        cur = accepted;
    }
}

static uint64_t weight_bytes(const model_weights & w) {
    uint64_t n = static_cast<uint64_t>(w.embedding.numel() + w.norm_final.numel());
    for (const auto & l : w.layers) {
        n += static_cast<uint64_t>(l.in_proj.numel() + l.conv.numel() + l.a_log.numel() +
                                   l.d_skip.numel() + l.out_proj.numel() + l.norm_in.numel() +
                                   l.norm_ssm.numel());
    }
    return n * sizeof(float);
}

decode_result decode(const model_weights & target, const model_weights & draft,
                     const std::vector<int64_t> & prompt, const decode_params & params) {
    if (target.config.vocab != draft.config.vocab) {
        throw config_error("decode: draft and target vocab sizes differ");
    }
    if (prompt.empty()) throw usage_error("decode: empty prompt");
    if (params.max_new_tokens < 1) throw usage_error("decode: max_new_tokens must be >= 1");

    const tree_topology topology = params.effective_topology();
    const bool sampled = params.effective_sampled_children();
    rng_stream draft_rng(derive_seed(params.seed, "draft-sampling"));
    rng_stream accept_rng(derive_seed(params.seed, "acceptance"));

    // Target absorbs all but the last prompt token; the last one is the
    // pending token and becomes the root of the first verification tree.
    model_state committed = model_state::zeros(target.config);
    if (prompt.size() > 1) {
        committed = prefill(target, {prompt.begin(), prompt.end() - 1}).state;
    }
    int64_t pending = prompt.back();

    prefill_result dp = prefill(draft, prompt);
    model_state draft_base = std::move(dp.state);
    tensor draft_base_logits = std::move(dp.last_logits);

    traffic_ledger ledger;
    state_store store(ledger);
    activation_cache target_cache(model_tag::target, ledger);
    activation_cache draft_cache(model_tag::draft, ledger);

    const uint64_t target_wbytes = weight_bytes(target);
    const uint64_t draft_wbytes  = weight_bytes(draft);

    decode_result out;
    while (static_cast<int64_t>(out.tokens.size()) < params.max_new_tokens) {
        const traffic_ledger round_start = ledger;
        store.erase_all(model_tag::draft);
        store.erase_all(model_tag::target);

        // 1. draft tree from the current draft state
        draft_tree_result dres = generate_draft_tree(draft, draft_base, draft_base_logits,
                                                     topology, params.temperature, sampled,
                                                     draft_rng);
        const int64_t n_drafted = dres.tree.size();
        ledger.weight_read += draft_wbytes * static_cast<uint64_t>(n_drafted);
        if (params.policy == backtrack_policy::store_all ||
            params.policy == backtrack_policy::hybrid) {
            for (int64_t i = 0; i < n_drafted; ++i) {
                store.store(model_tag::draft, i, dres.node_states[static_cast<size_t>(i)].layers);
            }
        }

        // 2. verification tree: committed pending token as root, drafts below
        token_tree vtree;
        {
            tree_node root;
            root.token  = pending;
            root.parent = -1;
            root.q      = 1.0;
            root.logits = draft_base_logits;
            vtree.nodes.push_back(std::move(root));
            for (const auto & n : dres.tree.nodes) {
                tree_node vn = n;
                vn.parent = n.parent == -1 ? 0 : n.parent + 1;
                vtree.nodes.push_back(std::move(vn));
            }
        }

        // 3. one-pass tree verification
        verify_options vopts;
        vopts.tile_rows = params.tile_rows;
        vopts.policy    = params.policy;
        verify_result vres = verify_tree(target, committed, vtree, vopts, store, ledger);
        ledger.weight_read += target_wbytes;

        // 4. acceptance walk
        accept_result ares = params.mode == acceptance_mode::greedy
                                 ? greedy_accept_path(vtree, vres.node_logits)
                                 : stochastic_accept_path(vtree, vres.node_logits,
                                                          params.temperature, accept_rng);

        // 5. commit tokens
        for (int64_t node : ares.path) {
            out.tokens.push_back(vtree.nodes[static_cast<size_t>(node)].token);
        }
        out.tokens.push_back(ares.bonus_token);

        // 6. new committed target state at the last accepted node
        std::vector<int64_t> path_full = {0};
        path_full.insert(path_full.end(), ares.path.begin(), ares.path.end());
        const int64_t last_node = path_full.back();
        if (params.policy == backtrack_policy::store_all) {
            model_state ns;
            ns.layers   = store.load(model_tag::target, last_node);
            ns.position = committed.position + static_cast<int64_t>(path_full.size());
            committed = std::move(ns);
        } else {
            // hybrid reads its base back from the off-chip anchor
            if (params.policy == backtrack_policy::hybrid && out.metrics.rounds > 0) {
                ledger.target_state_read += state_store::serialized_bytes(committed.layers);
            }
            std::vector<int64_t> positions;
            for (size_t i = 0; i < path_full.size(); ++i) {
                const int64_t pos = committed.position + static_cast<int64_t>(i) + 1;
                positions.push_back(pos);
                for (int64_t l = 0; l < target.config.n_layers; ++l) {
                    target_cache.cache(pos, l,
                                       vres.node_acts[static_cast<size_t>(path_full[i])]
                                                     [static_cast<size_t>(l)]);
                }
            }
            committed = recompute_path(target.config, committed, target_cache, positions, ledger);
            target_cache.clear();
            if (params.policy == backtrack_policy::hybrid) {
                ledger.target_state_write += state_store::serialized_bytes(committed.layers);
            }
        }

        // 7. draft resumes at the last accepted draft node, then absorbs the bonus
        model_state draft_resume = draft_base;
        if (!ares.path.empty()) {
            const int64_t last_draft = ares.path.back() - 1;   // vtree id -> draft tree id
            if (params.policy == backtrack_policy::recompute) {
                std::vector<int64_t> dpositions;
                std::vector<int64_t> dpath = dres.tree.path_to(last_draft);
                for (size_t i = 0; i < dpath.size(); ++i) {
                    const int64_t pos = draft_base.position + static_cast<int64_t>(i) + 1;
                    dpositions.push_back(pos);
                    for (int64_t l = 0; l < draft.config.n_layers; ++l) {
                        draft_cache.cache(pos, l,
                                          dres.node_acts[static_cast<size_t>(dpath[i])]
                                                        [static_cast<size_t>(l)]);
                    }
                }
                draft_resume = recompute_path(draft.config, draft_base, draft_cache,
                                              dpositions, ledger);
                draft_cache.clear();
            } else {
                model_state ns;
                ns.layers   = store.load(model_tag::draft, last_draft);
                ns.position = draft_base.position +
                              static_cast<int64_t>(dres.tree.path_to(last_draft).size());
                draft_resume = std::move(ns);
            }
        }
        model_step_result bstep = model_step(draft, draft_resume, ares.bonus_token);
        ledger.weight_read += draft_wbytes;
        draft_base        = std::move(draft_resume);
        draft_base_logits = std::move(bstep.logits);
        pending           = ares.bonus_token;

        // 8. metrics
        round_metrics rm;
        rm.accepted     = static_cast<int64_t>(ares.path.size()) + 1;
        rm.ledger_delta = ledger.delta_since(round_start);
        out.metrics.per_round.push_back(rm);
        out.metrics.accepted_per_round.push_back(rm.accepted);
        out.metrics.rounds += 1;
    }

    if (static_cast<int64_t>(out.tokens.size()) > params.max_new_tokens) {
        const int64_t excess = static_cast<int64_t>(out.tokens.size()) - params.max_new_tokens;
        out.tokens.resize(static_cast<size_t>(params.max_new_tokens));
        out.metrics.accepted_per_round.back() -= excess;
        out.metrics.per_round.back().accepted -= excess;
    }
    out.metrics.tokens_out    = static_cast<int64_t>(out.tokens.size());
    out.metrics.ledger_total  = ledger;
    out.metrics.mean_accepted = out.metrics.rounds > 0
                                    ? static_cast<double>(out.metrics.tokens_out) /
                                          static_cast<double>(out.metrics.rounds)
                                    : 0.0;
    return out;
}

std::vector<int64_t> greedy_reference(const model_weights & target,
                                      const std::vector<int64_t> & prompt,
                                      int64_t max_new_tokens) {
    if (prompt.empty()) throw usage_error("greedy_reference: empty prompt");
    prefill_result p = prefill(target, prompt);
    std::vector<int64_t> out;
    tensor logits = std::move(p.last_logits);
    for (int64_t i = 0; i < max_new_tokens; ++i) {
        const int64_t tok = ops::argmax(logits);
        out.push_back(tok);
        logits = model_step(target, p.state, tok).logits;
    }
    return out;
}

int64_t sample_reference_token(const model_weights & target,
                               const std::vector<int64_t> & prompt,
                               double temperature, rng_stream & rng) {
    prefill_result p = prefill(target, prompt);
    return ops::sample_token(p.last_logits, temperature, rng);
}

tree_topology default_tree_profile(int64_t prediction_length) {
    // hedge wide at the root, then run chains; budget truncation shapes the
    // lower levels
    tree_topology t;
    t.max_nodes = prediction_length;
    t.branching = {4, 2};
    while (static_cast<int64_t>(t.branching.size()) < prediction_length) {
        t.branching.push_back(1);
    }
    return t;
}

std::vector<int64_t> synthetic_prompt(int64_t vocab, int64_t len_min, int64_t len_max,
                                      rng_stream & rng) {
    const int64_t span = len_max - len_min + 1;
    const int64_t len =
        len_min + static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(span));
    std::vector<int64_t> prompt(static_cast<size_t>(len));
    for (auto & t : prompt) {
        t = static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(vocab));
    }
    return prompt;
}

std::vector<accept_report_cell> acceptance_report(const model_weights & target,
                                                  const model_weights & draft,
                                                  const accept_report_options & opts) {
    if (opts.prompts_per_cell < 1) throw usage_error("acceptance_report: need prompts");
    std::vector<accept_report_cell> cells;
    for (const std::string & topo : {std::string("sequence"), std::string("tree")}) {
        for (int64_t plen : opts.prediction_lengths) {
            accept_report_cell cell;
            cell.topology          = topo;
            cell.dataset           = opts.dataset_tag;
            cell.prediction_length = plen;
            for (int64_t pi = 0; pi < opts.prompts_per_cell; ++pi) {
                rng_stream prng(derive_seed(opts.seed, "prompt", static_cast<uint64_t>(pi)));
                const std::vector<int64_t> prompt =
                    synthetic_prompt(target.config.vocab, opts.prompt_len_min,
                                     opts.prompt_len_max, prng);
                decode_params dp;
                dp.prediction_length = plen;
                dp.topology = topo == "tree" ? default_tree_profile(plen)
                                             : tree_topology::chain(plen);
                dp.mode            = opts.mode;
                dp.max_new_tokens  = opts.max_new_tokens;
                dp.seed            = derive_seed(opts.seed, "decode", static_cast<uint64_t>(pi));
                decode_result r    = decode(target, draft, prompt, dp);
                cell.rounds += r.metrics.rounds;
                cell.tokens += r.metrics.tokens_out;
            }
            cell.mean_accepted =
                static_cast<double>(cell.tokens) / static_cast<double>(cell.rounds);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

} // namespace specssm
