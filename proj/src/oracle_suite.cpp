#include "specssm/oracle_suite.hpp"

#include "specssm/cost_model.hpp"
#include "specssm/engine.hpp"
#include "specssm/model.hpp"
#include "specssm/state_manager.hpp"
#include "specssm/token_tree.hpp"
#include "specssm/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace specssm {

namespace {

// ---------------------------------------------------------------------------
// shared fixtures
// ---------------------------------------------------------------------------

model_config desk_target_config(state_readout readout = state_readout::previous) {
    model_config c;
    c.n_layers = 2;
    c.d_model = 16;
    c.n_heads = 2;
    c.head_dim = 4;
    c.state_dim = 8;
    c.conv_kernel = 3;
    c.vocab = 48;
    c.embed_seed = 7;
    c.readout = readout;
    return c;
}

model_config desk_draft_config(state_readout readout = state_readout::previous) {
    model_config c = desk_target_config(readout);
    c.n_layers = 1;
    return c;
}

struct model_pair {
    model_weights target;
    model_weights draft;
};

model_pair desk_pair(uint64_t seed, state_readout readout = state_readout::previous) {
    // same weight seed: the draft is the target's first layer, so acceptance
    // is nontrivial; the target's extra layer provides the divergence
    model_pair p;
    p.target = init_weights(desk_target_config(readout), seed);
    p.draft  = init_weights(desk_draft_config(readout), seed);
    return p;
}

double rel_err(const tensor & a, const tensor & b) {
    double worst = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double x = a.at(i), y = b.at(i);
        const double scale = std::max({std::abs(x), std::abs(y), 1e-6});
        worst = std::max(worst, std::abs(x - y) / scale);
    }
    return worst;
}

// Random BFS-valid tree: frontier queue, random child counts, budget-capped.
token_tree random_tree(int64_t max_nodes, int64_t vocab, rng_stream & rng,
                       bool branch_two_plus) {
    token_tree t;
    tree_node root;
    root.token = static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(vocab));
    t.nodes.push_back(root);
    std::vector<int64_t> frontier = {0};
    while (!frontier.empty() && t.size() < max_nodes) {
        std::vector<int64_t> next;
        for (int64_t par : frontier) {
            if (t.size() >= max_nodes) break;
            int64_t kids;
            if (branch_two_plus) {
                kids = rng.next_u64() % 2 == 0 ? 0 : 2 + static_cast<int64_t>(rng.next_u64() % 2);
                if (t.size() + kids > max_nodes) kids = 0;
            } else {
                kids = static_cast<int64_t>(rng.next_u64() % 4);   // 0..3
            }
            for (int64_t c = 0; c < kids && t.size() < max_nodes; ++c) {
                tree_node n;
                n.token  = static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(vocab));
                n.parent = par;
                next.push_back(t.size());
                t.nodes.push_back(n);
            }
        }
        frontier = std::move(next);
    }
    return t;
}

// replay the target sequentially along the path to `node`, from `committed`
tensor path_replay_logits(const model_weights & w, const model_state & committed,
                          const token_tree & tree, int64_t node) {
    model_state st = committed;
    tensor logits;
    for (int64_t id : tree.path_to(node)) {
        logits = model_step(w, st, tree.nodes[static_cast<size_t>(id)].token).logits;
    }
    return logits;
}

token_tree golden_tree() {
    // 0 -> {1,2,3}, 1 -> {4,5}, 2 -> {6}, 4 -> {7,8}, 7 -> {9}
    const std::vector<int64_t> parents = {-1, 0, 0, 0, 1, 1, 2, 4, 4, 7};
    token_tree t;
    for (size_t i = 0; i < parents.size(); ++i) {
        tree_node n;
        n.token  = static_cast<int64_t>(i % 5);
        n.parent = parents[i];
        t.nodes.push_back(n);
    }
    return t;
}

struct check_context {
    const oracle_options & opts;
    std::ostream & log;
    std::vector<oracle_outcome> & outcomes;

    void run(const std::string & name, const std::function<std::string()> & body,
             double budget_seconds = 0.0) {
        if (!opts.only.empty() &&
            std::find(opts.only.begin(), opts.only.end(), name) == opts.only.end()) {
            return;
        }
        oracle_outcome oc;
        oc.name = name;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            oc.detail = body();
            oc.pass   = true;
        } catch (const std::exception & e) {
            oc.detail = e.what();
            oc.pass   = false;
        }
        oc.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (oc.pass && budget_seconds > 0.0 && oc.seconds > budget_seconds) {
            oc.pass   = false;
            oc.detail = "runtime " + std::to_string(oc.seconds) + "s exceeds the " +
                        std::to_string(budget_seconds) + "s budget";
        }
        char line[512];
        std::snprintf(line, sizeof(line), "[%s] %-28s %s (%.2fs)\n",
                      oc.pass ? "PASS" : "FAIL", oc.name.c_str(), oc.detail.c_str(), oc.seconds);
        log << line;
        log.flush();
        outcomes.push_back(std::move(oc));
    }
};

struct check_failure : error {
    using error::error;
};

[[noreturn]] void fail(const std::string & msg) { throw check_failure(msg); }

// ---------------------------------------------------------------------------
// criterion bodies
// ---------------------------------------------------------------------------

std::string crit_losslessness_greedy(const oracle_options & opts) {
    const int64_t pairs = opts.quick ? 8 : 50;
    const int64_t max_new = 24;
    int64_t configs = 0;
    for (int64_t i = 0; i < pairs; ++i) {
        rng_stream rng(derive_seed(opts.seed, "greedy-pair", static_cast<uint64_t>(i)));
        const uint64_t wseed = rng.next_u64();
        for (state_readout ro : {state_readout::previous, state_readout::current}) {
            model_pair mp = desk_pair(wseed, ro);
            const std::vector<int64_t> prompt = synthetic_prompt(48, 4, 12, rng);
            const std::vector<int64_t> ref = greedy_reference(mp.target, prompt, max_new);
            for (backtrack_policy pol : {backtrack_policy::store_all, backtrack_policy::recompute,
                                         backtrack_policy::hybrid}) {
                decode_params dp;
                dp.prediction_length = 8;
                dp.topology          = default_tree_profile(8);
                dp.mode              = acceptance_mode::greedy;
                dp.policy            = pol;
                dp.max_new_tokens    = max_new;
                dp.seed              = wseed;
                decode_result r = decode(mp.target, mp.draft, prompt, dp);
                if (r.tokens != ref) {
                    fail("mismatch at pair " + std::to_string(i) + " policy " +
                         to_string(pol) + " readout " +
                         (ro == state_readout::previous ? "previous" : "current"));
                }
                ++configs;
            }
        }
    }
    return std::to_string(configs) + "/" + std::to_string(configs) +
           " configs identical to target-only greedy";
}

std::string crit_losslessness_stochastic(const oracle_options & opts) {
    // exact enumeration of the single-node lottery
    {
        const std::vector<double> p = {0.2, 0.3, 0.5};
        const std::vector<double> q = {0.5, 0.3, 0.2};
        std::vector<double> out(3, 0.0);
        for (int64_t c = 0; c < 3; ++c) {
            const double alpha = accept_probability(p, q, c);
            out[static_cast<size_t>(c)] += q[static_cast<size_t>(c)] * alpha;
            const std::vector<double> r = residual_after_reject(p, q);
            for (int64_t j = 0; j < 3; ++j) {
                out[static_cast<size_t>(j)] +=
                    q[static_cast<size_t>(c)] * (1.0 - alpha) * r[static_cast<size_t>(j)];
            }
        }
        for (int64_t j = 0; j < 3; ++j) {
            if (std::abs(out[static_cast<size_t>(j)] - p[static_cast<size_t>(j)]) > 1e-12) {
                fail("single-node lottery enumeration deviates from the target distribution");
            }
        }
    }

    // vocab-5 single-token empirical distribution
    model_config tc;
    tc.n_layers = 1; tc.d_model = 8; tc.n_heads = 2; tc.head_dim = 2;
    tc.state_dim = 4; tc.conv_kernel = 2; tc.vocab = 5;
    model_config dc = tc;
    const model_weights target = init_weights(tc, 11);
    const model_weights draft  = init_weights(dc, 23);
    const std::vector<int64_t> prompt = {1, 3};

    std::vector<double> exact;
    {
        prefill_result p = prefill(target, prompt);
        exact = ops::softmax(p.last_logits, 1.0);
    }
    const int64_t runs = opts.quick ? 20000 : 100000;
    std::vector<int64_t> counts(5, 0);
    decode_params dp;
    dp.prediction_length = 3;
    dp.topology.branching = {2, 1};
    dp.mode = acceptance_mode::stochastic;
    dp.max_new_tokens = 1;
    for (int64_t i = 0; i < runs; ++i) {
        dp.seed = derive_seed(opts.seed, "tv-run", static_cast<uint64_t>(i));
        decode_result r = decode(target, draft, prompt, dp);
        counts[static_cast<size_t>(r.tokens.at(0))] += 1;
    }
    double tv = 0.0;
    for (int64_t j = 0; j < 5; ++j) {
        tv += std::abs(static_cast<double>(counts[static_cast<size_t>(j)]) /
                           static_cast<double>(runs) -
                       exact[static_cast<size_t>(j)]);
    }
    tv *= 0.5;
    const double bound = opts.quick ? 0.04 : 0.02;
    if (tv > bound) {
        fail("total variation " + std::to_string(tv) + " exceeds " + std::to_string(bound));
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "enumeration exact; TV=%.4f over %lld runs", tv,
                  static_cast<long long>(runs));
    return buf;
}

std::string crit_fifo_verification(const oracle_options & opts) {
    // golden schedule
    {
        const token_tree t = golden_tree();
        const auto actions = schedule_fifo(t);
        std::set<int64_t> pops, reuses, retained, discarded;
        for (const auto & a : actions) {
            if (a.kind == schedule_kind::pop) pops.insert(a.timestep);
            if (a.kind == schedule_kind::reuse) reuses.insert(a.timestep);
            if (a.kind == schedule_kind::retain) retained.insert(a.node);
            if (a.kind == schedule_kind::discard) discarded.insert(a.node);
        }
        if (pops != std::set<int64_t>{4, 6, 7, 9}) fail("golden schedule pops differ");
        if (reuses != std::set<int64_t>{2, 3, 5, 8}) fail("golden schedule reuses differ");
        if (retained != std::set<int64_t>{1, 2, 4, 7}) fail("golden schedule retained differ");
        if (discarded != std::set<int64_t>{3, 5, 6, 8, 9}) fail("golden schedule discards differ");
    }

    const int64_t trees = opts.quick ? 40 : 200;
    double worst = 0.0;
    for (int64_t i = 0; i < trees; ++i) {
        rng_stream rng(derive_seed(opts.seed, "fifo-tree", static_cast<uint64_t>(i)));
        const model_weights target = init_weights(desk_target_config(), rng.next_u64());
        const std::vector<int64_t> prompt = synthetic_prompt(48, 2, 10, rng);
        const model_state committed = prefill(target, prompt).state;
        const token_tree tree = random_tree(2 + static_cast<int64_t>(rng.next_u64() % 15), 48,
                                            rng, false);
        traffic_ledger ledger;
        state_store store(ledger);
        verify_options vo;
        vo.fifo_capacity = tree.size();   // arbitrary topologies may exceed ceil(N/2)
        verify_result vr = verify_tree(target, committed, tree, vo, store, ledger);
        for (int64_t node = 0; node < tree.size(); ++node) {
            const tensor oracle = path_replay_logits(target, committed, tree, node);
            const double e = rel_err(vr.node_logits[static_cast<size_t>(node)], oracle);
            worst = std::max(worst, e);
            if (e > 1e-5) {
                fail("tree " + std::to_string(i) + " node " + std::to_string(node) +
                     " deviates from path replay by " + std::to_string(e));
            }
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "golden schedule exact; %lld trees, max rel err %.2e",
                  static_cast<long long>(trees), worst);
    return buf;
}

std::string crit_occupancy_bound(const oracle_options & opts) {
    const int64_t trees = opts.quick ? 30 : 100;
    int64_t worst_peak = 0;
    for (int64_t i = 0; i < trees; ++i) {
        rng_stream rng(derive_seed(opts.seed, "occ-tree", static_cast<uint64_t>(i)));
        token_tree t;
        do {
            t = random_tree(3 + static_cast<int64_t>(rng.next_u64() % 14), 48, rng, true);
        } while (t.size() < 3);
        const auto sched = schedule_fifo(t);
        const int64_t peak = fifo_peak_occupancy(sched);
        worst_peak = std::max(worst_peak, peak);
        if (peak > t.size() / 2) {
            fail("peak " + std::to_string(peak) + " exceeds floor(N/2) for N=" +
                 std::to_string(t.size()));
        }
    }
    return std::to_string(trees) + " branching trees within floor(N/2), worst peak " +
           std::to_string(worst_peak);
}

std::string crit_tiling_exactness(const oracle_options & opts) {
    model_config cfg = desk_target_config();
    cfg.n_heads = 4;   // d_inner 16: divisors 1,2,4,8,16
    const model_weights target = init_weights(cfg, derive_seed(opts.seed, "tiling"));
    rng_stream rng(derive_seed(opts.seed, "tiling-data"));
    const std::vector<int64_t> prompt = synthetic_prompt(cfg.vocab, 3, 8, rng);
    const model_state committed = prefill(target, prompt).state;
    const token_tree tree = random_tree(12, cfg.vocab, rng, false);

    traffic_ledger ledger;
    state_store store(ledger);
    verify_options base_opt;
    base_opt.fifo_capacity = tree.size();
    base_opt.tile_rows     = cfg.d_inner();
    const verify_result untiled = verify_tree(target, committed, tree, base_opt, store, ledger);

    const int64_t di = cfg.d_inner();
    std::vector<int64_t> divisors;
    for (int64_t g = 1; g <= di; ++g) {
        if (di % g == 0) divisors.push_back(g);
    }
    for (int64_t g : divisors) {
        verify_options vo = base_opt;
        vo.tile_rows = g;
        store.erase_all(model_tag::target);
        const verify_result vr = verify_tree(target, committed, tree, vo, store, ledger);
        if (vr.tile_iterations != di / g) {
            fail("G=" + std::to_string(g) + " ran " + std::to_string(vr.tile_iterations) +
                 " iterations, want " + std::to_string(di / g));
        }
        for (int64_t node = 0; node < tree.size(); ++node) {
            const double e = rel_err(vr.node_logits[static_cast<size_t>(node)],
                                     untiled.node_logits[static_cast<size_t>(node)]);
            if (e > 1e-6) {
                fail("G=" + std::to_string(g) + " deviates from untiled by " + std::to_string(e));
            }
        }
    }
    return std::to_string(divisors.size()) + " divisors of h*p=" + std::to_string(di) +
           " match untiled; D/G counts exact";
}

std::string crit_backtracking_recompute(const oracle_options & opts) {
    const int64_t rounds = opts.quick ? 25 : 100;
    for (int64_t i = 0; i < rounds; ++i) {
        rng_stream rng(derive_seed(opts.seed, "recompute", static_cast<uint64_t>(i)));
        const model_weights target = init_weights(desk_target_config(), rng.next_u64());
        const std::vector<int64_t> prompt = synthetic_prompt(48, 2, 8, rng);
        const model_state committed = prefill(target, prompt).state;
        const token_tree tree = random_tree(2 + static_cast<int64_t>(rng.next_u64() % 12), 48,
                                            rng, false);

        traffic_ledger ledger;
        state_store store(ledger);
        verify_options vo;
        vo.policy        = backtrack_policy::store_all;
        vo.fifo_capacity = tree.size();
        const verify_result vr = verify_tree(target, committed, tree, vo, store, ledger);

        const int64_t node =
            static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(tree.size()));
        const std::vector<int64_t> path = tree.path_to(node);

        activation_cache cache(model_tag::target, ledger);
        std::vector<int64_t> positions;
        for (size_t k = 0; k < path.size(); ++k) {
            const int64_t pos = committed.position + static_cast<int64_t>(k) + 1;
            positions.push_back(pos);
            for (int64_t l = 0; l < target.config.n_layers; ++l) {
                cache.cache(pos, l, vr.node_acts[static_cast<size_t>(path[k])]
                                                [static_cast<size_t>(l)]);
            }
        }
        const model_state rec =
            recompute_path(target.config, committed, cache, positions, ledger);
        const std::vector<layer_state> stored = store.load(model_tag::target, node);
        for (int64_t l = 0; l < target.config.n_layers; ++l) {
            if (!rec.layers[static_cast<size_t>(l)].bitwise_equal(stored[static_cast<size_t>(l)])) {
                fail("round " + std::to_string(i) + " node " + std::to_string(node) +
                     " recompute is not bitwise equal to the stored state");
            }
        }
    }

    // decode outputs must not depend on the policy
    const int64_t decodes = opts.quick ? 4 : 10;
    for (int64_t i = 0; i < decodes; ++i) {
        rng_stream rng(derive_seed(opts.seed, "policy-inv", static_cast<uint64_t>(i)));
        model_pair mp = desk_pair(rng.next_u64());
        const std::vector<int64_t> prompt = synthetic_prompt(48, 4, 12, rng);
        for (acceptance_mode mode : {acceptance_mode::greedy, acceptance_mode::stochastic}) {
            decode_params dp;
            dp.prediction_length = 8;
            dp.topology          = default_tree_profile(8);
            dp.mode              = mode;
            dp.max_new_tokens    = 16;
            dp.seed              = rng.next_u64();
            std::vector<int64_t> first;
            for (backtrack_policy pol : {backtrack_policy::store_all,
                                         backtrack_policy::recompute, backtrack_policy::hybrid}) {
                dp.policy = pol;
                decode_result r = decode(mp.target, mp.draft, prompt, dp);
                if (first.empty()) {
                    first = r.tokens;
                } else if (r.tokens != first) {
                    fail("policy " + std::string(to_string(pol)) + " changes " +
                         std::string(to_string(mode)) + " outputs");
                }
            }
        }
    }
    return std::to_string(rounds) + " recompute rounds bitwise; outputs policy-invariant";
}

std::string crit_cost_model(const oracle_options & opts) {
    const struct { int64_t b, t, l, want; } cases[] = {
        {4, 8, 8, 40}, {4, 8, 10, 48}, {4, 8, 2, 34}};
    for (const auto & c : cases) {
        if (overlapped_latency(c.b, c.t, c.l) != c.want ||
            simulate_pipeline(c.b, c.t, c.l) != c.want) {
            fail("worked case (" + std::to_string(c.b) + "," + std::to_string(c.t) + "," +
                 std::to_string(c.l) + ") != " + std::to_string(c.want));
        }
    }
    rng_stream rng(derive_seed(opts.seed, "cost"));
    const int64_t triples = opts.quick ? 100 : 100;
    for (int64_t i = 0; i < triples; ++i) {
        const int64_t b = 1 + static_cast<int64_t>(rng.next_u64() % 32);
        const int64_t t = 1 + static_cast<int64_t>(rng.next_u64() % 32);
        const int64_t l = 1 + static_cast<int64_t>(rng.next_u64() % 32);
        if (overlapped_latency(b, t, l) != simulate_pipeline(b, t, l)) {
            fail("closed form and simulation disagree at (" + std::to_string(b) + "," +
                 std::to_string(t) + "," + std::to_string(l) + ")");
        }
        if (linear_cycles(b, t) != b * t || ssm_cycles(l, b) != l * b) {
            fail("cycle identities broken");
        }
    }
    return "3 worked cases + " + std::to_string(triples) +
           " random triples: closed form == simulation; B*T and L*B identities hold";
}

transfer_workload random_workload(rng_stream & rng, uint64_t min_nodes) {
    transfer_workload w;
    w.rounds        = 1 + rng.next_u64() % 32;
    w.tree_nodes    = min_nodes + rng.next_u64() % 15;
    w.target_layers = 1 + rng.next_u64() % 64;
    w.draft_layers  = 1 + rng.next_u64() % 24;
    w.state_bytes_target = 256u << (rng.next_u64() % 6);
    w.state_bytes_draft  = 64u << (rng.next_u64() % 6);
    w.weight_bytes_target_pass = 1024 + rng.next_u64() % 4096;
    w.weight_bytes_draft_pass  = 256 + rng.next_u64() % 1024;
    return w;
}

std::string crit_ablation_ordering(const oracle_options & opts) {
    rng_stream rng(derive_seed(opts.seed, "ablation"));
    const int64_t n = opts.quick ? 20 : 60;
    for (int64_t i = 0; i < n; ++i) {
        const transfer_workload w = random_workload(rng, 2);
        const uint64_t naive = transfer_bytes(transfer_policy::naive_spec, w).total;
        const uint64_t t1    = transfer_bytes(transfer_policy::t1, w).total;
        const uint64_t t1t2  = transfer_bytes(transfer_policy::t1_t2, w).total;
        if (!(naive > t1 && t1 > t1t2)) {
            fail("byte ordering violated: naive=" + std::to_string(naive) +
                 " t1=" + std::to_string(t1) + " t1t2=" + std::to_string(t1t2));
        }

        ablation_scenario sc;
        sc.prefill_len   = 16 + static_cast<int64_t>(rng.next_u64() % 128);
        sc.decode_len    = 64 + static_cast<int64_t>(rng.next_u64() % 512);
        sc.mean_accepted = 1.5 + static_cast<double>(rng.next_u64() % 40) / 10.0;
        sc.cost.blocks_b = 2 + static_cast<int64_t>(rng.next_u64() % 15);
        sc.cost.tiles_t  = 2 + static_cast<int64_t>(rng.next_u64() % 31);
        sc.workload      = w;
        ablation_toggles serial{true, true, false};
        ablation_toggles overlap{true, true, true};
        const cost_report rs = ablation_run(serial, sc);
        const cost_report ro = ablation_run(overlap, sc);
        if (!(rs.total_cycles > ro.total_cycles)) {
            fail("serialized cycles not above overlapped cycles");
        }
    }
    return std::to_string(n) + " workloads: naive > +T1 > +T1+T2 bytes, serialized > overlapped";
}

std::string crit_acceptance_trend(const oracle_options & opts) {
    model_pair mp = desk_pair(derive_seed(opts.seed, "trend-models"));
    accept_report_options ro;
    ro.prompts_per_cell = opts.quick ? 6 : 20;
    ro.max_new_tokens   = opts.quick ? 24 : 48;
    ro.prompt_len_min   = 16;
    ro.prompt_len_max   = 64;
    ro.mode             = acceptance_mode::greedy;
    ro.seed             = derive_seed(opts.seed, "trend");
    const std::vector<accept_report_cell> cells = acceptance_report(mp.target, mp.draft, ro);

    std::map<int64_t, double> seq_mean, tree_mean;
    for (const auto & c : cells) {
        (c.topology == "tree" ? tree_mean : seq_mean)[c.prediction_length] = c.mean_accepted;
    }
    std::ostringstream detail;
    for (const auto & [plen, sm] : seq_mean) {
        const double tm = tree_mean.at(plen);
        if (tm + 1e-9 < sm) {
            fail("tree mean " + std::to_string(tm) + " below sequence mean " +
                 std::to_string(sm) + " at prediction length " + std::to_string(plen));
        }
        if (!(sm >= 1.0 && sm <= static_cast<double>(plen) + 1.0) ||
            !(tm >= 1.0 && tm <= static_cast<double>(plen) + 1.0)) {
            fail("mean accepted out of [1, prediction_length + 1]");
        }
    }
    for (const auto * m : {&seq_mean, &tree_mean}) {
        int inversions = 0;
        double prev = -1.0;
        for (const auto & [plen, v] : *m) {
            if (v + 1e-9 < prev) ++inversions;
            prev = std::max(prev, v);
        }
        if (inversions > 1) {
            fail("more than one inversion in the prediction-length sweep");
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "tree>=sequence at all lengths; seq %.2f..%.2f tree %.2f..%.2f",
                  seq_mean.begin()->second, seq_mean.rbegin()->second,
                  tree_mean.begin()->second, tree_mean.rbegin()->second);
    return buf;
}

std::string crit_memory_ratio(const oracle_options &) {
    // production-scale dims: h=80, p=64, n=128, 64 layers, 16 drafted tokens, 2-byte elements
    transfer_workload w;
    w.rounds        = 1;
    w.tree_nodes    = 16;
    w.target_layers = 64;
    w.state_bytes_target = transfer_workload::state_bytes_for(80, 64, 128, 2);
    w.state_bytes_draft  = 0;
    const transfer_breakdown b = transfer_bytes(transfer_policy::naive_spec, w);
    const uint64_t gib = 1ull << 30;
    if (b.target_store_footprint <= gib) {
        fail("footprint " + std::to_string(b.target_store_footprint) + " bytes <= 1 GiB");
    }
    const uint64_t direct = full_tree_state_footprint(16, 64, 80, 64, 128, 2);
    if (direct != b.target_store_footprint) fail("footprint routes disagree");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "full-tree state footprint %.2f GiB > 1 GiB",
                  static_cast<double>(b.target_store_footprint) / static_cast<double>(gib));
    return buf;
}

} // namespace

std::vector<oracle_outcome> run_oracle_suite(const oracle_options & opts, std::ostream & log) {
    std::vector<oracle_outcome> outcomes;
    check_context ctx{opts, log, outcomes};

    ctx.run("losslessness-greedy", [&] { return crit_losslessness_greedy(opts); }, 120.0);
    ctx.run("losslessness-stochastic", [&] { return crit_losslessness_stochastic(opts); }, 300.0);
    ctx.run("fifo-verification-oracle", [&] { return crit_fifo_verification(opts); });
    ctx.run("occupancy-bound", [&] { return crit_occupancy_bound(opts); });
    ctx.run("tiling-exactness", [&] { return crit_tiling_exactness(opts); });
    ctx.run("backtracking-recompute", [&] { return crit_backtracking_recompute(opts); });
    ctx.run("cost-model-equivalence", [&] { return crit_cost_model(opts); });
    ctx.run("ablation-ordering", [&] { return crit_ablation_ordering(opts); });
    ctx.run("acceptance-trend", [&] { return crit_acceptance_trend(opts); }, 600.0);
    ctx.run("memory-ratio-sanity", [&] { return crit_memory_ratio(opts); });
    return outcomes;
}

bool all_passed(const std::vector<oracle_outcome> & outcomes) {
    for (const auto & o : outcomes) {
        if (!o.pass) return false;
    }
    return !outcomes.empty();
}

} // namespace specssm
