#include "specssm/verifier.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <set>

using namespace specssm;

namespace {

model_config target_cfg() {
    model_config c;
    c.n_layers = 2;
    c.d_model = 16;
    c.n_heads = 2;
    c.head_dim = 4;
    c.state_dim = 8;
    c.conv_kernel = 3;
    c.vocab = 32;
    return c;
}

token_tree make_tree(const std::vector<int64_t> & parents, int64_t vocab = 32) {
    token_tree t;
    for (size_t i = 0; i < parents.size(); ++i) {
        tree_node n;
        n.token  = static_cast<int64_t>((i * 7 + 3) % static_cast<size_t>(vocab));
        n.parent = parents[i];
        t.nodes.push_back(n);
    }
    return t;
}

token_tree golden_tree() {
    return make_tree({-1, 0, 0, 0, 1, 1, 2, 4, 4, 7});
}

struct verify_fixture {
    model_weights target;
    model_state committed;
};

verify_fixture make_fixture(uint64_t seed) {
    verify_fixture f;
    f.target    = init_weights(target_cfg(), seed);
    f.committed = prefill(f.target, {1, 2, 3, 4}).state;
    return f;
}

} // namespace

TEST_CASE("golden schedule: pops, reuses, retained and discarded sets") {
    const auto actions = schedule_fifo(golden_tree());
    std::set<int64_t> pops, reuses, retained, discarded;
    std::set<int64_t> pop_nodes;
    for (const auto & a : actions) {
        switch (a.kind) {
            case schedule_kind::pop:
                pops.insert(a.timestep);
                pop_nodes.insert(a.node);
                break;
            case schedule_kind::reuse:   reuses.insert(a.timestep); break;
            case schedule_kind::retain:  retained.insert(a.node); break;
            case schedule_kind::discard: discarded.insert(a.node); break;
            default: break;
        }
    }
    CHECK(pops == std::set<int64_t>{4, 6, 7, 9});
    CHECK(pop_nodes == std::set<int64_t>{1, 2, 4, 7});
    CHECK(reuses == std::set<int64_t>{2, 3, 5, 8});
    CHECK(retained == std::set<int64_t>{1, 2, 4, 7});
    CHECK(discarded == std::set<int64_t>{3, 5, 6, 8, 9});
    CHECK(actions.front().kind == schedule_kind::load_root);
    CHECK(actions.front().timestep == 0);
}

TEST_CASE("each node computed exactly once") {
    const auto actions = schedule_fifo(golden_tree());
    std::map<int64_t, int> computes;
    for (const auto & a : actions) {
        if (a.kind == schedule_kind::compute) computes[a.node] += 1;
    }
    CHECK(computes.size() == 10);
    for (const auto & [node, c] : computes) CHECK(c == 1);
}

TEST_CASE("chain schedule pops at every internal parent transition") {
    const auto actions = schedule_fifo(make_tree({-1, 0, 1}));
    std::set<int64_t> pops;
    for (const auto & a : actions) {
        if (a.kind == schedule_kind::pop) pops.insert(a.timestep);
    }
    CHECK(pops == std::set<int64_t>{2});
    CHECK(fifo_peak_occupancy(actions) == 1);
}

TEST_CASE("star schedule never pushes leaves, occupancy one") {
    const auto actions = schedule_fifo(make_tree({-1, 0, 0, 0, 0, 0}));
    for (const auto & a : actions) {
        CHECK(a.kind != schedule_kind::retain);   // leaves terminal, root via load
    }
    CHECK(fifo_peak_occupancy(actions) == 1);
}

TEST_CASE("golden tree occupancy is two") {
    CHECK(fifo_peak_occupancy(schedule_fifo(golden_tree())) == 2);
}

TEST_CASE("complete binary tree occupancy stays under half the nodes") {
    // 15 nodes: root, 2, 4, 8
    std::vector<int64_t> parents = {-1};
    for (int64_t i = 1; i < 15; ++i) parents.push_back((i - 1) / 2);
    const auto actions = schedule_fifo(make_tree(parents));
    CHECK(fifo_peak_occupancy(actions) <= 7);
}

TEST_CASE("schedule rejects ungrouped children and multiple roots") {
    CHECK_THROWS_AS(schedule_fifo(make_tree({-1, 0, 1, 0})), structure_error);
    CHECK_THROWS_AS(schedule_fifo(make_tree({-1, 0, -1})), structure_error);
}

TEST_CASE("schedule json dump lists timestep, action and node") {
    const auto actions = schedule_fifo(make_tree({-1, 0}));
    const auto j = nlohmann::json::parse(schedule_to_json(actions));
    REQUIRE(j.is_array());
    CHECK(j[0]["action"] == "load_root");
    CHECK(j[0]["t"] == 0);
    CHECK(j[0]["node"] == 0);
}

TEST_CASE("chain verification is bitwise equal to sequential decoding") {
    verify_fixture f = make_fixture(11);
    const token_tree chain = make_tree({-1, 0, 1, 2});
    traffic_ledger ledger;
    state_store store(ledger);
    const verify_result vr = verify_tree(f.target, f.committed, chain, {}, store, ledger);

    model_state st = f.committed;
    for (int64_t i = 0; i < chain.size(); ++i) {
        const tensor logits =
            model_step(f.target, st, chain.nodes[static_cast<size_t>(i)].token).logits;
        CHECK(vr.node_logits[static_cast<size_t>(i)].data == logits.data);
    }
}

TEST_CASE("golden tree node 9 equals replay along its path") {
    verify_fixture f = make_fixture(12);
    const token_tree tree = golden_tree();
    traffic_ledger ledger;
    state_store store(ledger);
    verify_options vo;
    vo.tile_rows = 4;
    const verify_result vr = verify_tree(f.target, f.committed, tree, vo, store, ledger);

    model_state st = f.committed;
    tensor logits;
    for (int64_t id : tree.path_to(9)) {
        logits = model_step(f.target, st, tree.nodes[static_cast<size_t>(id)].token).logits;
    }
    for (int64_t v = 0; v < logits.numel(); ++v) {
        const double a = vr.node_logits[9].at(v), b = logits.at(v);
        CHECK(std::abs(a - b) <= 1e-5 * std::max({std::abs(a), std::abs(b), 1e-6}));
    }
}

TEST_CASE("tile widths agree with each other") {
    verify_fixture f = make_fixture(13);
    const token_tree tree = golden_tree();
    traffic_ledger ledger;
    state_store store(ledger);
    verify_options full;
    full.tile_rows = 8;
    const verify_result a = verify_tree(f.target, f.committed, tree, full, store, ledger);
    verify_options quarter;
    quarter.tile_rows = 2;
    const verify_result b = verify_tree(f.target, f.committed, tree, quarter, store, ledger);
    CHECK(a.tile_iterations == 1);
    CHECK(b.tile_iterations == 4);
    for (int64_t n = 0; n < tree.size(); ++n) {
        for (int64_t v = 0; v < 32; ++v) {
            const double x = a.node_logits[static_cast<size_t>(n)].at(v);
            const double y = b.node_logits[static_cast<size_t>(n)].at(v);
            CHECK(std::abs(x - y) <= 1e-6 * std::max({std::abs(x), std::abs(y), 1e-6}));
        }
    }
}

TEST_CASE("committed state is not mutated by verification") {
    verify_fixture f = make_fixture(14);
    const model_state before = f.committed;
    traffic_ledger ledger;
    state_store store(ledger);
    verify_tree(f.target, f.committed, golden_tree(), {}, store, ledger);
    CHECK(f.committed.bitwise_equal(before));
}

TEST_CASE("tile rows must divide the state rows") {
    verify_fixture f = make_fixture(15);
    traffic_ledger ledger;
    state_store store(ledger);
    verify_options vo;
    vo.tile_rows = 3;   // d_inner is 8
    CHECK_THROWS_AS(verify_tree(f.target, f.committed, golden_tree(), vo, store, ledger),
                    config_error);
}

TEST_CASE("fifo capacity overflow raises a capacity error") {
    verify_fixture f = make_fixture(16);
    traffic_ledger ledger;
    state_store store(ledger);
    verify_options vo;
    vo.fifo_capacity = 1;   // the golden tree needs 2
    CHECK_THROWS_AS(verify_tree(f.target, f.committed, golden_tree(), vo, store, ledger),
                    capacity_error);
}

TEST_CASE("store_all policy writes every node state, readable by id") {
    verify_fixture f = make_fixture(17);
    const token_tree tree = golden_tree();
    traffic_ledger ledger;
    state_store store(ledger);
    verify_options vo;
    vo.policy = backtrack_policy::store_all;
    const verify_result vr = verify_tree(f.target, f.committed, tree, vo, store, ledger);
    CHECK(vr.node_states_stored);
    CHECK(store.entry_count() == static_cast<size_t>(tree.size()));
    const uint64_t per_node = state_store::serialized_bytes(store.load(model_tag::target, 0));
    CHECK(ledger.target_state_write == per_node * static_cast<uint64_t>(tree.size()));

    // stored chain states equal sequential stepping states
    const token_tree chain = make_tree({-1, 0, 1});
    traffic_ledger l2;
    state_store s2(l2);
    verify_tree(f.target, f.committed, chain, vo, s2, l2);
    model_state st = f.committed;
    for (int64_t i = 0; i < chain.size(); ++i) {
        model_step(f.target, st, chain.nodes[static_cast<size_t>(i)].token);
        const auto stored = s2.load(model_tag::target, i);
        for (int64_t l = 0; l < 2; ++l) {
            CHECK(st.layers[static_cast<size_t>(l)].bitwise_equal(stored[static_cast<size_t>(l)]));
        }
    }
}

TEST_CASE("eviction safety: read-after-evict never occurs in the schedule") {
    // replay the action stream against tombstones for a batch of random trees
    rng_stream rng(18);
    for (int trial = 0; trial < 50; ++trial) {
        // random BFS tree via frontier expansion
        token_tree t;
        tree_node root;
        root.token = 1;
        t.nodes.push_back(root);
        std::vector<int64_t> frontier = {0};
        const int64_t budget = 2 + static_cast<int64_t>(rng.next_u64() % 14);
        while (!frontier.empty() && t.size() < budget) {
            std::vector<int64_t> next;
            for (int64_t par : frontier) {
                const int64_t kids = static_cast<int64_t>(rng.next_u64() % 4);
                for (int64_t c = 0; c < kids && t.size() < budget; ++c) {
                    tree_node n;
                    n.token  = 1;
                    n.parent = par;
                    next.push_back(t.size());
                    t.nodes.push_back(n);
                }
                if (t.size() >= budget) break;
            }
            frontier = std::move(next);
        }

        const auto actions = schedule_fifo(t);
        std::set<int64_t> live;     // in FIFO or register
        std::set<int64_t> dead;
        int64_t reg = -1;
        bool root_enqueued = false;
        for (const auto & a : actions) {
            switch (a.kind) {
                case schedule_kind::load_root:
                    live.insert(0);
                    root_enqueued = true;
                    break;
                case schedule_kind::pop:
                    REQUIRE(live.count(a.node));
                    if (reg >= 0) {
                        live.erase(reg);
                        dead.insert(reg);
                    }
                    reg = a.node;
                    break;
                case schedule_kind::reuse:
                    REQUIRE(reg == a.node);
                    REQUIRE(!dead.count(a.node));
                    break;
                case schedule_kind::compute: {
                    if (a.node == 0) break;
                    if (root_enqueued) {
                        reg           = 0;
                        root_enqueued = false;
                    }
                    const int64_t par = t.nodes[static_cast<size_t>(a.node)].parent;
                    REQUIRE(reg == par);
                    REQUIRE(!dead.count(par));
                    break;
                }
                case schedule_kind::retain:
                    live.insert(a.node);
                    break;
                case schedule_kind::discard:
                    break;
            }
        }
    }
}
