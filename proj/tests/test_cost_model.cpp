#include "specssm/cost_model.hpp"

#include <doctest.h>

using namespace specssm;

namespace {

transfer_workload desk_workload(uint64_t tree_nodes) {
    transfer_workload w;
    w.rounds        = 10;
    w.tree_nodes    = tree_nodes;
    w.target_layers = 8;
    w.draft_layers  = 4;
    w.state_bytes_target = 1024;
    w.state_bytes_draft  = 256;
    w.weight_bytes_target_pass = 2048;
    w.weight_bytes_draft_pass  = 512;
    return w;
}

} // namespace

TEST_CASE("worked latency cases") {
    CHECK(overlapped_latency(4, 8, 8) == 40);
    CHECK(overlapped_latency(4, 8, 10) == 48);
    CHECK(overlapped_latency(4, 8, 2) == 34);
    CHECK(simulate_pipeline(4, 8, 8) == 40);
    CHECK(simulate_pipeline(4, 8, 10) == 48);
    CHECK(simulate_pipeline(4, 8, 2) == 34);
}

TEST_CASE("single block and full pipelining") {
    rng_stream rng(1);
    for (int i = 0; i < 20; ++i) {
        const int64_t t = 1 + static_cast<int64_t>(rng.next_u64() % 32);
        const int64_t l = 1 + static_cast<int64_t>(rng.next_u64() % 32);
        CHECK(simulate_pipeline(1, t, l) == t + l);
    }
    // L == T: producer and consumer fully pipelined
    for (int64_t b = 1; b <= 8; ++b) {
        for (int64_t t = 1; t <= 8; ++t) {
            CHECK(simulate_pipeline(b, t, t) == b * t + t);
        }
    }
}

TEST_CASE("closed form equals the event simulation on random triples") {
    rng_stream rng(2);
    for (int i = 0; i < 100; ++i) {
        const int64_t b = 1 + static_cast<int64_t>(rng.next_u64() % 32);
        const int64_t t = 1 + static_cast<int64_t>(rng.next_u64() % 32);
        const int64_t l = 1 + static_cast<int64_t>(rng.next_u64() % 32);
        CHECK(overlapped_latency(b, t, l) == simulate_pipeline(b, t, l));
    }
}

TEST_CASE("latency is monotone in each argument") {
    rng_stream rng(3);
    for (int i = 0; i < 50; ++i) {
        const int64_t b = 1 + static_cast<int64_t>(rng.next_u64() % 16);
        const int64_t t = 1 + static_cast<int64_t>(rng.next_u64() % 16);
        const int64_t l = 1 + static_cast<int64_t>(rng.next_u64() % 16);
        const int64_t base = overlapped_latency(b, t, l);
        CHECK(overlapped_latency(b + 1, t, l) >= base);
        CHECK(overlapped_latency(b, t + 1, l) >= base);
        CHECK(overlapped_latency(b, t, l + 1) >= base);
    }
}

TEST_CASE("consumer never idles after the first block when L <= T") {
    // with L <= T the finish time is producer-bound: B*T + L
    for (int64_t l = 1; l <= 8; ++l) {
        CHECK(overlapped_latency(6, 8, l) == 6 * 8 + l);
    }
    // with L >= T the producer is never the bottleneck: T + B*L
    for (int64_t l = 8; l <= 16; ++l) {
        CHECK(overlapped_latency(6, 8, l) == 8 + 6 * l);
    }
}

TEST_CASE("transfer byte ordering across policies") {
    rng_stream rng(4);
    for (int i = 0; i < 50; ++i) {
        transfer_workload w = desk_workload(2 + rng.next_u64() % 15);
        w.rounds = 1 + rng.next_u64() % 20;
        const uint64_t naive = transfer_bytes(transfer_policy::naive_spec, w).total;
        const uint64_t t1    = transfer_bytes(transfer_policy::t1, w).total;
        const uint64_t t1t2  = transfer_bytes(transfer_policy::t1_t2, w).total;
        const uint64_t full  = transfer_bytes(transfer_policy::hybrid_full, w).total;
        CHECK(naive >= t1);
        CHECK(t1 >= t1t2);
        CHECK(naive > t1);     // strict for tree size > 1
        CHECK(t1 > t1t2);
        CHECK(full == t1t2);   // the remaining toggle only changes cycles
    }
}

TEST_CASE("tree size one reduces to the baseline plus draft weights") {
    transfer_workload w = desk_workload(1);
    const transfer_breakdown b = transfer_bytes(transfer_policy::t1_t2, w);
    const uint64_t baseline = w.rounds * (w.target_layers * w.weight_bytes_target_pass +
                                          2 * w.state_bytes_target * w.target_layers);
    const uint64_t draft_weights = w.rounds * w.draft_layers * w.weight_bytes_draft_pass;
    CHECK(b.total == baseline + draft_weights);
    CHECK(b.draft_state_bytes == 0);
}

TEST_CASE("doubling state bytes doubles naive state traffic, anchors stay anchors") {
    transfer_workload w = desk_workload(8);
    const transfer_breakdown a = transfer_bytes(transfer_policy::naive_spec, w);
    const transfer_breakdown a2 = [&] {
        transfer_workload w2 = w;
        w2.state_bytes_target *= 2;
        return transfer_bytes(transfer_policy::naive_spec, w2);
    }();
    CHECK(a2.target_state_bytes == 2 * a.target_state_bytes);

    const transfer_breakdown h = transfer_bytes(transfer_policy::t1_t2, w);
    // anchor term: exactly one write + one read per round, no per-node scaling
    CHECK(h.target_state_bytes ==
          w.rounds * 2 * w.state_bytes_target * w.target_layers);
}

TEST_CASE("unknown policy string is rejected") {
    CHECK_THROWS_AS(transfer_policy_from_string("bogus"), usage_error);
    CHECK(transfer_policy_from_string("t1_t2") == transfer_policy::t1_t2);
}

TEST_CASE("ablation: all toggles versus none improves latency for trees") {
    ablation_scenario sc;
    sc.prefill_len   = 64;
    sc.decode_len    = 512;
    sc.mean_accepted = 2.5;
    sc.workload      = desk_workload(16);
    const cost_report off = ablation_run({false, false, false}, sc);
    const cost_report on  = ablation_run({true, true, true}, sc);
    CHECK(off.total_cycles > on.total_cycles);
    CHECK(off.offchip_bytes > on.offchip_bytes);
    CHECK(static_cast<double>(off.total_cycles) / static_cast<double>(on.total_cycles) > 1.0);
}

TEST_CASE("ablation report satisfies the total >= max(linear, ssm) invariant") {
    ablation_scenario sc;
    sc.workload = desk_workload(8);
    for (const bool t3 : {false, true}) {
        const cost_report r = ablation_run({true, true, t3}, sc);
        CHECK(r.total_cycles >= r.linear_cycles);
        CHECK(r.total_cycles >= r.ssm_cycles);
    }
}

TEST_CASE("serialized over overlapped ratio at L == T") {
    // with only T3 toggled the per-pass ratio is (B*T + L*B) / (B*T + L)
    ablation_scenario sc;
    sc.prefill_len   = 0;
    sc.decode_len    = 100;
    sc.mean_accepted = 100.0;   // a single round
    sc.workload      = desk_workload(7);   // m = 8 tokens verified
    sc.workload.draft_layers = 0;          // isolate the verification pass
    sc.cost.blocks_b = 4;
    sc.cost.tiles_t  = 8;

    const cost_report serial  = ablation_run({true, true, false}, sc);
    const cost_report overlap = ablation_run({true, true, true}, sc);
    const uint64_t transfer = serial.breakdown.at("transfer_cycles");
    const double num = static_cast<double>(serial.total_cycles - transfer);
    const double den = static_cast<double>(overlap.total_cycles - transfer);
    CHECK(num / den == doctest::Approx((4.0 * 8 + 8 * 4) / (4.0 * 8 + 8)));
}

TEST_CASE("production-scale footprint crosses one gibibyte") {
    const uint64_t bytes = full_tree_state_footprint(16, 64, 80, 64, 128, 2);
    CHECK(bytes > (1ull << 30));
    CHECK(bytes == 1342177280ull);
}
