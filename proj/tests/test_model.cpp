#include "specssm/model.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace specssm;

namespace {

model_config small_cfg() {
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

bool weights_equal(const model_weights & a, const model_weights & b) {
    if (a.embedding.data != b.embedding.data) return false;
    if (a.norm_final.data != b.norm_final.data) return false;
    for (size_t l = 0; l < a.layers.size(); ++l) {
        const auto & x = a.layers[l];
        const auto & y = b.layers[l];
        if (x.in_proj.data != y.in_proj.data || x.conv.data != y.conv.data ||
            x.a_log.data != y.a_log.data || x.d_skip.data != y.d_skip.data ||
            x.out_proj.data != y.out_proj.data || x.norm_in.data != y.norm_in.data ||
            x.norm_ssm.data != y.norm_ssm.data) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("init_weights is deterministic, negative A, seed-sensitive") {
    const model_config cfg = small_cfg();
    const model_weights a = init_weights(cfg, 9);
    const model_weights b = init_weights(cfg, 9);
    CHECK(weights_equal(a, b));
    for (const auto & l : a.layers) {
        for (float v : l.a_log.data) CHECK(v < 0.0f);
    }
    const model_weights c = init_weights(cfg, 10);
    CHECK(!weights_equal(a, c));
}

TEST_CASE("discretize closed forms") {
    const tensor zero({2}, {0.0f, 0.0f});
    const tensor a({2}, {-0.7f, -2.0f});
    const tensor r0 = discretize(zero, a, false);
    CHECK(r0.at(0) == 1.0f);
    CHECK(r0.at(1) == 1.0f);

    const tensor one({1}, {1.0f});
    const tensor ln2({1}, {-static_cast<float>(std::log(2.0))});
    CHECK(discretize(one, ln2, false).at(0) == doctest::Approx(0.5).epsilon(1e-6));

    rng_stream rng(3);
    for (int i = 0; i < 50; ++i) {
        const tensor d({1}, {static_cast<float>(0.001 + 2.0 * rng.next_uniform())});
        const tensor av({1}, {static_cast<float>(-0.01 - 3.0 * rng.next_uniform())});
        const float ab = discretize(d, av, false).at(0);
        CHECK(ab > 0.0f);
        CHECK(ab < 1.0f);
    }
}

TEST_CASE("ssm_step hand-evaluated h=p=1 n=2 case under both readouts") {
    const tensor state({1, 2}, {1.0f, 1.0f});
    const tensor a_bar({1}, {0.5f});
    const tensor delta_x({1}, {2.0f});
    const tensor b({2}, {0.25f, 0.5f});
    const tensor c({2}, {1.0f, 1.0f});
    const tensor d({1}, {1.0f});
    const tensor x({1}, {2.0f});

    const ssm_step_result prev =
        ssm_step(state, a_bar, delta_x, b, c, d, x, 1, state_readout::previous);
    CHECK(prev.new_state.at(0, 0) == doctest::Approx(1.0));
    CHECK(prev.new_state.at(0, 1) == doctest::Approx(1.5));
    CHECK(prev.y.at(0) == doctest::Approx(4.0));

    const ssm_step_result cur =
        ssm_step(state, a_bar, delta_x, b, c, d, x, 1, state_readout::current);
    CHECK(cur.y.at(0) == doctest::Approx(4.5));
}

TEST_CASE("ssm_step zero state and zero readout") {
    const tensor state({2, 3});
    const tensor a_bar({2}, {0.5f, 0.25f});
    const tensor delta_x({2}, {2.0f, 3.0f});
    const tensor b({3}, {1.0f, 2.0f, 4.0f});
    const tensor c0({3});
    const tensor d0({2});
    const tensor x({2}, {1.0f, 1.0f});
    const ssm_step_result r =
        ssm_step(state, a_bar, delta_x, b, c0, d0, x, 1, state_readout::previous);
    for (int64_t i = 0; i < 2; ++i) {
        for (int64_t l = 0; l < 3; ++l) {
            CHECK(r.new_state.at(i, l) == delta_x.at(i) * b.at(l));
        }
        CHECK(r.y.at(i) == 0.0f);
    }
}

TEST_CASE("tiled step reconstructs the full step bitwise for every divisor") {
    const model_config cfg = small_cfg();
    rng_stream rng(77);
    const int64_t di = cfg.d_inner(), n = cfg.state_dim;
    tensor state({di, n}), x({di}), delta_x({di});
    tensor a_bar({cfg.n_heads}), d({cfg.n_heads});
    tensor b({n}), c({n});
    for (float & v : state.data) v = static_cast<float>(rng.next_normal());
    for (float & v : x.data) v = static_cast<float>(rng.next_normal());
    for (float & v : delta_x.data) v = static_cast<float>(rng.next_normal());
    for (float & v : b.data) v = static_cast<float>(rng.next_normal());
    for (float & v : c.data) v = static_cast<float>(rng.next_normal());
    for (float & v : a_bar.data) v = static_cast<float>(0.1 + 0.8 * rng.next_uniform());
    for (float & v : d.data) v = static_cast<float>(rng.next_normal());

    for (state_readout ro : {state_readout::previous, state_readout::current}) {
        const ssm_step_result full =
            ssm_step(state, a_bar, delta_x, b, c, d, x, cfg.head_dim, ro);
        for (int64_t g = 1; g <= di; ++g) {
            if (di % g) continue;
            tensor rec({di, n});
            tensor yrec({di});
            // permuted tile order must not matter
            for (int64_t it = di / g - 1; it >= 0; --it) {
                const int64_t row0 = it * g;
                tensor tile({g, n});
                std::vector<float> ar(static_cast<size_t>(g)), dxr(static_cast<size_t>(g)),
                    dr(static_cast<size_t>(g)), xr(static_cast<size_t>(g));
                for (int64_t r = 0; r < g; ++r) {
                    for (int64_t l = 0; l < n; ++l) tile.at(r, l) = state.at(row0 + r, l);
                    ar[static_cast<size_t>(r)]  = a_bar.at((row0 + r) / cfg.head_dim);
                    dxr[static_cast<size_t>(r)] = delta_x.at(row0 + r);
                    dr[static_cast<size_t>(r)]  = d.at((row0 + r) / cfg.head_dim);
                    xr[static_cast<size_t>(r)]  = x.at(row0 + r);
                }
                const tiled_step_result t = tiled_ssm_step(tile, ar, dxr, b, c, dr, xr, ro);
                for (int64_t r = 0; r < g; ++r) {
                    for (int64_t l = 0; l < n; ++l) rec.at(row0 + r, l) = t.new_tile.at(r, l);
                    yrec.at(row0 + r) = t.y_rows[static_cast<size_t>(r)];
                }
            }
            CHECK(rec.data == full.new_state.data);
            CHECK(yrec.data == full.y.data);
        }
    }
}

TEST_CASE("block_step twice equals two-token conv+scan processing") {
    const model_config cfg = small_cfg();
    const model_weights w = init_weights(cfg, 21);
    rng_stream rng(22);
    tensor x1({cfg.d_model}), x2({cfg.d_model});
    for (float & v : x1.data) v = static_cast<float>(rng.next_normal());
    for (float & v : x2.data) v = static_cast<float>(rng.next_normal());

    layer_state s0 = layer_state::zeros(cfg);
    const block_step_result r1 = block_step(cfg, w.layers[0], s0, x1);
    const block_step_result r2 = block_step(cfg, w.layers[0], r1.new_state, x2);

    // oracle: run the conv over the 2-token sequence in one call and fold the
    // recurrence by hand from the recorded activations
    {
        using namespace ops;
        const tensor xn1 = rmsnorm(x1, w.layers[0].norm_in, 1e-5f);
        const tensor xn2 = rmsnorm(x2, w.layers[0].norm_in, 1e-5f);
        const tensor p1 = matmul(tensor({1, cfg.d_model}, xn1.data), w.layers[0].in_proj);
        const tensor p2 = matmul(tensor({1, cfg.d_model}, xn2.data), w.layers[0].in_proj);
        tensor seq({2, cfg.d_inner()});
        for (int64_t c = 0; c < cfg.d_inner(); ++c) {
            seq.at(0, c) = p1.at(0, c);
            seq.at(1, c) = p2.at(0, c);
        }
        const conv_result conv = causal_conv1d(seq, w.layers[0].conv, s0.conv_tail);
        // token 2's conv output must match the one block_step produced
        const tensor xc2 = activation(activation_kind::silu,
                                      tensor({cfg.d_inner()},
                                             {conv.out.data.begin() + cfg.d_inner(),
                                              conv.out.data.end()}));
        for (int64_t c = 0; c < cfg.d_inner(); ++c) {
            CHECK(r2.acts.x_conv.at(c) == doctest::Approx(xc2.at(c)).epsilon(1e-6));
        }
        CHECK(conv.new_tail.data == r2.new_state.conv_tail.data);
    }
    CHECK(r2.new_state.ssm.shape == std::vector<int64_t>{cfg.d_inner(), cfg.state_dim});
}

TEST_CASE("block_step keeps the state byte size fixed") {
    const model_config cfg = small_cfg();
    const model_weights w = init_weights(cfg, 4);
    layer_state s = layer_state::zeros(cfg);
    const int64_t bytes = s.byte_size();
    rng_stream rng(5);
    tensor x({cfg.d_model});
    for (float & v : x.data) v = static_cast<float>(rng.next_normal());
    const block_step_result r = block_step(cfg, w.layers[0], s, x);
    CHECK(r.new_state.byte_size() == bytes);
    CHECK(bytes == (cfg.d_inner() * cfg.state_dim + (cfg.conv_kernel - 1) * cfg.d_inner()) * 4);
}

TEST_CASE("model_step determinism and logits length") {
    const model_config cfg = small_cfg();
    const model_weights w = init_weights(cfg, 31);
    model_state s1 = model_state::zeros(cfg);
    model_state s2 = model_state::zeros(cfg);
    const auto r1 = model_step(w, s1, 3);
    const auto r2 = model_step(w, s2, 3);
    CHECK(r1.logits.data == r2.logits.data);
    CHECK(r1.logits.numel() == cfg.vocab);
    CHECK(s1.position == 1);

    model_state s3 = model_state::zeros(cfg);
    CHECK_THROWS_AS(model_step(w, s3, cfg.vocab), usage_error);
}

TEST_CASE("prefill equals folding model_step, under both readouts") {
    for (state_readout ro : {state_readout::previous, state_readout::current}) {
        model_config cfg = small_cfg();
        cfg.readout = ro;
        const model_weights w = init_weights(cfg, 41);
        rng_stream rng(42);
        for (int trial = 0; trial < 5; ++trial) {
            const int64_t len = 1 + static_cast<int64_t>(rng.next_u64() % 16);
            std::vector<int64_t> tokens;
            for (int64_t i = 0; i < len; ++i) {
                tokens.push_back(static_cast<int64_t>(rng.next_u64() %
                                                      static_cast<uint64_t>(cfg.vocab)));
            }
            const prefill_result pf = prefill(w, tokens);

            model_state s = model_state::zeros(cfg);
            tensor logits;
            for (int64_t t : tokens) logits = model_step(w, s, t).logits;
            CHECK(pf.state.bitwise_equal(s));
            CHECK(pf.last_logits.data == logits.data);
            CHECK(pf.state.position == len);
        }
    }
    CHECK_THROWS_AS(prefill(init_weights(small_cfg(), 1), {}), usage_error);
}

TEST_CASE("prefill splits like a fold over segments") {
    const model_config cfg = small_cfg();
    const model_weights w = init_weights(cfg, 51);
    const std::vector<int64_t> a = {1, 2, 3};
    const std::vector<int64_t> b = {4, 5};
    std::vector<int64_t> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());

    const prefill_result whole = prefill(w, ab);
    prefill_result part = prefill(w, a);
    tensor logits = part.last_logits;
    for (int64_t t : b) logits = model_step(w, part.state, t).logits;
    CHECK(part.state.bitwise_equal(whole.state));
    CHECK(logits.data == whole.last_logits.data);
}

TEST_CASE("zero input with zero projections stays at zero") {
    model_config cfg = small_cfg();
    model_weights w = init_weights(cfg, 61);
    for (auto & l : w.layers) {
        for (float & v : l.in_proj.data) v = 0.0f;
        for (float & v : l.out_proj.data) v = 0.0f;
    }
    layer_state s = layer_state::zeros(cfg);
    tensor x({cfg.d_model});
    const block_step_result r = block_step(cfg, w.layers[0], s, x);
    for (float v : r.x_out.data) CHECK(v == 0.0f);
    for (float v : r.new_state.ssm.data) CHECK(v == 0.0f);
}

TEST_CASE("state norm contracts under zero drive") {
    // a_bar in (0,1) and delta_x = 0: the recurrence pure-decays
    const model_config cfg = small_cfg();
    rng_stream rng(72);
    tensor state({cfg.d_inner(), cfg.state_dim});
    for (float & v : state.data) v = static_cast<float>(rng.next_normal());
    tensor a_bar({cfg.n_heads});
    for (float & v : a_bar.data) v = static_cast<float>(0.05 + 0.9 * rng.next_uniform());
    const tensor zero_dx({cfg.d_inner()});
    const tensor b({cfg.state_dim}), c({cfg.state_dim}), d({cfg.n_heads});
    const tensor x({cfg.d_inner()});

    double prev = 1e300;
    for (int step = 0; step < 10; ++step) {
        const ssm_step_result r =
            ssm_step(state, a_bar, zero_dx, b, c, d, x, cfg.head_dim, state_readout::previous);
        double norm = 0.0;
        for (float v : r.new_state.data) norm += static_cast<double>(v) * v;
        CHECK(norm < prev);
        prev  = norm;
        state = r.new_state;
    }

    // at the block level the conv tail drains after k-1 zero inputs, then the
    // same pure decay applies
    const model_weights w = init_weights(cfg, 71);
    tensor xin({cfg.d_model});
    for (float & v : xin.data) v = static_cast<float>(rng.next_normal());
    layer_state cur = layer_state::zeros(cfg);
    cur = block_step(cfg, w.layers[0], cur, xin).new_state;
    const tensor zero_in({cfg.d_model});
    for (int64_t k = 0; k < cfg.conv_kernel - 1; ++k) {
        cur = block_step(cfg, w.layers[0], cur, zero_in).new_state;
    }
    double prev_norm = 1e300;
    for (int step = 0; step < 6; ++step) {
        cur = block_step(cfg, w.layers[0], cur, zero_in).new_state;
        double norm = 0.0;
        for (float v : cur.ssm.data) norm += static_cast<double>(v) * v;
        CHECK(norm <= prev_norm);
        prev_norm = norm;
    }
}

TEST_CASE("linear discretization mode switches the decay form") {
    model_config cfg = small_cfg();
    cfg.linear_discretization = true;
    const tensor d({1}, {0.5f});
    const tensor a({1}, {-2.0f});
    CHECK(discretize(d, a, true).at(0) == doctest::Approx(-1.0));
    // a full step still runs and stays finite
    const model_weights w = init_weights(cfg, 81);
    model_state s = model_state::zeros(cfg);
    const auto r = model_step(w, s, 1);
    for (float v : r.logits.data) CHECK(std::isfinite(v));
}

TEST_CASE("weight files round-trip bit-exactly") {
    const model_config cfg = small_cfg();
    const model_weights w = init_weights(cfg, 91);
    const std::string path =
        (std::filesystem::temp_directory_path() / "specssm_w_test.bin").string();
    save_weights(w, path);
    const model_weights r = load_weights(path);
    CHECK(weights_equal(w, r));
    CHECK(r.config.n_layers == cfg.n_layers);
    CHECK(r.config.vocab == cfg.vocab);
    std::filesystem::remove(path);
}
