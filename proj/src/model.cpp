#include "specssm/model.hpp"

#include <algorithm>
#include <cmath>

namespace specssm {

using namespace ops;

static constexpr float k_norm_eps     = 1e-5f;
static constexpr float k_delta_floor  = 1e-4f;
static constexpr float k_delta_ceil   = 1e2f;

void model_config::validate() const {
    if (n_layers < 1 || d_model < 1 || n_heads < 1 || head_dim < 1 ||
        state_dim < 1 || conv_kernel < 1 || vocab < 1) {
        throw config_error("model_config: all dimensions must be >= 1");
    }
}

layer_state layer_state::zeros(const model_config & cfg) {
    layer_state s;
    s.ssm       = tensor({cfg.d_inner(), cfg.state_dim});
    s.conv_tail = tensor({cfg.conv_kernel - 1, cfg.d_inner()});
    return s;
}

bool layer_state::bitwise_equal(const layer_state & o) const {
    return ssm.shape == o.ssm.shape && ssm.data == o.ssm.data &&
           conv_tail.shape == o.conv_tail.shape && conv_tail.data == o.conv_tail.data;
}

model_state model_state::zeros(const model_config & cfg) {
    model_state s;
    s.layers.reserve(static_cast<size_t>(cfg.n_layers));
    for (int64_t i = 0; i < cfg.n_layers; ++i) s.layers.push_back(layer_state::zeros(cfg));
    return s;
}

int64_t model_state::byte_size() const {
    int64_t n = 0;
    for (const auto & l : layers) n += l.byte_size();
    return n;
}

bool model_state::bitwise_equal(const model_state & o) const {
    if (layers.size() != o.layers.size() || position != o.position) return false;
    for (size_t i = 0; i < layers.size(); ++i) {
        if (!layers[i].bitwise_equal(o.layers[i])) return false;
    }
    return true;
}

static tensor gaussian_tensor(std::vector<int64_t> shape, rng_stream & rng, float scale) {
    tensor t(std::move(shape));
    for (float & v : t.data) v = static_cast<float>(rng.next_normal()) * scale;
    return t;
}

model_weights init_weights(const model_config & cfg, uint64_t seed) {
    cfg.validate();
    model_weights w;
    w.config = cfg;

    {
        const uint64_t es = cfg.embed_seed >= 0 ? static_cast<uint64_t>(cfg.embed_seed) : seed;
        rng_stream rng(derive_seed(es, "embedding"));
        // kept small relative to the block outputs so the tied head does not
        // collapse greedy decoding into token self-loops
        w.embedding = gaussian_tensor({cfg.vocab, cfg.d_model}, rng, 0.5f);
    }
    {
        // random-signed final scale: with a tied head, an all-positive final
        // norm makes logits[tok] carry a +|embed(tok)|^2 self term, and greedy
        // decoding collapses into token self-loops
        const uint64_t es = cfg.embed_seed >= 0 ? static_cast<uint64_t>(cfg.embed_seed) : seed;
        rng_stream rng(derive_seed(es, "norm_final"));
        w.norm_final = tensor({cfg.d_model});
        for (float & v : w.norm_final.data) v = static_cast<float>(rng.next_normal());
    }

    w.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (int64_t l = 0; l < cfg.n_layers; ++l) {
        layer_weights & lw = w.layers[static_cast<size_t>(l)];
        const uint64_t ls = derive_seed(seed, "layer", static_cast<uint64_t>(l));

        rng_stream rin(derive_seed(ls, "in_proj"));
        lw.in_proj = gaussian_tensor({cfg.d_model, cfg.in_proj_cols()}, rin,
                                     1.0f / std::sqrt(static_cast<float>(cfg.d_model)));
        rng_stream rconv(derive_seed(ls, "conv"));
        lw.conv = gaussian_tensor({cfg.d_inner(), cfg.conv_kernel}, rconv,
                                  1.0f / std::sqrt(static_cast<float>(cfg.conv_kernel)));
        rng_stream ra(derive_seed(ls, "a_log"));
        lw.a_log = tensor({cfg.n_heads});
        for (float & v : lw.a_log.data) {
            // gaussians centered at -2.5 keep the decay close to 1, so states
            // integrate long histories instead of settling within a few steps
            v = -softplus_scalar(static_cast<float>(ra.next_normal()) - 2.5f);
        }
        rng_stream rd(derive_seed(ls, "d_skip"));
        lw.d_skip = gaussian_tensor({cfg.n_heads}, rd, 1.0f);
        rng_stream rout(derive_seed(ls, "out_proj"));
        lw.out_proj = gaussian_tensor({cfg.d_inner(), cfg.d_model}, rout,
                                      1.0f / std::sqrt(static_cast<float>(cfg.d_inner())));
        rng_stream rn1(derive_seed(ls, "norm_in"));
        lw.norm_in = tensor({cfg.d_model});
        for (float & v : lw.norm_in.data) v = 1.0f + 0.05f * static_cast<float>(rn1.next_normal());
        rng_stream rn2(derive_seed(ls, "norm_ssm"));
        lw.norm_ssm = tensor({cfg.d_inner()});
        for (float & v : lw.norm_ssm.data) v = 1.0f + 0.05f * static_cast<float>(rn2.next_normal());
    }
    return w;
}

tensor discretize(const tensor & delta, const tensor & a_log, bool linear_mode) {
    if (delta.numel() != a_log.numel()) {
        throw dimension_error("discretize: delta and A length mismatch");
    }
    tensor a_bar(delta.shape);
    for (int64_t i = 0; i < delta.numel(); ++i) {
        const float da = delta.at(i) * a_log.at(i);
        a_bar.at(i) = linear_mode ? da : std::exp(da);
    }
    return a_bar;
}

ssm_step_result ssm_step(const tensor & state, const tensor & a_bar, const tensor & delta_x,
                         const tensor & b_vec, const tensor & c_vec, const tensor & d_skip,
                         const tensor & x, int64_t head_dim, state_readout readout) {
    const int64_t rows = state.shape.at(0);
    const int64_t n    = state.shape.at(1);
    if (b_vec.numel() != n || c_vec.numel() != n) {
        throw dimension_error("ssm_step: B/C length must equal state_dim");
    }
    if (delta_x.numel() != rows || x.numel() != rows) {
        throw dimension_error("ssm_step: delta_x/x must cover all state rows");
    }
    if (a_bar.numel() * head_dim != rows || d_skip.numel() * head_dim != rows) {
        throw dimension_error("ssm_step: per-head vectors do not tile the rows");
    }

    ssm_step_result res;
    res.new_state = tensor({rows, n});
    res.y         = tensor({rows});
    for (int64_t r = 0; r < rows; ++r) {
        const int64_t head = r / head_dim;
        const float a  = a_bar.at(head);
        const float dx = delta_x.at(r);
        float yr = 0.0f;
        for (int64_t l = 0; l < n; ++l) {
            const float ns = a * state.at(r, l) + dx * b_vec.at(l);
            res.new_state.at(r, l) = ns;
            yr += c_vec.at(l) * (readout == state_readout::previous ? state.at(r, l) : ns);
        }
        res.y.at(r) = yr + d_skip.at(head) * x.at(r);
    }
    return res;
}

tiled_step_result tiled_ssm_step(const tensor & state_tile,
                                 const std::vector<float> & a_bar_rows,
                                 const std::vector<float> & delta_x_rows,
                                 const tensor & b_vec, const tensor & c_vec,
                                 const std::vector<float> & d_rows,
                                 const std::vector<float> & x_rows,
                                 state_readout readout) {
    const int64_t g = state_tile.shape.at(0);
    const int64_t n = state_tile.shape.at(1);
    if (static_cast<int64_t>(a_bar_rows.size()) != g ||
        static_cast<int64_t>(delta_x_rows.size()) != g ||
        static_cast<int64_t>(d_rows.size()) != g ||
        static_cast<int64_t>(x_rows.size()) != g) {
        throw dimension_error("tiled_ssm_step: row vectors must have G entries");
    }
    if (b_vec.numel() != n || c_vec.numel() != n) {
        throw dimension_error("tiled_ssm_step: B/C length must equal state_dim");
    }
    tiled_step_result res;
    res.new_tile = tensor({g, n});
    res.y_rows.resize(static_cast<size_t>(g));
    for (int64_t r = 0; r < g; ++r) {
        const float a  = a_bar_rows[static_cast<size_t>(r)];
        const float dx = delta_x_rows[static_cast<size_t>(r)];
        float yr = 0.0f;
        for (int64_t l = 0; l < n; ++l) {
            const float ns = a * state_tile.at(r, l) + dx * b_vec.at(l);
            res.new_tile.at(r, l) = ns;
            yr += c_vec.at(l) * (readout == state_readout::previous ? state_tile.at(r, l) : ns);
        }
        res.y_rows[static_cast<size_t>(r)] =
            yr + d_rows[static_cast<size_t>(r)] * x_rows[static_cast<size_t>(r)];
    }
    return res;
}

// Shared by block_step and the tree verifier: everything up to (and excluding)
// the state recurrence for one token in one layer.
struct block_preamble {
    tensor x_conv;   // h*p after conv + silu
    tensor b_vec;    // n
    tensor c_vec;    // n
    tensor delta;    // h, clamped softplus
    tensor a_bar;    // h
    tensor delta_x;  // h*p
    tensor conv_in;  // h*p pre-conv column
    tensor new_tail; // (k-1) x h*p
};

static block_preamble block_linear_phase(const model_config & cfg, const layer_weights & w,
                                         const tensor & conv_tail, const tensor & x_in) {
    block_preamble pre;
    const tensor xn   = rmsnorm(x_in, w.norm_in, k_norm_eps);
    const tensor xrow({1, cfg.d_model}, xn.data);
    const tensor proj = matmul(xrow, w.in_proj);

    const int64_t di = cfg.d_inner(), n = cfg.state_dim, h = cfg.n_heads;
    pre.conv_in = tensor({di});
    std::copy(proj.data.begin(), proj.data.begin() + di, pre.conv_in.data.begin());
    pre.b_vec = tensor({n});
    std::copy(proj.data.begin() + di, proj.data.begin() + di + n, pre.b_vec.data.begin());
    pre.c_vec = tensor({n});
    std::copy(proj.data.begin() + di + n, proj.data.begin() + di + 2 * n, pre.c_vec.data.begin());
    tensor delta_pre({h});
    std::copy(proj.data.begin() + di + 2 * n, proj.data.end(), delta_pre.data.begin());

    const tensor conv_row({1, di}, pre.conv_in.data);
    conv_result conv = causal_conv1d(conv_row, w.conv, conv_tail);
    pre.new_tail = std::move(conv.new_tail);
    pre.x_conv   = activation(activation_kind::silu, tensor({di}, std::move(conv.out.data)));

    pre.delta = tensor({h});
    for (int64_t i = 0; i < h; ++i) {
        pre.delta.at(i) = std::clamp(softplus_scalar(delta_pre.at(i)), k_delta_floor, k_delta_ceil);
    }
    pre.a_bar = discretize(pre.delta, w.a_log, cfg.linear_discretization);

    pre.delta_x = tensor({di});
    for (int64_t r = 0; r < di; ++r) {
        pre.delta_x.at(r) = pre.delta.at(r / cfg.head_dim) * pre.x_conv.at(r);
    }
    return pre;
}

// y -> norm -> out_proj -> residual
static tensor block_output_phase(const model_config & cfg, const layer_weights & w,
                                 const tensor & y, const tensor & x_in) {
    const tensor yn = rmsnorm(y, w.norm_ssm, k_norm_eps);
    const tensor yrow({1, cfg.d_inner()}, yn.data);
    const tensor out = matmul(yrow, w.out_proj);
    tensor x_out({cfg.d_model});
    for (int64_t i = 0; i < cfg.d_model; ++i) x_out.at(i) = x_in.at(i) + out.at(i);
    return x_out;
}

block_step_result block_step(const model_config & cfg, const layer_weights & w,
                             const layer_state & state, const tensor & x_in) {
    block_preamble pre = block_linear_phase(cfg, w, state.conv_tail, x_in);
    ssm_step_result step = ssm_step(state.ssm, pre.a_bar, pre.delta_x, pre.b_vec, pre.c_vec,
                                    w.d_skip, pre.x_conv, cfg.head_dim, cfg.readout);

    block_step_result res;
    res.x_out = block_output_phase(cfg, w, step.y, x_in);
    res.new_state.ssm       = std::move(step.new_state);
    res.new_state.conv_tail = std::move(pre.new_tail);
    res.acts.a_bar   = std::move(pre.a_bar);
    res.acts.b_vec   = std::move(pre.b_vec);
    res.acts.delta   = std::move(pre.delta);
    res.acts.x_conv  = std::move(pre.x_conv);
    res.acts.conv_in = std::move(pre.conv_in);
    res.c_vec = std::move(pre.c_vec);
    return res;
}

model_step_result model_step(const model_weights & w, model_state & state, int64_t token) {
    const model_config & cfg = w.config;
    if (token < 0 || token >= cfg.vocab) {
        throw usage_error("model_step: token " + std::to_string(token) + " out of range");
    }
    if (static_cast<int64_t>(state.layers.size()) != cfg.n_layers) {
        throw dimension_error("model_step: state layer count mismatch");
    }

    tensor x({cfg.d_model});
    for (int64_t i = 0; i < cfg.d_model; ++i) x.at(i) = w.embedding.at(token, i);

    model_step_result res;
    res.layer_acts.reserve(static_cast<size_t>(cfg.n_layers));
    for (int64_t l = 0; l < cfg.n_layers; ++l) {
        block_step_result blk = block_step(cfg, w.layers[static_cast<size_t>(l)],
                                           state.layers[static_cast<size_t>(l)], x);
        state.layers[static_cast<size_t>(l)] = std::move(blk.new_state);
        x = std::move(blk.x_out);
        res.layer_acts.push_back(std::move(blk.acts));
    }
    state.position += 1;

    const tensor xf = rmsnorm(x, w.norm_final, k_norm_eps);
    res.logits = tensor({cfg.vocab});
    for (int64_t v = 0; v < cfg.vocab; ++v) {
        float acc = 0.0f;
        for (int64_t i = 0; i < cfg.d_model; ++i) acc += w.embedding.at(v, i) * xf.at(i);
        res.logits.at(v) = acc;
    }
    ops::check_finite(res.logits, "model_step logits");
    return res;
}

prefill_result prefill(const model_weights & w, const std::vector<int64_t> & tokens) {
    if (tokens.empty()) throw usage_error("prefill: empty prompt");
    prefill_result res;
    res.state = model_state::zeros(w.config);
    for (int64_t t : tokens) {
        res.last_logits = model_step(w, res.state, t).logits;
    }
    return res;
}

layer_state replay_layer(const model_config & cfg, const layer_state & base,
                         const std::vector<const step_activations *> & steps,
                         state_readout /*readout*/) {
    // The readout does not feed the recurrence, so replay only folds the state
    // update; conv tails are rebuilt from the cached pre-conv columns.
    layer_state cur = base;
    for (const step_activations * a : steps) {
        tensor delta_x({cfg.d_inner()});
        for (int64_t r = 0; r < cfg.d_inner(); ++r) {
            delta_x.at(r) = a->delta.at(r / cfg.head_dim) * a->x_conv.at(r);
        }
        tensor next({cfg.d_inner(), cfg.state_dim});
        for (int64_t r = 0; r < cfg.d_inner(); ++r) {
            const float ab = a->a_bar.at(r / cfg.head_dim);
            const float dx = delta_x.at(r);
            for (int64_t l = 0; l < cfg.state_dim; ++l) {
                next.at(r, l) = ab * cur.ssm.at(r, l) + dx * a->b_vec.at(l);
            }
        }
        cur.ssm = std::move(next);

        const int64_t km1 = cfg.conv_kernel - 1;
        tensor tail({km1, cfg.d_inner()});
        for (int64_t r = 0; r < km1; ++r) {
            for (int64_t c = 0; c < cfg.d_inner(); ++c) {
                tail.at(r, c) = r + 1 < km1 ? cur.conv_tail.at(r + 1, c) : a->conv_in.at(c);
            }
        }
        cur.conv_tail = std::move(tail);
    }
    return cur;
}

} // namespace specssm
