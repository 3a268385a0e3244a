#pragma once

#include "specssm/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace specssm {

// Which hidden state Eq-style readout y = C*h + D*x uses: the state before
// this token's update or the freshly updated one. Both are supported and all
// sequential/tree paths honor the same choice.
enum class state_readout { previous, current };

struct model_config {
    int64_t n_layers    = 2;
    int64_t d_model     = 16;
    int64_t n_heads     = 2;   // h
    int64_t head_dim    = 4;   // p
    int64_t state_dim   = 8;   // n
    int64_t conv_kernel = 3;   // k
    int64_t vocab       = 48;  // V

    state_readout readout = state_readout::previous;
    // Literal-prose discretization a_bar = delta * A instead of exp(delta*A).
    // Experimental; the exponential form is the default.
    bool linear_discretization = false;
    // When >= 0, the embedding table is drawn from this seed instead of the
    // weight seed, so two models can share a vocabulary geometry.
    int64_t embed_seed = -1;

    int64_t d_inner() const { return n_heads * head_dim; }   // h*p, the tiled axis D
    int64_t in_proj_cols() const { return d_inner() + 2 * state_dim + n_heads; }

    void validate() const;
};

struct layer_weights {
    tensor in_proj;    // d_model x (d_inner + 2n + h)
    tensor conv;       // d_inner x k
    tensor a_log;      // h, strictly negative
    tensor d_skip;     // h
    tensor out_proj;   // d_inner x d_model
    tensor norm_in;    // d_model
    tensor norm_ssm;   // d_inner
};

struct model_weights {
    model_config config;
    tensor embedding;  // V x d_model, also the tied output head
    tensor norm_final; // d_model
    std::vector<layer_weights> layers;
};

// Per-layer recurrent state: the SSM hidden state stored as (h*p) x n rows
// plus the causal-conv tail of the last k-1 inputs.
struct layer_state {
    tensor ssm;        // (h*p) x n
    tensor conv_tail;  // (k-1) x d_inner

    static layer_state zeros(const model_config & cfg);
    int64_t byte_size() const {
        return (ssm.numel() + conv_tail.numel()) * static_cast<int64_t>(sizeof(float));
    }
    bool bitwise_equal(const layer_state & o) const;
};

struct model_state {
    std::vector<layer_state> layers;
    int64_t position = 0;   // tokens absorbed so far

    static model_state zeros(const model_config & cfg);
    int64_t byte_size() const;
    bool bitwise_equal(const model_state & o) const;
};

// Seeded deterministic weights. A entries are -softplus(gaussian) so the
// exponential discretization lands in (0,1); projections scale 1/sqrt(fan_in).
model_weights init_weights(const model_config & cfg, uint64_t seed);

// a_bar[i] = exp(delta[i] * A[i]) (or delta*A in literal mode)
tensor discretize(const tensor & delta, const tensor & a_log, bool linear_mode);

// One SSM recurrence step over the full (h*p) x n state.
//   new_state[r,l] = a_bar[head(r)] * state[r,l] + delta_x[r] * B[l]
//   y[r]           = sum_l C[l] * s[r,l] + D[head(r)] * x[r]
// with s = state or new_state per the readout convention.
struct ssm_step_result {
    tensor new_state;  // (h*p) x n
    tensor y;          // h*p
};
ssm_step_result ssm_step(const tensor & state, const tensor & a_bar, const tensor & delta_x,
                         const tensor & b_vec, const tensor & c_vec, const tensor & d_skip,
                         const tensor & x, int64_t head_dim, state_readout readout);

// Same arithmetic restricted to G contiguous rows [row0, row0+G). The row-level
// per-head scalars are passed pre-gathered.
struct tiled_step_result {
    tensor new_tile;   // G x n
    std::vector<float> y_rows;
};
tiled_step_result tiled_ssm_step(const tensor & state_tile,
                                 const std::vector<float> & a_bar_rows,
                                 const std::vector<float> & delta_x_rows,
                                 const tensor & b_vec, const tensor & c_vec,
                                 const std::vector<float> & d_rows,
                                 const std::vector<float> & x_rows,
                                 state_readout readout);

// The activations one token produces in one layer; everything the recurrence
// needs to be replayed without touching the linear layers again.
struct step_activations {
    tensor a_bar;      // h
    tensor b_vec;      // n
    tensor delta;      // h
    tensor x_conv;     // h*p, post conv+silu (the recurrence input X)
    tensor conv_in;    // h*p, pre-conv column (rebuilds conv tails)
};

struct block_step_result {
    layer_state new_state;
    tensor x_out;               // d_model
    step_activations acts;
    tensor c_vec;               // n (not needed for replay; kept for verification)
};

block_step_result block_step(const model_config & cfg, const layer_weights & w,
                             const layer_state & state, const tensor & x_in);

struct model_step_result {
    tensor logits;                            // V
    std::vector<step_activations> layer_acts; // per layer
};

// Absorb one token: embed -> n_layers blocks -> final norm -> tied head.
model_step_result model_step(const model_weights & w, model_state & state, int64_t token);

struct prefill_result {
    model_state state;
    tensor last_logits;
};
prefill_result prefill(const model_weights & w, const std::vector<int64_t> & tokens);

// Replays the recurrence of one layer over a run of cached activations.
// No linear-layer work; bitwise-identical to the original pass.
layer_state replay_layer(const model_config & cfg, const layer_state & base,
                         const std::vector<const step_activations *> & steps,
                         state_readout readout);

// --- weight file io ---------------------------------------------------------
// Binary format: u32 little-endian header length, JSON header (config +
// per-tensor float offsets), then the flat float32 payload.
void save_weights(const model_weights & w, const std::string & path);
model_weights load_weights(const std::string & path);

} // namespace specssm
