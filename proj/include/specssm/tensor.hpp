#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace specssm {

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto exit codes, tests match on type.
// ---------------------------------------------------------------------------
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct dimension_error : error { using error::error; };
struct config_error    : error { using error::error; };
struct usage_error     : error { using error::error; };
struct not_found_error : error { using error::error; };
struct numeric_error   : error { using error::error; };
struct structure_error : error { using error::error; };
struct capacity_error  : error { using error::error; };
struct io_error        : error { using error::error; };

// ---------------------------------------------------------------------------
// Dense row-major float32 tensor. Small and value-semantic; every kernel in
// this project works on these.
// ---------------------------------------------------------------------------
struct tensor {
    std::vector<int64_t> shape;
    std::vector<float>   data;

    tensor() = default;
    explicit tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
    }
    tensor(std::vector<int64_t> s, std::vector<float> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape)) {
            throw dimension_error("tensor: data length does not match shape");
        }
    }

    static int64_t numel_of(const std::vector<int64_t> & s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d < 0) throw dimension_error("tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t dim(size_t i) const { return shape.at(i); }

    float & at(int64_t i) { return data[static_cast<size_t>(i)]; }
    float   at(int64_t i) const { return data[static_cast<size_t>(i)]; }
    float & at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
    float   at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }

    bool same_shape(const tensor & o) const { return shape == o.shape; }
};

// ---------------------------------------------------------------------------
// Counter-based RNG stream. splitmix64 applied to (seed, counter) so a stream
// is a pure function of its two fields; identical seeds replay identically on
// any platform. Each logical consumer owns its own stream.
// ---------------------------------------------------------------------------
struct rng_stream {
    uint64_t seed    = 0;
    uint64_t counter = 0;

    explicit rng_stream(uint64_t s = 0) : seed(s) {}

    uint64_t next_u64() {
        uint64_t z = seed + (counter++) * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit resolution
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; consumes two draws
    double next_normal();
};

// Stable fan-out: one top-level seed, labeled child streams.
uint64_t derive_seed(uint64_t seed, const std::string & label);
uint64_t derive_seed(uint64_t seed, const std::string & label, uint64_t index);

namespace ops {

// C = A(m x k) * B(k x n), fixed left-to-right accumulation over k.
tensor matmul(const tensor & a, const tensor & b);

// out_i = x_i / sqrt(mean(x^2) + eps) * weight_i
tensor rmsnorm(const tensor & x, const tensor & weight, float eps);

enum class activation_kind { softplus, silu, exp };
tensor activation(activation_kind kind, const tensor & x);

float softplus_scalar(float v);
float silu_scalar(float v);

// Depthwise causal 1-d convolution over a [len x channels] sequence.
// `kernel` is [channels x k]; `tail` carries the k-1 inputs preceding `seq`
// (zeros at sequence start). Returns the outputs and the updated tail.
struct conv_result {
    tensor out;
    tensor new_tail;
};
conv_result causal_conv1d(const tensor & seq, const tensor & kernel, const tensor & tail);

// softmax(logits / temperature); temperature 0 is handled by sample_token.
std::vector<double> softmax(const tensor & logits, double temperature);

int64_t argmax(const tensor & logits);

// temperature 0 -> argmax (lowest index wins ties); otherwise samples the
// softmax at the given temperature using one uniform draw.
int64_t sample_token(const tensor & logits, double temperature, rng_stream & rng);

void check_finite(const tensor & t, const char * what);

} // namespace ops
} // namespace specssm
