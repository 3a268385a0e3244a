#include "specssm/tensor.hpp"

#include <cmath>
#include <cstring>

namespace specssm {

double rng_stream::next_normal() {
    // Box-Muller, cosine branch only. u1 is nudged away from zero so the log
    // stays finite.
    double u1 = next_uniform();
    double u2 = next_uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

static uint64_t fnv1a64(const std::string & s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

uint64_t derive_seed(uint64_t seed, const std::string & label) {
    rng_stream mix(seed ^ fnv1a64(label));
    return mix.next_u64();
}

uint64_t derive_seed(uint64_t seed, const std::string & label, uint64_t index) {
    rng_stream mix(seed ^ fnv1a64(label) ^ (0x9E3779B97F4A7C15ull * (index + 1)));
    return mix.next_u64();
}

namespace ops {

tensor matmul(const tensor & a, const tensor & b) {
    if (a.shape.size() != 2 || b.shape.size() != 2) {
        throw dimension_error("matmul: operands must be rank-2");
    }
    const int64_t m = a.shape[0], k = a.shape[1];
    const int64_t k2 = b.shape[0], n = b.shape[1];
    if (k != k2) {
        throw dimension_error("matmul: inner dimensions disagree (" +
                              std::to_string(k) + " vs " + std::to_string(k2) + ")");
    }
    tensor c({m, n});
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int64_t l = 0; l < k; ++l) {
                acc += a.at(i, l) * b.at(l, j);
            }
            c.at(i, j) = acc;
        }
    }
    return c;
}

tensor rmsnorm(const tensor & x, const tensor & weight, float eps) {
    if (x.numel() != weight.numel()) {
        throw dimension_error("rmsnorm: weight length does not match input");
    }
    if (x.numel() < 1) throw dimension_error("rmsnorm: empty input");
    const int64_t d = x.numel();
    float ssq = 0.0f;
    for (int64_t i = 0; i < d; ++i) ssq += x.at(i) * x.at(i);
    const float inv = 1.0f / std::sqrt(ssq / static_cast<float>(d) + eps);
    tensor out(x.shape);
    for (int64_t i = 0; i < d; ++i) out.at(i) = x.at(i) * inv * weight.at(i);
    return out;
}

float softplus_scalar(float v) {
    // log1p(exp(v)) with the usual large-input guard
    if (v > 20.0f) return v;
    return std::log1p(std::exp(v));
}

float silu_scalar(float v) {
    return v / (1.0f + std::exp(-v));
}

tensor activation(activation_kind kind, const tensor & x) {
    tensor out(x.shape);
    const int64_t n = x.numel();
    switch (kind) {
        case activation_kind::softplus:
            for (int64_t i = 0; i < n; ++i) out.at(i) = softplus_scalar(x.at(i));
            break;
        case activation_kind::silu:
            for (int64_t i = 0; i < n; ++i) out.at(i) = silu_scalar(x.at(i));
            break;
        case activation_kind::exp:
            for (int64_t i = 0; i < n; ++i) out.at(i) = std::exp(x.at(i));
            break;
    }
    return out;
}

conv_result causal_conv1d(const tensor & seq, const tensor & kernel, const tensor & tail) {
    if (seq.shape.size() != 2 || kernel.shape.size() != 2 || tail.shape.size() != 2) {
        throw dimension_error("causal_conv1d: rank-2 operands expected");
    }
    const int64_t len = seq.shape[0], channels = seq.shape[1];
    const int64_t k = kernel.shape[1];
    if (k < 1) throw config_error("causal_conv1d: kernel width must be >= 1");
    if (kernel.shape[0] != channels) {
        throw dimension_error("causal_conv1d: kernel channel count mismatch");
    }
    if (tail.shape[0] != k - 1 || tail.shape[1] != channels) {
        throw dimension_error("causal_conv1d: tail must be (k-1) x channels");
    }

    // history = tail ++ seq; output row t convolves rows [t, t+k) of history
    // with the kernel ordered oldest tap first.
    tensor out({len, channels});
    auto hist_at = [&](int64_t row, int64_t c) -> float {
        return row < k - 1 ? tail.at(row, c) : seq.at(row - (k - 1), c);
    };
    for (int64_t t = 0; t < len; ++t) {
        for (int64_t c = 0; c < channels; ++c) {
            float acc = 0.0f;
            for (int64_t j = 0; j < k; ++j) {
                acc += kernel.at(c, j) * hist_at(t + j, c);
            }
            out.at(t, c) = acc;
        }
    }
    tensor new_tail({k - 1, channels});
    for (int64_t r = 0; r < k - 1; ++r) {
        for (int64_t c = 0; c < channels; ++c) {
            new_tail.at(r, c) = hist_at(len + r, c);
        }
    }
    return {std::move(out), std::move(new_tail)};
}

void check_finite(const tensor & t, const char * what) {
    for (float v : t.data) {
        if (!std::isfinite(v)) {
            throw numeric_error(std::string(what) + ": non-finite value");
        }
    }
}

std::vector<double> softmax(const tensor & logits, double temperature) {
    const int64_t n = logits.numel();
    if (n < 1) throw dimension_error("softmax: empty logits");
    if (temperature <= 0.0) throw usage_error("softmax: temperature must be > 0");
    double mx = -1e300;
    for (int64_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(logits.at(i)) / temperature;
        if (v > mx) mx = v;
    }
    std::vector<double> p(static_cast<size_t>(n));
    double z = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        p[static_cast<size_t>(i)] = std::exp(static_cast<double>(logits.at(i)) / temperature - mx);
        z += p[static_cast<size_t>(i)];
    }
    for (double & v : p) v /= z;
    return p;
}

int64_t argmax(const tensor & logits) {
    const int64_t n = logits.numel();
    if (n < 1) throw dimension_error("argmax: empty logits");
    int64_t best = 0;
    for (int64_t i = 1; i < n; ++i) {
        if (logits.at(i) > logits.at(best)) best = i;
    }
    return best;
}

int64_t sample_token(const tensor & logits, double temperature, rng_stream & rng) {
    ops::check_finite(logits, "sample_token logits");
    if (temperature < 0.0) throw usage_error("sample_token: negative temperature");
    if (temperature == 0.0) return argmax(logits);
    const std::vector<double> p = softmax(logits, temperature);
    const double u = rng.next_uniform();
    double cum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        cum += p[i];
        if (u < cum) return static_cast<int64_t>(i);
    }
    return static_cast<int64_t>(p.size()) - 1;
}

} // namespace ops
} // namespace specssm
