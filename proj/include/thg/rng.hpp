#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "thg/tensor.hpp"

namespace thg {

// xoshiro256** seeded through splitmix64. Substreams are derived by hashing
// (root seed, component name) so adding a consumer never perturbs the others.
class Rng {
  public:
    explicit Rng(uint64_t seed) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
    }

    static uint64_t derive_seed(uint64_t root, std::string_view component) {
        // FNV-1a over the name, folded with the root seed.
        uint64_t h = 1469598103934665603ULL;
        for (char c : component) {
            h ^= static_cast<uint8_t>(c);
            h *= 1099511628211ULL;
        }
        uint64_t x = root ^ h;
        return splitmix64(x);
    }

    static Rng substream(uint64_t root, std::string_view component) {
        return Rng(derive_seed(root, component));
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        int v = static_cast<int>(uniform() * n);
        return v >= n ? n - 1 : v;
    }

    const std::array<uint64_t, 4>& state() const { return s_; }
    void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

  private:
    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<uint64_t, 4> s_{};
};

// Numerically stable softmax (max-subtracted).
inline std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

inline double log_sum_exp(const std::vector<double>& logits) {
    if (logits.empty()) throw std::invalid_argument("log_sum_exp: empty logits");
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    return m + std::log(z);
}

inline int sample_categorical(Rng& rng, const std::vector<double>& logits) {
    for (double v : logits)
        if (!std::isfinite(v)) throw std::invalid_argument("sample_categorical: non-finite logit");
    std::vector<double> p = softmax(logits);
    double u = rng.uniform();
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size()) - 1;
}

inline int argmax(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("argmax: empty");
    int best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

}  // namespace thg
