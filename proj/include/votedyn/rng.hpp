#pragma once

// Deterministic random streams. xoshiro256** seeded through splitmix64,
// with all samplers implemented here so that a (seed, stream) pair gives
// the same draw sequence on every platform. Stream k is documented as:
// splitmix64 state = seed XOR (k+1)*0x9E3779B97F4A7C15, four outputs
// form the xoshiro state. Story i uses stream i throughout the library.

#include <array>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <utility>

namespace votedyn {

class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t sm = seed ^ ((stream + 1) * 0x9E3779B97F4A7C15ULL);
        for (auto& w : s_) w = splitmix64(sm);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t next_u64() {
        std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1) with 53 random bits
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    std::uint64_t uniform_int(std::uint64_t n) {  // [0, n)
        if (n == 0) return 0;
        std::uint64_t limit = ~std::uint64_t(0) - ~std::uint64_t(0) % n;
        std::uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

    double normal(double mean = 0.0, double sd = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sd * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return mean + sd * u * m;
    }

    double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

    long long poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        long long k = 0;
        while (mean > 400.0) {  // Poisson(a+b) = Poisson(a) + Poisson(b)
            k += poisson_small(400.0);
            mean -= 400.0;
        }
        return k + poisson_small(mean);
    }

    long long binomial(long long n, double p) {
        if (n <= 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        if (p > 0.5) return n - binomial(n, 1.0 - p);
        // split so (1-p)^n stays well above double underflow
        if (double(n) * -std::log1p(-p) > 200.0) {
            long long h = n / 2;
            return binomial(h, p) + binomial(n - h, p);
        }
        double q = std::exp(double(n) * std::log1p(-p));
        double u = uniform01();
        double f = q, cdf = q;
        long long k = 0;
        double odds = p / (1.0 - p);
        while (u > cdf && k < n) {
            f *= odds * double(n - k) / double(k + 1);
            ++k;
            cdf += f;
        }
        return k;
    }

    long long geometric(double p) {  // failures before first success
        if (p >= 1.0) return 0;
        return (long long)std::floor(std::log1p(-uniform01()) / std::log1p(-p));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    template <class It>
    void shuffle(It first, It last) {
        auto n = std::distance(first, last);
        for (auto i = n - 1; i > 0; --i) {
            auto j = (decltype(i))uniform_int(std::uint64_t(i) + 1);
            std::swap(first[i], first[j]);
        }
    }

  private:
    static std::uint64_t splitmix64(std::uint64_t& state) {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    long long poisson_small(double mean) {
        double L = std::exp(-mean);
        double p = 1.0;
        long long k = 0;
        do {
            ++k;
            p *= uniform01();
        } while (p > L);
        return k - 1;
    }

    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace votedyn
