#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace hha {

// splitmix64 step; used to derive independent stream seeds from a root seed
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seeded generator with hand-rolled draw routines so that results are
// bit-identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller, one spare cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        have_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    // index drawn from an (unnormalized is fine) nonnegative weight vector
    int categorical(const Eigen::VectorXd& weights) {
        const double total = weights.sum();
        if (!(total > 0.0)) {
            throw std::domain_error("Rng::categorical: weights must have positive sum");
        }
        const double u = uniform() * total;
        double acc = 0.0;
        for (int i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return static_cast<int>(weights.size()) - 1;
    }

    int uniform_int(int n) {  // in [0, n)
        return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hha
