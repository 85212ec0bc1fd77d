#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace swarmfield {

// Deterministic random stream. std::mt19937_64 gives a portable bit stream,
// but the standard distributions do not, so uniform/normal draws are done
// by hand (53-bit uniforms, Box-Muller normals). Same seed -> same sequence
// on every platform and build.
class Rng {
  public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller; pairs are cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // uniform integer in [lo, hi], hi - lo small
    int uniform_int(int lo, int hi) {
        int v = lo + static_cast<int>(uniform() * (hi - lo + 1));
        return v > hi ? hi : v;
    }

    bool operator==(const Rng& other) const {
        return eng_ == other.eng_ && have_spare_ == other.have_spare_;
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// stable seed derivation for (experiment, trial) style nesting
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xc2b2ae3d27d4eb4fULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace swarmfield
