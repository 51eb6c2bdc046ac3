#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace autofhe {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent substream seed from (master, tags...). Used to give
// every offspring / restart / dataset split its own stream so results do not
// depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = master;
    (void)splitmix64(s);
    s ^= splitmix64(s) + a * 0x9e3779b97f4a7c15ULL;
    s ^= splitmix64(s) + b * 0xbf58476d1ce4e5b9ULL;
    s ^= splitmix64(s) + c * 0x94d049bb133111ebULL;
    return splitmix64(s);
}

// mt19937_64 wrapper with hand-rolled draw helpers. Distributions are pinned
// here rather than taken from <random> adapters so that a given seed produces
// the same bytes everywhere.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    int range(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo + 1)));
    }

    // standard normal via Box-Muller, cached spare
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace autofhe
