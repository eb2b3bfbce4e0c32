#pragma once

#include <cmath>
#include <cstdint>

namespace oubridge {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic standard-normal stream. Streams derived from the same master
// seed with distinct indices are independent; stream index doubles as a
// counter, so parallel workers drawing stream(seed, path_id) are reproducible
// regardless of thread count.
class NormalStream {
public:
    NormalStream(std::uint64_t master_seed, std::uint64_t stream_index) {
        std::uint64_t s = master_seed;
        (void)splitmix64(s);
        s ^= 0xd1342543de82ef95ULL * (stream_index + 1);
        s0_ = splitmix64(s);
        s1_ = splitmix64(s);
        if ((s0_ | s1_) == 0) s1_ = 1;
    }

    double uniform() {  // in (0, 1)
        const std::uint64_t x = next();
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 2.0 * M_PI * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t next() {  // xorshift128+
        std::uint64_t x = s0_;
        const std::uint64_t y = s1_;
        s0_ = y;
        x ^= x << 23;
        s1_ = x ^ y ^ (x >> 17) ^ (y >> 26);
        return s1_ + y;
    }

    std::uint64_t s0_, s1_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace oubridge
