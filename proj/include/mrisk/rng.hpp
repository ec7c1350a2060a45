#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "mrisk/math.hpp"

namespace mrisk {

// Philox4x32-10 counter-based generator. A draw is a pure function of
// (key, counter), so parallel schedules cannot change the stream.
class Philox {
public:
    using Counter = std::array<std::uint32_t, 4>;

    Philox(std::uint64_t master_seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)} {
        // fold the stream id into the key with a splitmix-style mix
        std::uint64_t s = stream_id + 0x9E3779B97F4A7C15ULL;
        s = (s ^ (s >> 30)) * 0xBF58476D1CE4E5B9ULL;
        s = (s ^ (s >> 27)) * 0x94D049BB133111EBULL;
        s ^= s >> 31;
        key_[0] ^= static_cast<std::uint32_t>(s);
        key_[1] ^= static_cast<std::uint32_t>(s >> 32);
    }

    // Four 32-bit words for a 128-bit counter (block_id, index).
    Counter operator()(std::uint64_t block_id, std::uint64_t index) const {
        Counter c{static_cast<std::uint32_t>(index),
                  static_cast<std::uint32_t>(index >> 32),
                  static_cast<std::uint32_t>(block_id),
                  static_cast<std::uint32_t>(block_id >> 32)};
        std::uint32_t k0 = key_[0], k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = 0xD2511F53ULL * c[0];
            const std::uint64_t p1 = 0xCD9E8D57ULL * c[2];
            Counter out;
            out[0] = static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0;
            out[1] = static_cast<std::uint32_t>(p1);
            out[2] = static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1;
            out[3] = static_cast<std::uint32_t>(p0);
            c = out;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return c;
    }

    // Uniforms in (0, 1), one counter -> four values.
    std::array<double, 4> uniform4(std::uint64_t block_id, std::uint64_t index) const {
        Counter c = (*this)(block_id, index);
        std::array<double, 4> u;
        for (int i = 0; i < 4; ++i)
            u[i] = (static_cast<double>(c[i]) + 0.5) * (1.0 / 4294967296.0);
        return u;
    }

private:
    std::array<std::uint32_t, 2> key_;
};

// (g, aux2, aux3) with g ~ N(0,1) via Box-Muller; aux values are the
// remaining uniforms of the counter.
struct GaussDraw {
    double g;
    double u_select;  // component selector
    double u_aux;     // second uniform for the chosen component
};

inline GaussDraw gauss_draw(const Philox& rng, std::uint64_t block, std::uint64_t index) {
    auto u = rng.uniform4(block, index);
    double g = std::sqrt(-2.0 * std::log(u[0])) * std::cos(2.0 * kPi * u[1]);
    return {g, u[2], u[3]};
}

}  // namespace mrisk
