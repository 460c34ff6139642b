#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace wnet {

// Deterministic random source. All distributions are implemented on top of
// the raw mt19937 stream so that sampled values are identical across
// platforms and standard libraries (std::normal_distribution is not
// guaranteed to be).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(static_cast<std::mt19937::result_type>(seed)) {}

    std::uint32_t next_u32() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine_()) * (1.0 / 4294967296.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        return static_cast<int>(static_cast<std::uint64_t>(engine_()) * static_cast<std::uint64_t>(n) >> 32);
    }

    bool coin() { return (engine_() & 1u) != 0; }

    // Box-Muller; one value per call, the pair's second half is discarded to
    // keep the stream position independent of call parity.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
        return mean + stddev * z;
    }

    // normal clipped to two standard deviations by resampling
    double truncated_normal(double mean, double stddev) {
        for (;;) {
            double z = normal(0.0, 1.0);
            if (z > -2.0 && z < 2.0) return mean + stddev * z;
        }
    }

private:
    std::mt19937 engine_;
};

} // namespace wnet
