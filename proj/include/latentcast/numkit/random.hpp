#pragma once

#include "latentcast/numkit/tensor.hpp"

#include <cstdint>
#include <random>

namespace latentcast::numkit {

/// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded generator with platform-independent derived distributions (the
/// std:: distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::int64_t below(std::int64_t n);
    double normal();

    template <typename Scalar>
    BasicTensor<Scalar> normal_tensor(Shape shape, double stddev = 1.0) {
        BasicTensor<Scalar> t(std::move(shape));
        for (auto& x : t.data()) x = static_cast<Scalar>(stddev * normal());
        return t;
    }

    Rng fork(std::uint64_t stream) { return Rng(mix_seed(engine_(), stream)); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace latentcast::numkit
