#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace sslgmm {

// Counter-based generator: output i of stream (seed, stream, substream) is a
// SplitMix64 finalizer applied to key + i * golden. Independent of call order across
// streams, so per-row noise is reproducible regardless of how work is scheduled.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    double uniform();
    double normal();

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

namespace streams {
inline constexpr std::uint64_t teacher = 1;
inline constexpr std::uint64_t labeled_labels = 2;
inline constexpr std::uint64_t labeled_noise = 3;
inline constexpr std::uint64_t unlabeled_labels = 4;
inline constexpr std::uint64_t unlabeled_noise = 5;
inline constexpr std::uint64_t amp_init = 6;
inline constexpr std::uint64_t bootstrap = 7;
inline constexpr std::uint64_t user = 100;
}  // namespace streams

}  // namespace sslgmm
