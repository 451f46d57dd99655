#include "sslgmm/rng.hpp"

namespace sslgmm {

namespace {
constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += golden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream)
    : key_(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ substream)) {}

CounterRng::result_type CounterRng::operator()() {
    ++counter_;
    return splitmix64(key_ + counter_ * golden);
}

double CounterRng::uniform() { return uniform_(*this); }

double CounterRng::normal() { return normal_(*this); }

}  // namespace sslgmm
