#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace amlpf {

// SplitMix64 finalizer. Used both as the generator step and to derive
// child seeds, so every stream is a pure function of its key path.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(parent + 0x9e3779b97f4a7c15ULL);
    for (std::uint64_t key : path) {
        s = mix64(s ^ mix64(key + 0x632be59bd9b4e019ULL));
    }
    return s;
}

// Domain separation tags for derive_seed.
enum class StreamTag : std::uint64_t {
    propagate = 1,
    resample = 2,
    simulate = 3,
    level = 4,
    replicate = 5,
    reference = 6,
    method = 7,
};

constexpr std::uint64_t tag(StreamTag t) noexcept { return static_cast<std::uint64_t>(t); }

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

private:
    std::uint64_t state_;
};

// A seeded source of uniforms and standard normals. Cheap to construct, so
// filters create one per (particle, time) key instead of sharing state.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double gaussian() { return normal_(engine_); }

    // Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    SplitMix64& engine() noexcept { return engine_; }

private:
    SplitMix64 engine_;
    std::normal_distribution<double> normal_;
};

}  // namespace amlpf
