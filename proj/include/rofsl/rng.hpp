#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rofsl {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a path of
/// integers (stream tag, client id, round, ...). Pure function, so streams do
/// not depend on the order in which other streams are consumed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(master);
    for (std::uint64_t p : path) {
        h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    }
    return h;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(master, path));
}

/// Stream tags used by the experiment runner.
enum class Stream : std::uint64_t {
    TrainData = 1,
    TestData = 2,
    ServerData = 3,
    Partition = 4,
    Attackers = 5,
    InitModel = 6,
    Sampling = 7,
    Client = 8,
    Server = 9,
    Repeat = 10,
};

constexpr std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace rofsl
