#pragma once
// Seed derivation: every chain, replication and split draws its engine seed
// from the master seed through splitmix64, so runs are reproducible
// independently of scheduling.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace belqr {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `index` under `parent`.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(parent) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = parent;
    for (auto i : path) s = derive_seed(s, i);
    return s;
}

}  // namespace belqr
