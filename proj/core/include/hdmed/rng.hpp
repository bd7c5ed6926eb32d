#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace hdmed {

/// Every random stream in the library is a 64-bit Mersenne Twister
/// (std::mt19937_64), whose output sequence is fixed by the C++ standard.
using Engine = std::mt19937_64;

/// SplitMix64 finalizer (Steele, Lea & Flood 2014).
std::uint64_t splitmix64(std::uint64_t x);

/// Child seed for stream `index` of `master`:
///   splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15).
/// Children depend only on (master, index), so work items can be seeded
/// independently of scheduling order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Unbiased draw from {0, ..., bound - 1} by rejection on the top bits of
/// the engine output (Lemire's multiply-shift). Independent of the
/// standard library's distribution implementations.
std::size_t uniform_index(Engine& engine, std::size_t bound);

}  // namespace hdmed
