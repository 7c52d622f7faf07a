#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace wi {

/// Engine used by every sampler. Its textual state is portable, which is what
/// checkpoints store.
using Rng = std::mt19937_64;

/// SplitMix64 finaliser; used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// FNV-1a over raw bytes.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 14695981039346656037ull);

/// Uniform integer in [0, n). Implemented locally so results do not depend on
/// the standard library's distribution algorithms.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Uniform real in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

double uniform_real(Rng& rng, double lo, double hi);

/// Standard normal via Box-Muller (one draw per call, second value discarded).
double normal01(Rng& rng);

std::string rng_state(const Rng& rng);
void set_rng_state(Rng& rng, const std::string& state);

}  // namespace wi
