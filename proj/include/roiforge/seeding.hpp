#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace roiforge {

using Rng = std::mt19937_64;

/// Sub-seed for one patient, stable across runs and independent of the
/// order patients are processed in.
std::uint64_t derive_seed(std::uint64_t master, std::string_view key);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace roiforge
