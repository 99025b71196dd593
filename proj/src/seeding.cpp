#include "roiforge/seeding.hpp"

namespace roiforge {

namespace {

// splitmix64 finaliser
std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view key) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : key) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return mix(mix(master) ^ h);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix(mix(master) ^ mix(index + 0x51ed27ULL));
}

}  // namespace roiforge
