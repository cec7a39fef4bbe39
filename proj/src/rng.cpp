#include "ewa/rng.hpp"

namespace ewa {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::uint64_t i, std::uint64_t j, std::uint64_t k) {
    // FNV-1a over the label
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t s = splitmix64(base ^ splitmix64(h));
    s = splitmix64(s ^ splitmix64(i + 0x1234567ULL));
    s = splitmix64(s ^ splitmix64(j + 0x89abcdefULL));
    s = splitmix64(s ^ splitmix64(k + 0x5555ULL));
    return s;
}

}  // namespace ewa
