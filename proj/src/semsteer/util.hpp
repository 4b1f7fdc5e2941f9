#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace semsteer {

/// 64-bit FNV-1a. Stable across platforms, used for bucket hashing and cache keys.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seeded generator with platform-independent derived draws. std:: distributions
/// are implementation-defined, so every draw goes through the helpers below.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, bound) by rejection sampling on raw engine output.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform real in [0, 1) with 53 bits of precision.
    double uniform();
    /// Standard normal via Box-Muller.
    double normal();

    std::uint64_t raw() { return engine_(); }

    /// First `count` indices of a Fisher-Yates shuffle of [0, n).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

private:
    std::mt19937_64 engine_;
};

/// Mixes several integers into one seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::string_view b);

/// Lowercased alphanumeric tokens; everything else separates.
std::vector<std::string> tokenize(std::string_view text);

/// Whitespace-delimited words, verbatim.
std::vector<std::string> split_words(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, std::string_view contents);

} // namespace semsteer
