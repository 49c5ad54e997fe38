#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpguard::util {

// Seedable 64-bit generator, pinned for cross-platform reproducibility.
//
// State update (xorshift64 with a multiplicative output scramble):
//   s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27;  output = s * 0x2545F4914F6CDD1D
// The seed is first expanded through one SplitMix64 step so that seed 0 and
// nearby seeds yield unrelated streams.
class Rng64 {
public:
    explicit Rng64(std::uint64_t seed) : state_(splitmix64(seed)) {
        if (state_ == 0) state_ = 0x9E3779B97F4B7C15ULL;
    }

    std::uint64_t next_u64() {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    // uniform in [0, 1), 53-bit resolution
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, bound); bound > 0
    std::uint64_t next_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    // standard normal via Box-Muller; the paired deviate is cached
    double next_gaussian();

    // SplitMix64 step (Steele et al.), used for seed expansion and stream derivation
    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4B7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    // derive an independent stream (e.g. one per tree / per channel)
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
        return splitmix64(seed ^ splitmix64(stream + 1));
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Shortest round-trip decimal representation (std::to_chars).
std::string fmt_double(double v);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// Split one CSV line on commas; no quoting, fields are trimmed of surrounding
// spaces and a trailing '\r'.
std::vector<std::string_view> split_csv(std::string_view line);

// key=value lines; '#' starts a comment, blank lines ignored.
// Later keys override earlier ones. Returns pairs in file order.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

// Nearest-rank quantile: element of rank ceil(q * n) of the sorted sample.
double nearest_rank_quantile(std::vector<double> values, double q);

} // namespace mpguard::util
