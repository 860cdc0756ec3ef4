#include "rng.hpp"

#include <cmath>

namespace msj {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> round_once(std::array<std::uint32_t, 4> c,
                                               std::array<std::uint32_t, 2> k) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline std::uint64_t splitmix_fin(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
    for (int r = 0; r < 9; ++r) {
        counter = round_once(counter, key);
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return round_once(counter, key);
}

std::uint64_t RngStream::next_u64() {
    if (buffered_) {
        buffered_ = false;
        return buffer_;
    }
    std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(counter_),
        static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_),
        static_cast<std::uint32_t>(stream_ >> 32),
    };
    std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(key_),
        static_cast<std::uint32_t>(key_ >> 32),
    };
    auto out = philox4x32(ctr, key);
    ++counter_;
    buffer_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    buffered_ = true;
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_double_open() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

double RngStream::exponential(double rate) {
    return -std::log(next_double_open()) / rate;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t h = splitmix_fin(seed + 0x9E3779B97F4A7C15ull);
    return splitmix_fin(h ^ splitmix_fin(salt + 0x9E3779B97F4A7C15ull));
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    // FNV-1a over the tag bytes.
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return derive_seed(seed, h);
}

}  // namespace msj
