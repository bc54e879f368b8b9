#include "muxsim/rng.hpp"

#include <cmath>
#include <numbers>

namespace muxsim {

namespace {

// Philox4x32 round constants (Salmon et al., SC'11).
constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::uint32_t ctr[4], std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t n0 = hi1 ^ ctr[1] ^ k0;
    const std::uint32_t n2 = hi0 ^ ctr[3] ^ k1;
    ctr[0] = n0;
    ctr[1] = lo1;
    ctr[2] = n2;
    ctr[3] = lo0;
}

inline void philox4x32_10(const std::uint32_t in[4], const std::uint32_t key[2], std::uint32_t out[4]) {
    std::uint32_t ctr[4] = {in[0], in[1], in[2], in[3]};
    std::uint32_t k0 = key[0];
    std::uint32_t k1 = key[1];
    for (int r = 0; r < 10; ++r) {
        philox_round(ctr, k0, k1);
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    out[0] = ctr[0];
    out[1] = ctr[1];
    out[2] = ctr[2];
    out[3] = ctr[3];
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t shot, std::uint32_t channel, RngStage stage) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    // The shot index occupies one counter word plus 16 bits of the next;
    // channel and stage tags fill the remaining bits. Block counter gets
    // the first two words, so a stream can emit 2^64 blocks.
    prefix_[0] = static_cast<std::uint32_t>(shot);
    prefix_[1] = (static_cast<std::uint32_t>(shot >> 32) & 0xffffu) |
                 ((channel & 0xffu) << 16) |
                 ((static_cast<std::uint32_t>(stage) & 0xffu) << 24);
}

void RngStream::refill() {
    const std::uint32_t ctr[4] = {
        static_cast<std::uint32_t>(block_),
        static_cast<std::uint32_t>(block_ >> 32),
        prefix_[0],
        prefix_[1],
    };
    philox4x32_10(ctr, key_, out_);
    ++block_;
    pos_ = 0;
}

std::uint32_t RngStream::next_u32() {
    if (pos_ >= 4) refill();
    return out_[pos_++];
}

double RngStream::uniform() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;  // 53 bits
    return static_cast<double>(bits) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

double RngStream::exponential(double mean) {
    return -mean * std::log(1.0 - uniform());
}

}  // namespace muxsim
