#pragma once

#include <cstdint>
#include <cstddef>

namespace muxsim {

// Pipeline stages draw from disjoint random streams so that, e.g., adding
// amplifier noise never perturbs the qubit jump record of the same shot.
enum class RngStage : std::uint32_t {
    kInitialState = 0,   // thermal preparation
    kJumps = 1,          // relaxation / excitation jump times
    kControlPulse = 2,   // pi-pulse infidelity coin
    kAmplifierNoise = 3, // input-referred amplifier noise
    kAdcNoise = 4,       // digitizer noise
    kFastNoise = 5,      // integrated noise on the analytic fast path
    kHerald = 6,         // reserved for herald-specific draws
};

// Channel id used for streams that belong to the shared feedline rather
// than to one readout channel (amplifier and ADC noise).
inline constexpr std::uint32_t kFeedlineChannel = 0xffu;

// Counter-based stream (Philox4x32-10). A stream is addressed by
// (seed, shot, channel, stage); draws advance an internal block counter.
// Any stream can therefore be opened at any point of the computation and
// always yields the same sequence, independent of thread count or the
// order in which other streams are consumed.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t shot, std::uint32_t channel, RngStage stage);

    // Raw 32-bit word.
    std::uint32_t next_u32();

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Standard normal via Box-Muller (second deviate is cached).
    double normal();

    // Exponential with the given mean.
    double exponential(double mean);

  private:
    void refill();

    std::uint32_t key_[2];
    std::uint32_t prefix_[2];   // shot-low, shot-high ^ (channel, stage)
    std::uint64_t block_ = 0;
    std::uint32_t out_[4];
    int pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

}  // namespace muxsim
