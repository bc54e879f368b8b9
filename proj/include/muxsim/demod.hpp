#pragma once

#include <cstddef>
#include <vector>

#include "muxsim/waveform.hpp"

namespace muxsim {

// Boxcar demodulation of one channel: mix the waveform down by the tone
// offset and integrate over a window.
struct DemodSpec {
    std::size_t channel = 0;
    double offset = 0.0;             // MHz, the tone to demodulate at
    double integration_start = 0.0;  // us
    double integration_length = 0.0; // us
    double trace_bin = 0.0;          // us; > 0 also records binned means
};

struct DemodResult {
    std::size_t channel = 0;
    // integral of s(t) exp(-i 2 pi f t) dt over the window, units
    // sqrt(photons/us) * us.
    cplx integrated_point{0.0, 0.0};
    std::vector<cplx> trace;  // per-bin means of the mixed-down signal
    double trace_bin = 0.0;   // us
    double trace_t0 = 0.0;    // us, centre-independent: start of first bin
};

DemodResult demodulate(const ComplexWaveform& wf, const DemodSpec& spec);
std::vector<DemodResult> demodulate_all(const ComplexWaveform& wf,
                                        const std::vector<DemodSpec>& specs);

// Largest integration length not exceeding `desired` that is an integer
// number of periods of the minimum tone spacing (and so nulls the leakage
// of every tone pair whose spacing is a multiple of it). Falls back to one
// full period when `desired` is shorter than one.
double snap_integration_length(double desired, double min_spacing);

// Smallest pairwise spacing of a set of tone offsets (MHz).
double min_tone_spacing(const std::vector<double>& offsets);

}  // namespace muxsim
