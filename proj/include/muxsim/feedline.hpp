#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "muxsim/device.hpp"
#include "muxsim/waveform.hpp"

namespace muxsim {

// One gated measurement tone on the feedline, addressed to a channel.
struct ToneSpec {
    std::size_t channel = 0;
    double offset = 0.0;     // MHz from the carrier
    double amplitude = 0.0;  // sqrt(photons/us)
    double phase = 0.0;      // rad
    double start = 0.0;      // us
    double duration = 0.0;   // us; tone is on over [start, start + duration)
};

// A frequency comb with at most one tone per channel (the usual case for
// simultaneous multiplexed readout). Lower-level entry points take a raw
// tone list and allow several tones per channel.
struct ReadoutComb {
    std::vector<ToneSpec> tones;
};

// Intracavity field of every channel, sqrt(photons) per entry.
struct CavityState {
    std::vector<cplx> amplitude;
};

// Qubit state of one channel as a piecewise-constant function of time:
// starts in `initial` and flips at each entry of `flip_times` (us,
// ascending). The state is right-continuous at a flip.
struct StateTimeline {
    QubitState initial = QubitState::kGround;
    std::vector<double> flip_times;

    QubitState at(double t) const;
};

struct ReflectionResult {
    ComplexWaveform incident;   // comb as it arrives at the feedline
    ComplexWaveform reflected;  // comb after interacting with all cavities
    CavityState final_state;
    // Per-sample cavity fields, recorded only when requested (one
    // CavityState per output sample).
    std::vector<CavityState> cavity_trajectory;
};

struct ReflectOptions {
    bool record_cavity_trajectory = false;
    std::optional<CavityState> initial_state;  // defaults to empty cavities
};

// Render the comb into a baseband waveform over [0, span) at fs MHz:
// s[n] = sum_k A_k exp(i (2 pi f_k t_n + phi_k)) for every tone active at
// t_n.
ComplexWaveform synthesize_tones(const std::vector<ToneSpec>& tones, double span,
                                 double fs);
ComplexWaveform synthesize_comb(const ReadoutComb& comb, double span, double fs);

// Drive every cavity with the comb and form the reflected feedline signal
//   out(t) = in(t) - sum_j sqrt(kappa_ext_j) a_j(t).
// Each cavity obeys the one-port input-output equation in the rotating
// frame of the carrier,
//   da_j/dt = -(kappa_tot_j/2 - i w_j(t)) a_j + sqrt(kappa_ext_j) d_j(t),
// where w_j is the (qubit-state dependent) pulled offset and d_j the drive
// reaching cavity j through the leakage matrix. The integrator steps the
// exact single-pole solution per sample, splitting steps at tone edges and
// qubit flips, so it is stable at any sample rate; a resolution check
// still rejects sample rates that undersample a linewidth or a detuning.
ReflectionResult reflect(const DeviceConfig& dev,
                         const std::vector<StateTimeline>& states,
                         const std::vector<ToneSpec>& tones, double span, double fs,
                         const ReflectOptions& opt = {});

// Convenience wrapper for frozen qubit states.
ReflectionResult reflect(const DeviceConfig& dev, const std::vector<QubitState>& states,
                         const ReadoutComb& comb, double span, double fs,
                         const ReflectOptions& opt = {});

// Steady-state reflection coefficient at detuning delta (MHz) from the
// pulled resonance: Gamma = 1 - kappa_ext / (kappa_tot/2 + i delta).
cplx steady_state_reflection(const QubitCavityConfig& q, double delta);

// Steady-state intracavity photon number for a drive of the given
// amplitude (sqrt(photons/us)) at detuning delta (MHz) from resonance.
double steady_state_photons(const QubitCavityConfig& q, double amplitude, double delta);

// Drive amplitude that sustains nbar photons at detuning delta.
double amplitude_for_photons(const QubitCavityConfig& q, double nbar, double delta);

}  // namespace muxsim
