#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "muxsim/device.hpp"
#include "muxsim/rng.hpp"

namespace muxsim {

// Stochastic record of one qubit over one observation window [0, window).
// The state starts at `initial` and flips at each jump time (ascending).
struct TrajectoryRecord {
    std::size_t channel = 0;
    QubitState initial = QubitState::kGround;
    std::vector<double> jump_times;  // us, within [0, window)
    double window = 0.0;             // us

    QubitState state_at(double t) const;
    QubitState final_state() const { return state_at(window); }
    bool flipped_during(double t_begin, double t_end) const;
};

// Thermal preparation: excited with probability thermal_excited_pop.
QubitState sample_initial_state(const QubitCavityConfig& q, RngStream& rng);

// Jump trajectory over [0, window): decay e->g at rate 1/T1, thermal
// excitation g->e at rate (pop / (1 - pop)) / T1 so that the stationary
// excited population equals thermal_excited_pop (detailed balance).
TrajectoryRecord evolve_during_measurement(const QubitCavityConfig& q,
                                           QubitState initial, double window,
                                           RngStream& rng);

// Excited-state population after resonantly driving |g> for `duration` at
// Rabi frequency rabi_rate (MHz):
//   P_e(t) = (1 - exp(-t / tau_r) cos(2 pi Omega t)) / 2,
// tau_r = 1 / (1/(2 T1) + 1/(2 T2R)).
double rabi_population(const QubitCavityConfig& q, double rabi_rate, double duration);

// Excited-state population in a Ramsey experiment with the drive detuned
// by `detuning` MHz, after a free delay (us). extra_shift adds to the
// fringe frequency (MHz) and extra_dephasing (1/us) to the decay rate;
// both are how photon-induced crosstalk enters.
double ramsey_population(const QubitCavityConfig& q, double detuning, double delay,
                         double extra_shift = 0.0, double extra_dephasing = 0.0);

// AC Stark shift of the qubit by nbar photons in its own cavity: 2 chi nbar
// (MHz, signed).
double stark_shift(const QubitCavityConfig& q, double nbar);

// Measurement-induced dephasing rate of nbar photons, 8 chi^2 nbar / kappa
// in angular units, returned in 1/us.
double photon_dephasing_rate(const QubitCavityConfig& q, double nbar);

// Phase bookkeeping for one qubit between Ramsey pulses: accumulated fringe
// phase and a multiplicative coherence envelope.
struct CoherentPhase {
    std::size_t channel = 0;
    double phase = 0.0;         // rad
    double envelope = 1.0;      // in (0, 1]

    void advance(double dt, double freq, double decay_rate) {
        phase += 2.0 * std::numbers::pi * freq * dt;
        envelope *= std::exp(-decay_rate * dt);
    }
};

// What an always-on drive of the aggressor channel does to the victim
// qubit when a fraction of that drive leaks into the victim's cavity:
// spurious photons, the resulting Stark shift of the victim, and extra
// dephasing.
struct CrosstalkEffect {
    double spurious_photons = 0.0;
    double stark_shift = 0.0;       // MHz
    double extra_dephasing = 0.0;   // 1/us
};

CrosstalkEffect crosstalk_effects(const DeviceConfig& dev, std::size_t victim,
                                  std::size_t aggressor, double aggressor_amplitude);

}  // namespace muxsim
