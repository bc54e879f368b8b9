#include "muxsim/qubit.hpp"

#include <algorithm>
#include <cmath>

#include "muxsim/errors.hpp"
#include "muxsim/feedline.hpp"

namespace muxsim {

QubitState TrajectoryRecord::state_at(double t) const {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    const auto flips = static_cast<std::size_t>(it - jump_times.begin());
    return (flips % 2 == 0) ? initial : flipped(initial);
}

bool TrajectoryRecord::flipped_during(double t_begin, double t_end) const {
    for (double t : jump_times)
        if (t > t_begin && t <= t_end) return true;
    return false;
}

QubitState sample_initial_state(const QubitCavityConfig& q, RngStream& rng) {
    return rng.uniform() < q.thermal_excited_pop ? QubitState::kExcited
                                                 : QubitState::kGround;
}

TrajectoryRecord evolve_during_measurement(const QubitCavityConfig& q,
                                           QubitState initial, double window,
                                           RngStream& rng) {
    TrajectoryRecord rec;
    rec.initial = initial;
    rec.window = window;

    const double pop = q.thermal_excited_pop;
    const double up_rate = pop > 0.0 ? pop / ((1.0 - pop) * q.t1) : 0.0;
    const double down_rate = 1.0 / q.t1;

    QubitState s = initial;
    double t = 0.0;
    while (true) {
        const double rate = (s == QubitState::kExcited) ? down_rate : up_rate;
        if (rate <= 0.0) break;  // cold qubit in |g> never leaves
        t += rng.exponential(1.0 / rate);
        if (t >= window) break;
        rec.jump_times.push_back(t);
        s = flipped(s);
    }
    return rec;
}

double rabi_population(const QubitCavityConfig& q, double rabi_rate, double duration) {
    const double tau_r = 1.0 / (0.5 / q.t1 + 0.5 / q.t2_ramsey);
    const double envelope = std::exp(-duration / tau_r);
    return 0.5 * (1.0 - envelope * std::cos(2.0 * std::numbers::pi * rabi_rate * duration));
}

double ramsey_population(const QubitCavityConfig& q, double detuning, double delay,
                         double extra_shift, double extra_dephasing) {
    const double rate = 1.0 / q.t2_ramsey + extra_dephasing;
    const double freq = detuning + extra_shift;
    CoherentPhase ph;
    ph.advance(delay, freq, rate);
    return 0.5 * (1.0 + ph.envelope * std::cos(ph.phase));
}

double stark_shift(const QubitCavityConfig& q, double nbar) {
    return 2.0 * dispersive_shift(q) * nbar;
}

double photon_dephasing_rate(const QubitCavityConfig& q, double nbar) {
    // 8 chi_ang^2 nbar / kappa_ang with chi, kappa in MHz leaves one factor
    // of 2 pi, giving a rate in 1/us.
    const double chi = dispersive_shift(q);
    return 16.0 * std::numbers::pi * chi * chi * nbar / q.kappa_total();
}

CrosstalkEffect crosstalk_effects(const DeviceConfig& dev, std::size_t victim,
                                  std::size_t aggressor, double aggressor_amplitude) {
    if (victim >= dev.num_channels() || aggressor >= dev.num_channels())
        throw ConfigError("crosstalk_effects: channel index out of range");

    const auto& vq = dev.channels[victim];
    CrosstalkEffect eff;
    if (victim == aggressor) {
        // Own readout tone: full drive at the victim cavity.
        eff.spurious_photons = steady_state_photons(
            vq, aggressor_amplitude,
            dev.tone_offset(aggressor) - (pulled_resonance(vq, QubitState::kGround) -
                                          dev.carrier_freq) * 1e3);
    } else {
        const double xi = dev.leakage(victim, aggressor);
        // The aggressor's tone sits at its own cavity frequency, far
        // detuned from the victim cavity.
        const double delta = dev.tone_offset(aggressor) -
                             (pulled_resonance(vq, QubitState::kGround) -
                              dev.carrier_freq) * 1e3;
        eff.spurious_photons =
            steady_state_photons(vq, xi * aggressor_amplitude, delta);
    }
    eff.stark_shift = stark_shift(vq, eff.spurious_photons);
    eff.extra_dephasing = photon_dephasing_rate(vq, eff.spurious_photons);
    return eff;
}

}  // namespace muxsim
