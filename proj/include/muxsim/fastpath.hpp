#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "muxsim/device.hpp"
#include "muxsim/feedline.hpp"
#include "muxsim/waveform.hpp"

namespace muxsim {

// Closed-form single-channel readout: the same single-pole cavity model as
// reflect(), but integrated analytically in the frame of the channel's own
// tone instead of being rendered sample by sample. Valid when tone
// spacings are nulled by the integration window (the snapped default), so
// that foreign tones contribute nothing to this channel's demodulated
// point.
//
// The tone may be gated on over several intervals (e.g. herald pulse then
// measurement pulse); the object carries the intracavity field in between,
// so ring-up, ring-down and leftover herald photons are all reproduced.
class FastChannel {
  public:
    // One continuous gate taken from the tone itself.
    FastChannel(const QubitCavityConfig& q, double carrier_freq, const ToneSpec& tone);
    // Explicit gate list (ascending, non-overlapping [start, end) pairs);
    // offset/amplitude/phase from `tone`.
    FastChannel(const QubitCavityConfig& q, double carrier_freq, const ToneSpec& tone,
                std::vector<std::pair<double, double>> gates);

    // Back to t = 0 with an empty cavity.
    void reset();

    // Advance the cavity to time t (>= current time) without accumulating.
    void advance(const StateTimeline& tl, double t);

    // Advance to t1, accumulating the integral of the reflected envelope
    // in the tone frame over [max(now, t0), t1). Units are
    // sqrt(photons/us) * us, identical to DemodResult::integrated_point
    // for the same window.
    cplx integrate(const StateTimeline& tl, double t0, double t1);

    // Bin means of the reflected envelope over [t0, t0 + nbins * bin),
    // matching DemodResult::trace for the same window.
    std::vector<cplx> integrate_bins(const StateTimeline& tl, double t0, double bin,
                                     std::size_t nbins);

    // Steady reflected envelope (tone frame) with the gate on and the
    // qubit held in s: the noise-free trace level far from transients.
    cplx steady_output(QubitState s) const;

    double now() const { return t_; }
    cplx field() const { return a_; }

  private:
    // Exact update over [t_, t] with a constant qubit state; splits at the
    // gate edges internally. acc, if given, collects the output integral.
    void run_piece(double t, QubitState s, cplx* acc);
    void factors(int s, double h, cplx* decay, cplx* integ);

    std::vector<std::pair<double, double>> gates_;
    cplx drive_amp_;       // A exp(i phi)
    double sqrt_ke_ = 0.0; // sqrt(2 pi kappa_ext)
    cplx mu_[2];           // per qubit state
    cplx ss_[2];           // driven steady state B / mu
    // One-deep per-state cache of exp(-mu h) and (1 - exp(-mu h)) / mu so
    // uniform binning costs no transcendentals.
    double cached_h_[2] = {-1.0, -1.0};
    cplx cached_decay_[2], cached_integ_[2];

    double t_ = 0.0;
    cplx a_{0.0, 0.0};
};

}  // namespace muxsim
