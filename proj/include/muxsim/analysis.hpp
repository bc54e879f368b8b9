#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "muxsim/demod.hpp"
#include "muxsim/qubit.hpp"
#include "muxsim/waveform.hpp"

namespace muxsim {

// Everything recorded about one channel in one shot.
struct ShotOutcome {
    std::size_t shot = 0;
    std::size_t channel = 0;
    QubitState prepared = QubitState::kGround;  // intended preparation
    bool herald_pass = true;
    cplx point{0.0, 0.0};       // integrated demod point, main window
    double value = 0.0;         // point projected on the g-e axis
    std::optional<QubitState> assigned;
    // Ground truth for error budgets: state right after the preparation
    // pulse and whether the qubit flipped inside the integration window.
    QubitState state_at_readout = QubitState::kGround;
    bool flipped_in_window = false;
};

// Project complex points onto the line joining the two reference states;
// the ground reference maps below the excited one.
std::vector<double> rotate_and_project(const std::vector<cplx>& points, cplx ref_g,
                                       cplx ref_e);
double rotate_and_project_one(cplx point, cplx ref_g, cplx ref_e);

// Two-component 1-D Gaussian mixture, fitted by EM.
struct DoubleGaussianFit {
    double weight0 = 0.5, mean0 = 0.0, sigma0 = 1.0;
    double weight1 = 0.5, mean1 = 0.0, sigma1 = 1.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
};

DoubleGaussianFit fit_double_gaussian(const std::vector<double>& values);

// Threshold and the per-component misassignment probabilities it implies.
struct ThresholdReport {
    double threshold = 0.0;
    double err_low_as_high = 0.0;  // P(x > thr | component 0)
    double err_high_as_low = 0.0;  // P(x < thr | component 1)
    double fidelity = 0.0;         // 1 - (e0 + e1)/2
    double fidelity_alt = 0.0;     // 1 - e0 - e1, koenig-style alternative
};

// Weighted maximum-a-posteriori boundary between the two fitted
// components: the solution of w0 N(x;0) = w1 N(x;1) between the means,
// with a numeric scan fallback minimizing the weighted total error when
// the closed form degenerates.
ThresholdReport choose_threshold(const DoubleGaussianFit& fit);

// Single-channel readout summary over a prepared-g and a prepared-e
// ensemble of shots (already projected).
struct ChannelFidelityReport {
    std::size_t channel = 0;
    std::size_t kept_g = 0, kept_e = 0, discarded = 0;
    double herald_discard_fraction = 0.0;
    DoubleGaussianFit fit;          // pooled over both kept ensembles
    ThresholdReport thr;            // from the pooled fit
    double err_g_as_e = 0.0;        // empirical, prepared-g shots above threshold
    double err_e_as_g = 0.0;        // empirical, prepared-e shots below threshold
    double fidelity = 0.0;          // 1 - (errors)/2, empirical (headline)
    double fidelity_alt = 0.0;      // 1 - err_g_as_e - err_e_as_g
    double fidelity_fit = 0.0;      // same from the fitted mixture tails
    // Fraction of kept shots whose qubit flipped inside the integration
    // window (the dominant intrinsic error at good SNR).
    double flipped_in_window_fraction = 0.0;
};

ChannelFidelityReport fidelity_report(const std::vector<ShotOutcome>& shots);

// Hysteretic two-level jump detector on a projected trace. A flip is
// accepted only after min_dwell_bins consecutive bins on the other side of
// the threshold; the reported flip time is the boundary in front of the
// first such bin.
struct JumpEvent {
    double time = 0.0;  // us
    QubitState to = QubitState::kGround;
};

struct JumpReport {
    QubitState initial = QubitState::kGround;
    std::vector<JumpEvent> events;
    // Dwell time in the excited state before the first decay, when the
    // trace starts excited and does decay.
    std::optional<double> first_decay_dwell;
};

JumpReport detect_jumps(const std::vector<double>& projected, double t0, double bin,
                        double threshold, int min_dwell_bins);
JumpReport detect_jumps(const DemodResult& trace, cplx ref_g, cplx ref_e,
                        double threshold, int min_dwell_bins);

// Damped-cosine fit p(t) = 0.5 + A exp(-t/tau) cos(2 pi f t + phi). The
// free amplitude absorbs preparation and assignment errors so they do not
// bias f or tau. Coarse frequency scan plus Nelder-Mead refinement; needs
// at least one visible fringe period to be reliable.
struct RamseyFit {
    double freq = 0.0;        // MHz
    double decay_time = 0.0;  // us
    double phase = 0.0;       // rad
    double amplitude = 0.0;   // fringe amplitude (1/2 for an ideal fringe)
    double residual = 0.0;    // rms
    bool converged = false;
};

RamseyFit fit_ramsey(const std::vector<double>& delays,
                     const std::vector<double>& populations);

// Least-squares slope of fitted Ramsey frequency against photon number;
// the dispersive shift is half that slope, sign and all. With a
// blue-detuned drive a negative chi shows up as fringes slowing down as
// photons are added.
double chi_from_stark_slope(const std::vector<double>& nbars,
                            const std::vector<double>& freqs);

// One-sample Kolmogorov-Smirnov test against Exp(mean).
struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
};

KsResult ks_test_exponential(std::vector<double> samples, double mean);

}  // namespace muxsim
