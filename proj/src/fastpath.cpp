#include "muxsim/fastpath.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "muxsim/errors.hpp"

namespace muxsim {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

FastChannel::FastChannel(const QubitCavityConfig& q, double carrier_freq,
                         const ToneSpec& tone)
    : FastChannel(q, carrier_freq, tone,
                  {{tone.start, tone.start + tone.duration}}) {}

FastChannel::FastChannel(const QubitCavityConfig& q, double carrier_freq,
                         const ToneSpec& tone,
                         std::vector<std::pair<double, double>> gates)
    : gates_(std::move(gates)) {
    for (std::size_t i = 0; i < gates_.size(); ++i) {
        if (gates_[i].second < gates_[i].first ||
            (i > 0 && gates_[i].first < gates_[i - 1].second))
            throw NumericalError("FastChannel: gates must be ascending and disjoint");
    }
    drive_amp_ = std::polar(tone.amplitude, tone.phase);
    sqrt_ke_ = std::sqrt(kTwoPi * q.kappa_ext);
    const double lambda = std::numbers::pi * q.kappa_total();
    const double w_tone = kTwoPi * tone.offset;
    for (int s = 0; s < 2; ++s) {
        const double pulled =
            (pulled_resonance(q, static_cast<QubitState>(s)) - carrier_freq) * 1e3;
        // Tone-frame detuning of the pulled cavity from the drive.
        mu_[s] = cplx(lambda, -(kTwoPi * pulled - w_tone));
        ss_[s] = sqrt_ke_ * drive_amp_ / mu_[s];
    }
}

void FastChannel::reset() {
    t_ = 0.0;
    a_ = cplx{0.0, 0.0};
    cached_h_[0] = cached_h_[1] = -1.0;
}

void FastChannel::factors(int s, double h, cplx* decay, cplx* integ) {
    if (cached_h_[s] != h) {
        cached_decay_[s] = std::exp(-mu_[s] * h);
        cached_integ_[s] = (1.0 - cached_decay_[s]) / mu_[s];
        cached_h_[s] = h;
    }
    *decay = cached_decay_[s];
    *integ = cached_integ_[s];
}

cplx FastChannel::steady_output(QubitState s) const {
    return drive_amp_ - sqrt_ke_ * ss_[static_cast<int>(s)];
}

void FastChannel::run_piece(double t, QubitState state, cplx* acc) {
    double cursor = t_;
    const int s = static_cast<int>(state);
    while (cursor < t - 1e-15) {
        // Stop at the next gate edge, if any, before t.
        double stop = t;
        bool driven = false;
        for (const auto& [gs, ge] : gates_) {
            if (gs > cursor + 1e-15) {
                stop = std::min(stop, gs);
                break;
            }
            if (ge > cursor + 1e-15) {
                stop = std::min(stop, ge);
                driven = true;
                break;
            }
        }
        const double h = stop - cursor;
        cplx decay, integ;
        factors(s, h, &decay, &integ);
        const cplx ss = driven ? ss_[s] : cplx{0.0, 0.0};
        if (acc != nullptr) {
            const cplx int_a = ss * h + (a_ - ss) * integ;
            cplx out = -sqrt_ke_ * int_a;
            if (driven) out += drive_amp_ * h;
            *acc += out;
        }
        a_ = ss + (a_ - ss) * decay;
        cursor = stop;
    }
    t_ = t;
}

void FastChannel::advance(const StateTimeline& tl, double t) {
    if (t < t_ - 1e-12) throw NumericalError("FastChannel: cannot advance backwards");
    auto it = std::upper_bound(tl.flip_times.begin(), tl.flip_times.end(), t_);
    while (it != tl.flip_times.end() && *it < t) {
        run_piece(*it, tl.at(t_), nullptr);
        ++it;
    }
    if (t > t_) run_piece(t, tl.at(t_), nullptr);
}

cplx FastChannel::integrate(const StateTimeline& tl, double t0, double t1) {
    if (t1 < t0) throw NumericalError("FastChannel: window ends before it starts");
    if (t0 > t_) advance(tl, t0);
    cplx acc{0.0, 0.0};
    auto it = std::upper_bound(tl.flip_times.begin(), tl.flip_times.end(), t_);
    while (it != tl.flip_times.end() && *it < t1) {
        run_piece(*it, tl.at(t_), &acc);
        ++it;
    }
    if (t1 > t_) run_piece(t1, tl.at(t_), &acc);
    return acc;
}

std::vector<cplx> FastChannel::integrate_bins(const StateTimeline& tl, double t0,
                                              double bin, std::size_t nbins) {
    std::vector<cplx> out;
    out.reserve(nbins);
    if (t0 > t_) advance(tl, t0);
    for (std::size_t i = 0; i < nbins; ++i) {
        const double t1 = t0 + static_cast<double>(i + 1) * bin;
        out.push_back(integrate(tl, t_, t1) / bin);
    }
    return out;
}

}  // namespace muxsim
