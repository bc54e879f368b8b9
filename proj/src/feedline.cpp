#include "muxsim/feedline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "muxsim/errors.hpp"

namespace muxsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Resync recurrence-based oscillator phases this often to keep rounding
// drift below ~1e-13 over arbitrarily long waveforms.
constexpr std::size_t kResyncInterval = 1024;

std::size_t sample_count(double span, double fs) {
    const double n = span * fs;
    const auto rounded = static_cast<std::size_t>(std::llround(n));
    if (rounded == 0) throw ConfigError("waveform span shorter than one sample");
    return rounded;
}

}  // namespace

QubitState StateTimeline::at(double t) const {
    const auto it = std::upper_bound(flip_times.begin(), flip_times.end(), t);
    const auto flips = static_cast<std::size_t>(it - flip_times.begin());
    return (flips % 2 == 0) ? initial : flipped(initial);
}

ComplexWaveform synthesize_tones(const std::vector<ToneSpec>& tones, double span,
                                 double fs) {
    ComplexWaveform wf;
    wf.sample_rate = fs;
    wf.t0 = 0.0;
    wf.samples.assign(sample_count(span, fs), cplx{0.0, 0.0});
    const double dt = 1.0 / fs;

    for (const auto& tone : tones) {
        if (tone.duration <= 0.0) continue;
        const double w = kTwoPi * tone.offset;
        // Sample n is inside the gate when start <= t_n < start + duration.
        const double end = tone.start + tone.duration;
        const auto n0 = static_cast<std::size_t>(
            std::max(0.0, std::ceil(tone.start * fs - 1e-9)));
        const auto n1 = std::min(wf.samples.size(), static_cast<std::size_t>(std::max(
                                                        0.0, std::ceil(end * fs - 1e-9))));
        const cplx amp = std::polar(tone.amplitude, tone.phase);
        const cplx step = std::polar(1.0, w * dt);
        cplx phase = std::polar(1.0, w * static_cast<double>(n0) * dt);
        for (std::size_t n = n0; n < n1; ++n) {
            if ((n - n0) % kResyncInterval == 0)
                phase = std::polar(1.0, w * static_cast<double>(n) * dt);
            wf.samples[n] += amp * phase;
            phase *= step;
        }
    }
    return wf;
}

ComplexWaveform synthesize_comb(const ReadoutComb& comb, double span, double fs) {
    std::vector<bool> seen;
    for (const auto& t : comb.tones) {
        if (t.channel >= 64) throw ConfigError("tone channel index out of range");
        if (seen.size() <= t.channel) seen.resize(t.channel + 1, false);
        if (seen[t.channel])
            throw ConfigError("readout comb has more than one tone on a channel");
        seen[t.channel] = true;
    }
    return synthesize_tones(comb.tones, span, fs);
}

namespace {

struct ToneRt {
    double w = 0.0;       // rad/us
    double start = 0.0;
    double end = 0.0;
    cplx amp;             // A * exp(i phi)
    cplx phase{1.0, 0.0}; // exp(i w t), resynced at events
    cplx sample_step;     // exp(i w dt)

    bool covers(double ta, double tb) const {
        return start <= ta + 1e-12 && tb <= end + 1e-12;
    }
};

struct ChannelRt {
    double sqrt_ke = 0.0;  // sqrt(2 pi kappa_ext)
    cplx mu[2];            // kappa_ang/2 - i * 2 pi * pulled_offset, per state
    cplx decay_sample[2];  // exp(-mu dt)
    // Tones this cavity is coupled to (leakage non-zero), with the drive
    // coefficient sqrt_ke * xi * amp / (mu + i w) for each qubit state.
    struct Coupling {
        std::size_t tone;
        cplx coeff[2];
    };
    std::vector<Coupling> couplings;
    int state = 0;
    cplx a{0.0, 0.0};
};

}  // namespace

ReflectionResult reflect(const DeviceConfig& dev,
                         const std::vector<StateTimeline>& states,
                         const std::vector<ToneSpec>& tones, double span, double fs,
                         const ReflectOptions& opt) {
    const std::size_t nch = dev.num_channels();
    if (states.size() != nch)
        throw ConfigError("reflect: one state timeline per channel required");
    if (fs <= 0.0) throw ConfigError("reflect: sample rate must be positive");

    const std::size_t nsamp = sample_count(span, fs);
    const double dt = 1.0 / fs;

    // Resolution guard: every linewidth and every coupled tone-cavity
    // detuning must be oversampled by at least 10x for the rendered
    // output to be trustworthy.
    for (std::size_t j = 0; j < nch; ++j) {
        const auto& q = dev.channels[j];
        if (fs < 10.0 * q.kappa_total()) {
            std::ostringstream os;
            os << "sample rate " << fs << " MHz undersamples the " << q.kappa_total()
               << " MHz linewidth of channel '" << q.label << "'";
            throw ConfigError(os.str());
        }
        for (const auto& tone : tones) {
            if (dev.leakage(j, tone.channel) == 0.0) continue;
            for (QubitState s : {QubitState::kGround, QubitState::kExcited}) {
                const double pulled = (pulled_resonance(q, s) - dev.carrier_freq) * 1e3;
                const double delta = std::abs(tone.offset - pulled);
                if (delta > 0.0 && fs < 10.0 * delta) {
                    std::ostringstream os;
                    os << "sample rate " << fs << " MHz undersamples the " << delta
                       << " MHz detuning between a tone and channel '" << q.label << "'";
                    throw ConfigError(os.str());
                }
            }
        }
    }

    ReflectionResult res;
    res.incident = synthesize_tones(tones, span, fs);
    res.reflected.sample_rate = fs;
    res.reflected.t0 = 0.0;
    res.reflected.samples.resize(nsamp);

    // Runtime tone table.
    std::vector<ToneRt> trt(tones.size());
    for (std::size_t k = 0; k < tones.size(); ++k) {
        trt[k].w = kTwoPi * tones[k].offset;
        trt[k].start = tones[k].start;
        trt[k].end = tones[k].start + tones[k].duration;
        trt[k].amp = std::polar(tones[k].amplitude, tones[k].phase);
        trt[k].sample_step = std::polar(1.0, trt[k].w * dt);
    }

    // Runtime channel table.
    std::vector<ChannelRt> crt(nch);
    for (std::size_t j = 0; j < nch; ++j) {
        const auto& q = dev.channels[j];
        auto& c = crt[j];
        c.sqrt_ke = std::sqrt(kTwoPi * q.kappa_ext);
        const double lambda = std::numbers::pi * q.kappa_total();
        for (int s = 0; s < 2; ++s) {
            const double pulled =
                (pulled_resonance(q, static_cast<QubitState>(s)) - dev.carrier_freq) * 1e3;
            c.mu[s] = cplx(lambda, -kTwoPi * pulled);
            c.decay_sample[s] = std::exp(-c.mu[s] * dt);
        }
        for (std::size_t k = 0; k < tones.size(); ++k) {
            const double xi = dev.leakage(j, tones[k].channel);
            if (xi == 0.0) continue;
            ChannelRt::Coupling cp;
            cp.tone = k;
            for (int s = 0; s < 2; ++s)
                cp.coeff[s] = c.sqrt_ke * xi * trt[k].amp / (c.mu[s] + cplx(0.0, trt[k].w));
            c.couplings.push_back(cp);
        }
        c.state = static_cast<int>(states[j].at(0.0));
        if (opt.initial_state.has_value()) {
            const auto& init = *opt.initial_state;
            if (init.amplitude.size() != nch)
                throw ConfigError("reflect: initial cavity state has wrong channel count");
            c.a = init.amplitude[j];
        }
    }

    // Event times where some coefficient changes: gate edges and qubit
    // flips. Steps never straddle an event.
    std::vector<double> events;
    for (const auto& t : trt) {
        if (t.start > 0.0 && t.start < span) events.push_back(t.start);
        if (t.end > 0.0 && t.end < span) events.push_back(t.end);
    }
    for (const auto& st : states)
        for (double ft : st.flip_times)
            if (ft > 0.0 && ft < span) events.push_back(ft);
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());

    if (opt.record_cavity_trajectory) res.cavity_trajectory.resize(nsamp);

    auto emit = [&](std::size_t n) {
        cplx drain{0.0, 0.0};
        for (const auto& c : crt) drain += c.sqrt_ke * c.a;
        res.reflected.samples[n] = res.incident.samples[n] - drain;
        if (opt.record_cavity_trajectory) {
            auto& snap = res.cavity_trajectory[n];
            snap.amplitude.resize(nch);
            for (std::size_t j = 0; j < nch; ++j) snap.amplitude[j] = crt[j].a;
        }
    };

    // Advance all cavities from ta to tb (no event strictly inside). The
    // update is the exact solution of the driven single-pole ODE:
    //   a(tb) = E a(ta) + sum_k C_k (phase_k(tb) - E phase_k(ta)),
    // E = exp(-mu h). `exact` selects the precomputed one-sample factors.
    auto advance = [&](double ta, double tb, bool exact) {
        const double h = tb - ta;
        for (auto& t : trt) t.phase = exact ? t.phase * t.sample_step
                                            : std::polar(1.0, t.w * tb);
        for (auto& c : crt) {
            const cplx e = exact ? c.decay_sample[c.state] : std::exp(-c.mu[c.state] * h);
            cplx acc = e * c.a;
            for (const auto& cp : c.couplings) {
                const auto& t = trt[cp.tone];
                if (!t.covers(ta, tb)) continue;
                // phase before this step is phase(tb)/step; recompute from
                // tb to avoid keeping two copies per tone.
                const cplx ph_b = t.phase;
                const cplx ph_a = exact ? ph_b / t.sample_step : std::polar(1.0, t.w * ta);
                acc += cp.coeff[c.state] * (ph_b - e * ph_a);
            }
            c.a = acc;
        }
    };

    std::size_t ev = 0;
    emit(0);
    for (std::size_t n = 0; n + 1 <= nsamp; ++n) {
        const double ta = static_cast<double>(n) * dt;
        const double tb = static_cast<double>(n + 1) * dt;  // == span on the last step
        double cursor = ta;
        bool split = false;
        while (ev < events.size() && events[ev] <= tb - 1e-12) {
            const double te = events[ev];
            if (te > cursor + 1e-12) advance(cursor, te, false);
            cursor = te;
            split = true;
            // Apply the state flips scheduled exactly at te.
            for (std::size_t j = 0; j < nch; ++j) {
                const auto s = static_cast<int>(states[j].at(te));
                crt[j].state = s;
            }
            ++ev;
        }
        if (split || (n % kResyncInterval == kResyncInterval - 1)) {
            advance(cursor, tb, false);
        } else {
            advance(cursor, tb, true);
        }
        if (n + 1 < nsamp) emit(n + 1);
    }

    res.final_state.amplitude.resize(nch);
    for (std::size_t j = 0; j < nch; ++j) res.final_state.amplitude[j] = crt[j].a;
    return res;
}

ReflectionResult reflect(const DeviceConfig& dev, const std::vector<QubitState>& states,
                         const ReadoutComb& comb, double span, double fs,
                         const ReflectOptions& opt) {
    std::vector<StateTimeline> timelines(states.size());
    for (std::size_t j = 0; j < states.size(); ++j) timelines[j].initial = states[j];
    return reflect(dev, timelines, comb.tones, span, fs, opt);
}

cplx steady_state_reflection(const QubitCavityConfig& q, double delta) {
    return 1.0 - q.kappa_ext / cplx(0.5 * q.kappa_total(), delta);
}

double steady_state_photons(const QubitCavityConfig& q, double amplitude, double delta) {
    const double lambda = std::numbers::pi * q.kappa_total();
    const double wd = kTwoPi * delta;
    return kTwoPi * q.kappa_ext * amplitude * amplitude / (lambda * lambda + wd * wd);
}

double amplitude_for_photons(const QubitCavityConfig& q, double nbar, double delta) {
    if (nbar < 0.0) throw ConfigError("photon number target must be non-negative");
    const double lambda = std::numbers::pi * q.kappa_total();
    const double wd = kTwoPi * delta;
    return std::sqrt(nbar * (lambda * lambda + wd * wd) / (kTwoPi * q.kappa_ext));
}

}  // namespace muxsim
