#include "muxsim/demod.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "muxsim/errors.hpp"

namespace muxsim {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kResyncInterval = 1024;
}

DemodResult demodulate(const ComplexWaveform& wf, const DemodSpec& spec) {
    if (wf.sample_rate <= 0.0 || wf.samples.empty())
        throw ConfigError("demodulate: empty waveform");
    if (spec.integration_length <= 0.0)
        throw ConfigError("demodulate: integration_length must be positive");

    const double fs = wf.sample_rate;
    const double dt = 1.0 / fs;
    const double rel_start = (spec.integration_start - wf.t0) * fs;
    const double rel_end = rel_start + spec.integration_length * fs;
    const auto n0 = static_cast<std::ptrdiff_t>(std::ceil(rel_start - 1e-9));
    const auto n1 = static_cast<std::ptrdiff_t>(std::ceil(rel_end - 1e-9));
    if (n0 < 0 || n1 > static_cast<std::ptrdiff_t>(wf.samples.size()) || n1 <= n0)
        throw ConfigError("demodulate: integration window lies outside the waveform");
    const auto nwin = static_cast<std::size_t>(n1 - n0);

    std::size_t bin_samples = 0;
    std::size_t nbins = 0;
    if (spec.trace_bin > 0.0) {
        bin_samples = static_cast<std::size_t>(std::llround(spec.trace_bin * fs));
        if (bin_samples == 0 ||
            std::abs(spec.trace_bin * fs - static_cast<double>(bin_samples)) > 1e-6)
            throw ConfigError("demodulate: trace_bin must be an integer number of samples");
        if (nwin % bin_samples != 0)
            throw ConfigError("demodulate: integration window must be a whole number of trace bins");
        nbins = nwin / bin_samples;
    }

    DemodResult res;
    res.channel = spec.channel;
    res.trace_bin = spec.trace_bin;
    res.trace_t0 = wf.time_at(static_cast<std::size_t>(n0));
    res.trace.assign(nbins, cplx{0.0, 0.0});

    const double w = kTwoPi * spec.offset;
    // Mixer phase is taken at the absolute sample time, so decimator group
    // delay folded into t0 is compensated automatically.
    const cplx step = std::polar(1.0, -w * dt);
    cplx mix = std::polar(1.0, -w * wf.time_at(static_cast<std::size_t>(n0)));

    cplx point{0.0, 0.0};
    cplx bin_acc{0.0, 0.0};
    std::size_t bin = 0;
    std::size_t in_bin = 0;
    for (std::size_t i = 0; i < nwin; ++i) {
        if (i % kResyncInterval == 0 && i > 0)
            mix = std::polar(1.0, -w * wf.time_at(static_cast<std::size_t>(n0) + i));
        const cplx v = wf.samples[static_cast<std::size_t>(n0) + i] * mix;
        point += v;
        if (nbins > 0) {
            bin_acc += v;
            if (++in_bin == bin_samples) {
                res.trace[bin++] = bin_acc / static_cast<double>(bin_samples);
                bin_acc = cplx{0.0, 0.0};
                in_bin = 0;
            }
        }
        mix *= step;
    }
    res.integrated_point = point * dt;
    return res;
}

std::vector<DemodResult> demodulate_all(const ComplexWaveform& wf,
                                        const std::vector<DemodSpec>& specs) {
    std::vector<DemodResult> out;
    out.reserve(specs.size());
    for (const auto& s : specs) out.push_back(demodulate(wf, s));
    return out;
}

double min_tone_spacing(const std::vector<double>& offsets) {
    double best = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i)
        for (std::size_t j = i + 1; j < offsets.size(); ++j) {
            const double d = std::abs(offsets[i] - offsets[j]);
            if (best == 0.0 || d < best) best = d;
        }
    return best;
}

double snap_integration_length(double desired, double min_spacing) {
    if (desired <= 0.0)
        throw ConfigError("integration length must be positive");
    if (min_spacing <= 0.0) return desired;  // single tone, nothing to null
    const double period = 1.0 / min_spacing;
    const double k = std::floor(desired / period + 1e-9);
    return std::max(1.0, k) * period;
}

}  // namespace muxsim
