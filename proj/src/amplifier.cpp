#include "muxsim/amplifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include <fftw3.h>

#include "muxsim/errors.hpp"
#include "muxsim/rng.hpp"

namespace muxsim {

namespace {

// FFTW plans are cached per transform length. Plan creation is not
// thread-safe and is serialized; execution through the new-array API is.
struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

PlanPair plans_for(std::size_t n) {
    static std::mutex mtx;
    static std::map<std::size_t, PlanPair> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    std::vector<cplx> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    PlanPair pp;
    pp.fwd = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD,
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
    pp.bwd = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD,
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache[n] = pp;
    return pp;
}

}  // namespace

double gain_profile(const AmplifierConfig& amp, double freq_ghz) {
    double gain_db;
    if (!amp.gain_table.empty()) {
        const auto& tab = amp.gain_table;
        if (freq_ghz <= tab.front().freq) {
            gain_db = tab.front().gain_db;
        } else if (freq_ghz >= tab.back().freq) {
            gain_db = tab.back().gain_db;
        } else {
            auto hi = std::lower_bound(
                tab.begin(), tab.end(), freq_ghz,
                [](const GainPoint& p, double f) { return p.freq < f; });
            auto lo = hi - 1;
            const double u = (freq_ghz - lo->freq) / (hi->freq - lo->freq);
            gain_db = lo->gain_db + u * (hi->gain_db - lo->gain_db);
        }
    } else {
        const double x = 2.0 * (freq_ghz - amp.pump_freq) / (amp.bandwidth * 1e-3);
        gain_db = amp.peak_gain_db /
                  (1.0 + std::pow(x * x, amp.rolloff_order));
    }
    return std::pow(10.0, gain_db / 10.0);
}

ComplexWaveform amplify(const AmplifierConfig& amp, const ComplexWaveform& in,
                        double carrier_freq, RngStream& noise) {
    if (amp.efficiency <= 0.0)
        throw ConfigError("amplifier efficiency must be positive");
    if (amp.rolloff_order < 1)
        throw ConfigError("amplifier rolloff_order must be at least 1");

    ComplexWaveform out = in;
    const std::size_t n = out.samples.size();
    if (n == 0) return out;

    // Input-referred noise: each quadrature gets variance fs / (4 eta) per
    // sample, so a boxcar of length tau integrates to variance tau/(4 eta).
    if (std::isfinite(amp.efficiency)) {
        const double sigma = std::sqrt(in.sample_rate / (4.0 * amp.efficiency));
        for (auto& s : out.samples)
            s += cplx(sigma * noise.normal(), sigma * noise.normal());
    }

    if (std::isfinite(amp.saturation_flux)) {
        const double s2 = amp.saturation_flux * amp.saturation_flux;
        for (auto& s : out.samples)
            s /= std::sqrt(1.0 + std::norm(s) / s2);
    }

    const PlanPair pp = plans_for(n);
    auto* buf = reinterpret_cast<fftw_complex*>(out.samples.data());
    fftw_execute_dft(pp.fwd, buf, buf);
    for (std::size_t k = 0; k < n; ++k) {
        const double kk = (k <= n / 2) ? static_cast<double>(k)
                                       : static_cast<double>(k) - static_cast<double>(n);
        const double f_mhz = kk * in.sample_rate / static_cast<double>(n);
        const double g = gain_profile(amp, carrier_freq + f_mhz * 1e-3);
        out.samples[k] *= std::sqrt(g);
    }
    fftw_execute_dft(pp.bwd, buf, buf);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& s : out.samples) s *= inv_n;
    return out;
}

double decimator_response(double freq, int m, double fs_in) {
    if (m == 1) return 1.0;
    const double x = std::numbers::pi * freq / fs_in;
    if (std::abs(std::sin(x)) < 1e-300) return 1.0;
    return std::sin(static_cast<double>(m) * x) /
           (static_cast<double>(m) * std::sin(x));
}

ComplexWaveform digitize(const DigitizerConfig& dig, const ComplexWaveform& in,
                         RngStream& noise) {
    if (dig.sample_rate <= 0.0) throw ConfigError("digitizer sample_rate must be positive");
    const double ratio = in.sample_rate / dig.sample_rate;
    const int m = static_cast<int>(std::llround(ratio));
    if (m < 1 || std::abs(ratio - m) > 1e-9)
        throw ConfigError("digitizer rate must divide the simulation rate exactly");

    ComplexWaveform out;
    out.sample_rate = dig.sample_rate;
    // Block averages represent the centre of each block.
    out.t0 = in.t0 + 0.5 * (m - 1) / in.sample_rate;
    const std::size_t nout = in.samples.size() / static_cast<std::size_t>(m);
    out.samples.resize(nout);
    const double inv_m = 1.0 / m;
    for (std::size_t i = 0; i < nout; ++i) {
        cplx acc{0.0, 0.0};
        const std::size_t base = i * static_cast<std::size_t>(m);
        for (int k = 0; k < m; ++k) acc += in.samples[base + k];
        out.samples[i] = acc * inv_m;
    }

    if (dig.adc_noise_flux > 0.0) {
        const double sigma = dig.adc_noise_flux * std::sqrt(dig.sample_rate / 4.0);
        for (auto& s : out.samples)
            s += cplx(sigma * noise.normal(), sigma * noise.normal());
    }
    return out;
}

std::vector<GainPoint> load_gain_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open gain table '" + path + "'");
    std::vector<GainPoint> table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        // Allow a non-numeric header row.
        if (lineno == 1 && line.find_first_not_of("0123456789+-.,eE \t\r") != std::string::npos)
            continue;
        std::istringstream row(line);
        GainPoint p;
        char comma = 0;
        if (!(row >> p.freq >> comma >> p.gain_db) || comma != ',') {
            std::ostringstream os;
            os << "gain table '" << path << "' line " << lineno
               << ": expected 'freq_ghz,gain_db'";
            throw ConfigError(os.str());
        }
        if (!table.empty() && p.freq <= table.back().freq)
            throw ConfigError("gain table '" + path + "' frequencies must be ascending");
        table.push_back(p);
    }
    if (table.size() < 2)
        throw ConfigError("gain table '" + path + "' needs at least two rows");
    return table;
}

}  // namespace muxsim
