#pragma once

#include <limits>
#include <string>
#include <vector>

#include "muxsim/waveform.hpp"

namespace muxsim {

class RngStream;

struct GainPoint {
    double freq = 0.0;     // GHz
    double gain_db = 0.0;  // power gain, dB
};

// Broadband parametric amplifier, modelled as a frequency-dependent phase-
// insensitive power gain plus input-referred white Gaussian noise with
// quantum efficiency `efficiency`. An infinite efficiency disables the
// added noise entirely (useful for calibration passes and tests).
struct AmplifierConfig {
    double pump_freq = 5.984;     // GHz
    double peak_gain_db = 20.0;
    double bandwidth = 380.0;     // MHz, 3 dB full width
    int rolloff_order = 1;        // Lorentzian-like rolloff exponent
    double efficiency = 0.35;     // quantum efficiency eta
    double saturation_flux = std::numeric_limits<double>::infinity();
    std::vector<GainPoint> gain_table;  // optional measured profile

    double band_low() const { return pump_freq - 0.5 * bandwidth * 1e-3; }
    double band_high() const { return pump_freq + 0.5 * bandwidth * 1e-3; }
};

// Power gain (linear, not dB) at an absolute frequency in GHz. Uses the
// tabulated profile when one is present (linear interpolation in dB,
// clamped at the table ends), otherwise the analytic rolloff
//   G_dB(f) = peak / (1 + (2 (f - pump) / BW)^(2 m)).
double gain_profile(const AmplifierConfig& amp, double freq_ghz);

// Apply the amplifier to a baseband waveform whose zero frequency sits at
// `carrier_freq` GHz. Adds input-referred noise (per-quadrature variance
// fs / (4 eta) per sample), applies the optional soft saturation
// A -> A / sqrt(1 + (|A|/sat)^2), then filters with sqrt(G(f)) in the
// frequency domain.
ComplexWaveform amplify(const AmplifierConfig& amp, const ComplexWaveform& in,
                        double carrier_freq, RngStream& noise);

struct DigitizerConfig {
    double sample_rate = 1000.0;  // MHz
    double adc_noise_flux = 0.0;  // white noise density, sqrt(photons/us)
};

// Decimate to the digitizer rate by block averaging (integer factor only)
// and add optional ADC noise. The output timestamp is shifted by half the
// averaging window so sample times refer to the centre of each block.
ComplexWaveform digitize(const DigitizerConfig& dig, const ComplexWaveform& in,
                         RngStream& noise);

// Amplitude response of the block-averaging decimator at frequency f (MHz)
// for decimation factor m and input rate fs_in (MHz).
double decimator_response(double freq, int m, double fs_in);

// Load a measured gain profile from CSV with rows "freq_ghz,gain_db".
std::vector<GainPoint> load_gain_table(const std::string& path);

}  // namespace muxsim
