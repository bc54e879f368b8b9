#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace muxsim {

using cplx = std::complex<double>;

// Baseband complex envelope, uniformly sampled. Amplitudes are in
// sqrt(photons/us) ("flux" units) so |s|^2 is a photon flux; time is in us
// and sample_rate in MHz, which are exact reciprocals.
struct ComplexWaveform {
    std::vector<cplx> samples;
    double sample_rate = 0.0;  // MHz
    double t0 = 0.0;           // us, time of samples[0]
    std::string units = "sqrt(photons/us)";

    double dt() const { return 1.0 / sample_rate; }
    double time_at(std::size_t n) const { return t0 + static_cast<double>(n) / sample_rate; }
    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

}  // namespace muxsim
