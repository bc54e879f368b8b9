#include <doctest.h>

#include <muxsim/amplifier.hpp>
#include <muxsim/errors.hpp>
#include <muxsim/rng.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <vector>

using namespace muxsim;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
const double kInf = std::numeric_limits<double>::infinity();

AmplifierConfig flat_amp(double efficiency) {
    AmplifierConfig amp;
    amp.pump_freq = 5.984;
    amp.efficiency = efficiency;
    amp.gain_table = {{5.0, 20.0}, {7.0, 20.0}};  // flat 20 dB across band
    return amp;
}

ComplexWaveform tone(double freq, double amp, double span, double fs) {
    ComplexWaveform wf;
    wf.sample_rate = fs;
    wf.samples.resize(static_cast<std::size_t>(std::llround(span * fs)));
    for (std::size_t n = 0; n < wf.samples.size(); ++n)
        wf.samples[n] = amp * std::exp(cplx(0.0, kTwoPi * freq * wf.time_at(n)));
    return wf;
}

ComplexWaveform zeros(std::size_t n, double fs) {
    ComplexWaveform wf;
    wf.sample_rate = fs;
    wf.samples.assign(n, cplx{0.0, 0.0});
    return wf;
}

}  // namespace

TEST_CASE("amplifier: analytic gain rolloff") {
    AmplifierConfig amp;
    amp.pump_freq = 5.984;
    amp.peak_gain_db = 20.0;
    amp.bandwidth = 380.0;
    amp.rolloff_order = 1;
    CHECK(gain_profile(amp, 5.984) == doctest::Approx(100.0).epsilon(1e-12));
    // Half-bandwidth away the exponent halves: 10 dB, linear power 10.
    CHECK(gain_profile(amp, 5.984 + 0.190) == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(gain_profile(amp, 5.984 - 0.190) == doctest::Approx(10.0).epsilon(1e-9));
    // One full bandwidth out: 20/(1+16) dB for order 2.
    amp.rolloff_order = 2;
    CHECK(gain_profile(amp, 5.984 + 0.380) ==
          doctest::Approx(std::pow(10.0, 20.0 / 17.0 / 10.0)).epsilon(1e-9));
}

TEST_CASE("amplifier: tabulated gain interpolates in dB and clamps") {
    AmplifierConfig amp;
    amp.gain_table = {{5.8, 10.0}, {6.0, 20.0}};
    CHECK(gain_profile(amp, 5.9) == doctest::Approx(31.6227766).epsilon(1e-9));
    CHECK(gain_profile(amp, 5.0) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(gain_profile(amp, 6.5) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("amplifier: pure tone is scaled by sqrt(G) at its own frequency") {
    AmplifierConfig amp;
    amp.pump_freq = 5.984;
    amp.peak_gain_db = 20.0;
    amp.bandwidth = 380.0;
    amp.rolloff_order = 1;
    amp.efficiency = kInf;  // noiseless

    const double f0 = 37.0;  // integer bin of a 1 us record at 1000 MHz
    auto in = tone(f0, 0.8, 1.0, 1000.0);
    RngStream rng(1, 0, kFeedlineChannel, RngStage::kAmplifierNoise);
    auto out = amplify(amp, in, 5.984, rng);
    const double scale = std::sqrt(gain_profile(amp, 5.984 + f0 * 1e-3));
    for (std::size_t n = 0; n < in.samples.size(); n += 97) {
        CHECK(std::abs(out.samples[n] - scale * in.samples[n]) < 1e-9);
    }
}

TEST_CASE("amplifier: input-referred noise variance is fs G / (4 eta)") {
    const double eta = 0.25;
    auto amp = flat_amp(eta);
    auto in = zeros(200000, 1000.0);
    RngStream rng(3, 0, kFeedlineChannel, RngStage::kAmplifierNoise);
    auto out = amplify(amp, in, 5.984, rng);
    double vr = 0.0, vi = 0.0;
    for (const auto& s : out.samples) {
        vr += s.real() * s.real();
        vi += s.imag() * s.imag();
    }
    vr /= out.samples.size();
    vi /= out.samples.size();
    const double expect = 100.0 * 1000.0 / (4.0 * eta);
    CHECK(vr == doctest::Approx(expect).epsilon(0.02));
    CHECK(vi == doctest::Approx(expect).epsilon(0.02));
}

TEST_CASE("amplifier: infinite efficiency adds no noise") {
    auto amp = flat_amp(kInf);
    auto in = zeros(4096, 1000.0);
    RngStream rng(3, 0, kFeedlineChannel, RngStage::kAmplifierNoise);
    auto out = amplify(amp, in, 5.984, rng);
    for (const auto& s : out.samples) CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("amplifier: soft saturation compresses the envelope") {
    auto amp = flat_amp(kInf);
    amp.saturation_flux = 3.0;
    auto in = tone(0.0, 3.0, 0.5, 1000.0);  // constant envelope at the carrier
    RngStream rng(5, 0, kFeedlineChannel, RngStage::kAmplifierNoise);
    auto out = amplify(amp, in, 5.984, rng);
    // |A| = sat: compression factor 1/sqrt(2); flat gain adds sqrt(100).
    const double expect = 10.0 * 3.0 / std::sqrt(2.0);
    for (std::size_t n = 100; n < 400; n += 50)
        CHECK(std::abs(out.samples[n]) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("amplifier: bad configuration throws") {
    auto in = zeros(16, 1000.0);
    RngStream rng(1, 0, kFeedlineChannel, RngStage::kAmplifierNoise);
    AmplifierConfig amp;
    amp.efficiency = 0.0;
    CHECK_THROWS_AS((void)amplify(amp, in, 5.984, rng), ConfigError);
    amp.efficiency = 0.35;
    amp.rolloff_order = 0;
    CHECK_THROWS_AS((void)amplify(amp, in, 5.984, rng), ConfigError);
}

TEST_CASE("digitizer: block average, centre timestamps and droop") {
    DigitizerConfig dig;
    dig.sample_rate = 100.0;
    const double f0 = 30.0;
    auto in = tone(f0, 1.0, 1.0, 1000.0);
    RngStream rng(7, 0, kFeedlineChannel, RngStage::kAdcNoise);
    auto out = digitize(dig, in, rng);
    REQUIRE(out.samples.size() == 100);
    CHECK(out.sample_rate == 100.0);
    // t0 moves to the centre of the first 10-sample block.
    CHECK(out.t0 == doctest::Approx(0.5 * 9.0 / 1000.0).epsilon(1e-12));

    // Block-averaging a tone leaves a pure tone at the block centres,
    // attenuated by the Dirichlet droop sin(pi f m/fs)/(m sin(pi f/fs)).
    const double droop = decimator_response(f0, 10, 1000.0);
    CHECK(droop == doctest::Approx(0.8596657).epsilon(1e-6));
    for (std::size_t k = 0; k < out.samples.size(); k += 7) {
        const cplx expect =
            droop * std::exp(cplx(0.0, kTwoPi * f0 * out.time_at(k)));
        CHECK(std::abs(out.samples[k] - expect) < 1e-12);
    }
}

TEST_CASE("digitizer: unity factor passes through") {
    DigitizerConfig dig;
    dig.sample_rate = 1000.0;
    auto in = tone(21.0, 0.4, 0.25, 1000.0);
    RngStream rng(7, 0, kFeedlineChannel, RngStage::kAdcNoise);
    auto out = digitize(dig, in, rng);
    REQUIRE(out.samples.size() == in.samples.size());
    CHECK(out.t0 == in.t0);
    for (std::size_t n = 0; n < in.samples.size(); n += 31)
        CHECK(out.samples[n] == in.samples[n]);
}

TEST_CASE("digitizer: non-integer decimation is rejected") {
    auto in = zeros(1000, 1000.0);
    RngStream rng(7, 0, kFeedlineChannel, RngStage::kAdcNoise);
    DigitizerConfig dig;
    dig.sample_rate = 300.0;
    CHECK_THROWS_AS((void)digitize(dig, in, rng), ConfigError);
    dig.sample_rate = 2000.0;
    CHECK_THROWS_AS((void)digitize(dig, in, rng), ConfigError);
}

TEST_CASE("digitizer: adc noise variance") {
    DigitizerConfig dig;
    dig.sample_rate = 1000.0;
    dig.adc_noise_flux = 0.7;
    auto in = zeros(200000, 1000.0);
    RngStream rng(9, 0, kFeedlineChannel, RngStage::kAdcNoise);
    auto out = digitize(dig, in, rng);
    double vr = 0.0;
    for (const auto& s : out.samples) vr += s.real() * s.real();
    vr /= out.samples.size();
    // sigma^2 = adc^2 fs / 4 per quadrature.
    CHECK(vr == doctest::Approx(0.49 * 250.0).epsilon(0.02));
}

TEST_CASE("amplifier: gain table loads from csv") {
    const std::string path = "test_gain_table.csv";
    {
        std::ofstream f(path);
        f << "freq_ghz,gain_db\n";
        f << "5.80,12.5\n";
        f << "5.99,21.0\n";
        f << "6.20,14.0\n";
    }
    auto table = load_gain_table(path);
    REQUIRE(table.size() == 3);
    CHECK(table[1].freq == doctest::Approx(5.99));
    CHECK(table[1].gain_db == doctest::Approx(21.0));
    std::remove(path.c_str());

    CHECK_THROWS_AS((void)load_gain_table("no_such_table.csv"), ConfigError);
}
