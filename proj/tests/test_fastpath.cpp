#include <doctest.h>

#include <muxsim/demod.hpp>
#include <muxsim/device.hpp>
#include <muxsim/fastpath.hpp>
#include <muxsim/feedline.hpp>

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

using namespace muxsim;

namespace {

DeviceConfig one_channel() {
    DeviceConfig dev;
    dev.carrier_freq = 5.875;  // tone offset -19 MHz
    QubitCavityConfig q;
    q.label = "C1";
    q.cavity_freq = 5.856;
    q.kappa_ext = 8.3;
    q.kappa_int = 0.1;
    q.qubit_freq = 3.752;
    q.anharmonicity = -318.0;
    q.coupling_g = 126.0;
    q.t1 = 50.1;
    q.t2_ramsey = 2.1;
    q.thermal_excited_pop = 0.04;
    dev.channels.push_back(q);
    return dev;
}

ToneSpec main_tone(const DeviceConfig& dev, double start, double duration) {
    ToneSpec t;
    t.channel = 0;
    t.offset = dev.tone_offset(0);
    t.amplitude = 1.9;
    t.phase = 0.45;
    t.start = start;
    t.duration = duration;
    return t;
}

}  // namespace

TEST_CASE("fastpath: steady output equals the reflection coefficient") {
    const auto dev = one_channel();
    const auto& q = dev.channels[0];
    auto tone = main_tone(dev, 0.0, 10.0);
    FastChannel fc(q, dev.carrier_freq, tone);
    const cplx drive = tone.amplitude * std::polar(1.0, tone.phase);
    for (QubitState s : {QubitState::kGround, QubitState::kExcited}) {
        const double pulled = (pulled_resonance(q, s) - dev.carrier_freq) * 1e3;
        const cplx expect = steady_state_reflection(q, tone.offset - pulled) * drive;
        CHECK(std::abs(fc.steady_output(s) - expect) < 1e-12);
    }
}

TEST_CASE("fastpath: settled integral is the steady output times the window") {
    const auto dev = one_channel();
    auto tone = main_tone(dev, 0.0, 10.0);
    FastChannel fc(dev.channels[0], dev.carrier_freq, tone);
    StateTimeline tl;  // stays in g
    const cplx integral = fc.integrate(tl, 5.0, 6.25);
    const cplx expect = fc.steady_output(QubitState::kGround) * 1.25;
    CHECK(std::abs(integral - expect) < 1e-10 * std::abs(expect));
}

TEST_CASE("fastpath: matches reflect plus demodulate without flips") {
    const auto dev = one_channel();
    const double fs = 16000.0;
    const double span = 2.0;
    // Herald gate then main gate, one tone object.
    ToneSpec tone = main_tone(dev, 0.0, 0.0);
    std::vector<std::pair<double, double>> gates = {{0.0, 0.5}, {0.9, 1.9}};

    for (QubitState s : {QubitState::kGround, QubitState::kExcited}) {
        std::vector<ToneSpec> tones;
        for (auto [a, b] : gates) {
            ToneSpec t = tone;
            t.start = a;
            t.duration = b - a;
            tones.push_back(t);
        }
        StateTimeline tl;
        tl.initial = s;
        auto res = reflect(dev, {tl}, tones, span, fs);

        DemodSpec spec;
        spec.offset = tone.offset;
        spec.integration_start = 1.0;
        spec.integration_length = 0.875;
        auto slow = demodulate(res.reflected, spec).integrated_point;

        FastChannel fc(dev.channels[0], dev.carrier_freq, tone, gates);
        auto fast = fc.integrate(tl, 1.0, 1.875);
        CHECK(std::abs(fast - slow) < 2e-4 * std::abs(slow));

        // Herald window too, including ring-up from the empty cavity.
        FastChannel fc2(dev.channels[0], dev.carrier_freq, tone, gates);
        DemodSpec hs = spec;
        hs.integration_start = 0.0;
        hs.integration_length = 0.5;
        auto slow_h = demodulate(res.reflected, hs).integrated_point;
        auto fast_h = fc2.integrate(tl, 0.0, 0.5);
        CHECK(std::abs(fast_h - slow_h) < 2e-4 * std::abs(slow_h));
    }
}

TEST_CASE("fastpath: matches reflect plus demodulate across a mid-window flip") {
    const auto dev = one_channel();
    const double fs = 16000.0;
    ToneSpec tone = main_tone(dev, 0.9, 1.0);
    StateTimeline tl;
    tl.initial = QubitState::kExcited;
    tl.flip_times = {1.2345};  // not on a sample boundary

    auto res = reflect(dev, {tl}, {tone}, 2.0, fs);
    DemodSpec spec;
    spec.offset = tone.offset;
    spec.integration_start = 1.0;
    spec.integration_length = 0.875;
    auto slow = demodulate(res.reflected, spec).integrated_point;

    FastChannel fc(dev.channels[0], dev.carrier_freq, tone);
    auto fast = fc.integrate(tl, 1.0, 1.875);
    CHECK(std::abs(fast - slow) < 2e-3 * std::abs(slow));
}

TEST_CASE("fastpath: bin means tile the integral and match demod traces") {
    const auto dev = one_channel();
    const double fs = 16000.0;
    ToneSpec tone = main_tone(dev, 0.0, 2.0);
    StateTimeline tl;
    tl.initial = QubitState::kGround;
    tl.flip_times = {0.73};

    FastChannel whole(dev.channels[0], dev.carrier_freq, tone);
    const cplx integral = whole.integrate(tl, 0.25, 1.25);

    FastChannel binned(dev.channels[0], dev.carrier_freq, tone);
    auto bins = binned.integrate_bins(tl, 0.25, 0.1, 10);
    REQUIRE(bins.size() == 10);
    cplx acc{0.0, 0.0};
    for (const auto& b : bins) acc += b * 0.1;
    CHECK(std::abs(acc - integral) < 1e-10 * std::abs(integral));

    // And the bins agree with the rendered trace.
    auto res = reflect(dev, {tl}, {tone}, 2.0, fs);
    DemodSpec spec;
    spec.offset = tone.offset;
    spec.integration_start = 0.25;
    spec.integration_length = 1.0;
    spec.trace_bin = 0.1;
    auto slow = demodulate(res.reflected, spec);
    REQUIRE(slow.trace.size() == 10);
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(std::abs(bins[i] - slow.trace[i]) < 2e-3 * std::abs(slow.trace[i]));
}

TEST_CASE("fastpath: windows split exactly at gate edges") {
    const auto dev = one_channel();
    ToneSpec tone = main_tone(dev, 0.0, 0.5);
    StateTimeline tl;

    FastChannel one_piece(dev.channels[0], dev.carrier_freq, tone);
    const cplx whole = one_piece.integrate(tl, 0.4, 0.6);

    FastChannel two_piece(dev.channels[0], dev.carrier_freq, tone);
    const cplx first = two_piece.integrate(tl, 0.4, 0.5);
    const cplx second = two_piece.integrate(tl, 0.5, 0.6);
    CHECK(std::abs(whole - (first + second)) < 1e-12);
}

TEST_CASE("fastpath: herald photons persist and ring down") {
    const auto dev = one_channel();
    const auto& q = dev.channels[0];
    ToneSpec tone = main_tone(dev, 0.0, 0.3);
    StateTimeline tl;

    FastChannel fc(dev.channels[0], dev.carrier_freq, tone);
    fc.advance(tl, 0.3);
    const double a_end = std::abs(fc.field());
    CHECK(a_end > 0.1);  // cavity charged by the herald
    fc.advance(tl, 0.45);
    // Free decay of the field at kappa_t / 2 in angular units.
    const double expect = a_end * std::exp(-M_PI * q.kappa_total() * 0.15);
    CHECK(std::abs(fc.field()) == doctest::Approx(expect).epsilon(1e-9));

    // reset() forgets everything.
    fc.reset();
    CHECK(fc.now() == 0.0);
    CHECK(std::abs(fc.field()) == 0.0);
}
