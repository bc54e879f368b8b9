#include <doctest.h>

#include <muxsim/device.hpp>
#include <muxsim/errors.hpp>
#include <muxsim/feedline.hpp>

#include <cmath>
#include <complex>
#include <vector>

using namespace muxsim;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Single channel pinned at the carrier so the bare-cavity tone offset is 0.
DeviceConfig one_channel(double kappa_ext, double kappa_int) {
    DeviceConfig dev;
    dev.carrier_freq = 5.856;
    QubitCavityConfig q;
    q.label = "C1";
    q.cavity_freq = 5.856;
    q.kappa_ext = kappa_ext;
    q.kappa_int = kappa_int;
    q.qubit_freq = 3.752;
    q.anharmonicity = -318.0;
    q.coupling_g = 126.0;
    q.t1 = 50.1;
    q.t2_ramsey = 2.1;
    q.thermal_excited_pop = 0.04;
    dev.channels.push_back(q);
    return dev;
}

double energy(const ComplexWaveform& wf) {
    double acc = 0.0;
    for (const auto& s : wf.samples) acc += std::norm(s);
    return acc * wf.dt();
}

// Trapezoidal power integral over samples [a, b). The grid cannot hold
// both one-sided values at a gate edge, so the caller supplies the power
// at the right end of the piece.
double energy_trapz(const ComplexWaveform& wf, std::size_t a, std::size_t b,
                    double end_power) {
    double acc = 0.5 * (std::norm(wf.samples[a]) + end_power);
    for (std::size_t i = a + 1; i < b; ++i) acc += std::norm(wf.samples[i]);
    return acc * wf.dt();
}

}  // namespace

TEST_CASE("feedline: steady-state reflection coefficient") {
    const auto dev = one_channel(8.3, 0.1);
    const auto& q = dev.channels[0];
    // Gamma(0) = 1 - kappa_e / (kappa_t / 2) = 1 - 8.3 / 4.2 = -0.9761905
    const cplx g0 = steady_state_reflection(q, 0.0);
    CHECK(g0.real() == doctest::Approx(-0.9761905).epsilon(1e-6));
    CHECK(g0.imag() == doctest::Approx(0.0));
    // Far off resonance the feedline barely notices the cavity.
    CHECK(std::abs(steady_state_reflection(q, 2000.0) - 1.0) < 0.01);
    // A lossless cavity reflects everything, at any detuning.
    const auto lossless = one_channel(8.3, 0.0).channels[0];
    for (double d : {0.0, 0.7, 3.0, 21.0}) {
        CHECK(std::abs(steady_state_reflection(lossless, d)) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("feedline: steady-state photon number and amplitude roundtrip") {
    const auto dev = one_channel(8.3, 0.1);
    const auto& q = dev.channels[0];
    // nbar = 2 pi k_e A^2 / ((pi k_t)^2 + (2 pi d)^2); at A = 1, d = 0:
    // 2 pi 8.3 / (pi 8.4)^2 = 0.0748857.
    CHECK(steady_state_photons(q, 1.0, 0.0) == doctest::Approx(0.0748857).epsilon(1e-6));
    for (double nbar : {0.1, 2.5, 60.0}) {
        for (double delta : {0.0, -1.4, 6.0}) {
            const double a = amplitude_for_photons(q, nbar, delta);
            CHECK(steady_state_photons(q, a, delta) ==
                  doctest::Approx(nbar).epsilon(1e-12));
        }
    }
}

TEST_CASE("feedline: driven cavity settles onto the closed-form fixed point") {
    const auto dev = one_channel(8.3, 0.1);
    const auto& q = dev.channels[0];
    const double chi = dispersive_shift(q);
    const double fs = 2000.0;
    const double span = 2.0;
    const double amp = 1.7;

    // Tone parked on the ground-state pulled resonance.
    ToneSpec tone;
    tone.channel = 0;
    tone.offset = chi;  // bare cavity at offset 0
    tone.amplitude = amp;
    tone.start = 0.0;
    tone.duration = span;

    auto res = reflect(dev, std::vector<QubitState>{QubitState::kGround},
                       ReadoutComb{{tone}}, span, fs);
    const cplx a_end = res.final_state.amplitude[0];
    CHECK(std::norm(a_end) ==
          doctest::Approx(steady_state_photons(q, amp, 0.0)).epsilon(1e-9));
    // Phase: a_ss = sqrt(2 pi k_e) A e^{i w t} / (pi k_t) at zero detuning.
    const cplx expected = std::sqrt(kTwoPi * q.kappa_ext) * amp *
                          std::exp(cplx(0.0, kTwoPi * tone.offset * span)) /
                          (M_PI * q.kappa_total());
    CHECK(std::abs(a_end - expected) < 1e-9 * std::abs(expected));
}

TEST_CASE("feedline: post-flip transient follows the analytic single-pole solution") {
    const auto dev = one_channel(8.3, 0.1);
    const auto& q = dev.channels[0];
    const double chi = dispersive_shift(q);
    const double fs = 2000.0;
    const double span = 4.0;
    const double tf = 2.0;
    const double amp = 1.3;

    ToneSpec tone;
    tone.channel = 0;
    tone.offset = chi;  // on the g-state pulled resonance
    tone.amplitude = amp;
    tone.start = 0.0;
    tone.duration = span;

    StateTimeline tl;
    tl.initial = QubitState::kGround;
    tl.flip_times = {tf};

    ReflectOptions opt;
    opt.record_cavity_trajectory = true;
    auto res = reflect(dev, {tl}, {tone}, span, fs, opt);
    REQUIRE(res.cavity_trajectory.size() == res.reflected.samples.size());

    const double w_g = chi;   // pulled offsets from the carrier, MHz
    const double w_e = -chi;
    const cplx mu_e(M_PI * q.kappa_total(), -kTwoPi * w_e);
    const cplx i_omega(0.0, kTwoPi * tone.offset);
    const cplx drive = std::sqrt(kTwoPi * q.kappa_ext) * amp;
    const cplx c_e = drive / (mu_e + i_omega);

    const std::size_t n_f = static_cast<std::size_t>(tf * fs);
    const cplx a_f = res.cavity_trajectory[n_f].amplitude[0];
    // By tf the g-state fixed point has been reached.
    const cplx c_g = drive / (cplx(M_PI * q.kappa_total(), -kTwoPi * w_g) + i_omega);
    CHECK(std::abs(a_f - c_g * std::exp(i_omega * tf)) < 1e-8 * std::abs(c_g));

    for (double t : {2.05, 2.1, 2.3, 2.8, 3.9}) {
        const std::size_t n = static_cast<std::size_t>(std::llround(t * fs));
        const cplx rot = std::exp(i_omega * t);
        const cplx analytic =
            c_e * rot + (a_f - c_e * std::exp(i_omega * tf)) *
                            std::exp(-mu_e * (t - tf));
        const cplx got = res.cavity_trajectory[n].amplitude[0];
        CHECK(std::abs(got - analytic) < 1e-8 * std::max(1.0, std::abs(analytic)));
    }
}

TEST_CASE("feedline: lossless cavity conserves pulse energy") {
    // kappa_int = 0: every photon sent down the line comes back out.
    const auto dev = one_channel(8.3, 0.0);
    const double fs = 80000.0;
    const double span = 3.0;
    const double amp = 2.0;

    ToneSpec tone;
    tone.channel = 0;
    tone.offset = 0.0;  // bare cavity
    tone.amplitude = amp;
    tone.start = 0.0;
    tone.duration = 0.3;

    auto res = reflect(dev, std::vector<QubitState>{QubitState::kGround},
                       ReadoutComb{{tone}}, span, fs);
    const double e_in = energy(res.incident);
    CHECK(e_in == doctest::Approx(amp * amp * 0.3).epsilon(1e-6));

    // |reflected|^2 jumps when the gate switches off, so a plain Riemann
    // sum is only O(dt) accurate there. Integrate the two smooth pieces
    // with the trapezoid rule instead: the drain is continuous across the
    // edge, so the left limit is the edge sample plus the incident tone
    // (exactly `amp` at zero offset and phase), and by the end of the
    // record the ring-down has decayed to ~exp(-140).
    const auto edge = static_cast<std::size_t>(std::llround(0.3 * fs));
    const double edge_left = std::norm(res.reflected.samples[edge] + amp);
    const double e_out =
        energy_trapz(res.reflected, 0, edge, edge_left) +
        energy_trapz(res.reflected, edge, res.reflected.samples.size(), 0.0);
    CHECK(std::abs(e_out - e_in) / e_in < 1e-6);
    // The cavity itself has rung down by the end of the record.
    CHECK(std::norm(res.final_state.amplitude[0]) < 1e-12);
}

TEST_CASE("feedline: lossy cavity absorbs the kappa_int fraction") {
    const auto dev = one_channel(8.3, 0.1);
    const auto& q = dev.channels[0];
    const double fs = 40000.0;
    ToneSpec tone;
    tone.channel = 0;
    tone.offset = dispersive_shift(q);  // on the g-pulled resonance
    tone.amplitude = 1.0;
    tone.start = 0.0;
    tone.duration = 0.5;
    auto res = reflect(dev, std::vector<QubitState>{QubitState::kGround},
                       ReadoutComb{{tone}}, 3.0, fs);
    const double e_in = energy(res.incident);
    const double e_out = energy(res.reflected);
    CHECK(e_out < e_in);
    // Absorbed energy is 2 pi k_i int |a|^2 dt. For a resonant rectangular
    // pulse of length T with field decay rate mu = pi k_t, the ring-up and
    // ring-down corrections combine to int |a|^2 dt = nbar (T - 1/mu), so
    //   frac = (1 - |Gamma(0)|^2) (1 - 1/(mu T)) = 0.047052 * 0.924212.
    const double mu = M_PI * q.kappa_total();
    const double expect = 0.0470520 * (1.0 - 1.0 / (mu * 0.5));
    const double absorbed = (e_in - e_out) / e_in;
    CHECK(absorbed == doctest::Approx(expect).epsilon(0.005));
}

TEST_CASE("feedline: reflection is linear in the drive") {
    const auto dev = one_channel(8.3, 0.1);
    const double fs = 2000.0;
    const double span = 1.5;

    ToneSpec t1;
    t1.channel = 0;
    t1.offset = -3.0;
    t1.amplitude = 1.2;
    t1.start = 0.1;
    t1.duration = 1.0;
    ToneSpec t2 = t1;
    t2.offset = 14.0;
    t2.amplitude = 0.7;
    t2.phase = 1.1;

    std::vector<QubitState> g{QubitState::kGround};
    auto both = reflect(dev, {StateTimeline{}}, {t1, t2}, span, fs);
    auto only1 = reflect(dev, {StateTimeline{}}, {t1}, span, fs);
    auto only2 = reflect(dev, {StateTimeline{}}, {t2}, span, fs);
    for (std::size_t n = 0; n < both.reflected.samples.size(); ++n) {
        const cplx scatter_both = both.reflected.samples[n] - both.incident.samples[n];
        const cplx scatter_sum = (only1.reflected.samples[n] - only1.incident.samples[n]) +
                                 (only2.reflected.samples[n] - only2.incident.samples[n]);
        CHECK(std::abs(scatter_both - scatter_sum) < 1e-10);
    }
}

TEST_CASE("feedline: drive leakage pumps the neighbouring cavity") {
    DeviceConfig dev = one_channel(8.3, 0.1);
    QubitCavityConfig q2 = dev.channels[0];
    q2.label = "C2";
    q2.cavity_freq = 5.966;
    q2.kappa_ext = 5.1;
    q2.qubit_freq = 4.122;
    q2.anharmonicity = -306.0;
    q2.coupling_g = 112.0;
    dev.channels.push_back(q2);
    const double xi = 0.3;
    dev.crosstalk_leakage = {{1.0, 0.0}, {xi, 1.0}};

    // Tone addressed to channel 0, parked right on cavity 1's g-pulled
    // resonance so the leaked drive pumps it resonantly.
    const double chi2 = dispersive_shift(q2);
    const double w1 = (q2.cavity_freq - dev.carrier_freq) * 1e3 + chi2;
    ToneSpec tone;
    tone.channel = 0;
    tone.offset = w1;
    tone.amplitude = 2.0;
    tone.start = 0.0;
    tone.duration = 3.0;

    auto res = reflect(dev, std::vector<QubitState>(2, QubitState::kGround),
                       ReadoutComb{{tone}}, 3.0, 4000.0);
    const double got = std::norm(res.final_state.amplitude[1]);
    const double expect = steady_state_photons(q2, xi * tone.amplitude, 0.0);
    CHECK(got == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("feedline: state timeline is right-continuous at flips") {
    StateTimeline tl;
    tl.initial = QubitState::kGround;
    tl.flip_times = {1.0, 2.0};
    CHECK(tl.at(0.5) == QubitState::kGround);
    CHECK(tl.at(1.0) == QubitState::kExcited);
    CHECK(tl.at(1.5) == QubitState::kExcited);
    CHECK(tl.at(2.0) == QubitState::kGround);
    CHECK(tl.at(9.0) == QubitState::kGround);
}

TEST_CASE("feedline: resolution guard rejects undersampled configs") {
    const auto dev = one_channel(8.3, 0.1);
    ToneSpec tone;
    tone.channel = 0;
    tone.offset = 0.0;
    tone.amplitude = 1.0;
    tone.duration = 1.0;
    std::vector<QubitState> g{QubitState::kGround};
    // fs below 10 linewidths.
    CHECK_THROWS_AS((void)reflect(dev, g, ReadoutComb{{tone}}, 2.0, 50.0), ConfigError);
    // fs fine for the linewidth but not for a far-detuned coupled tone.
    ToneSpec far = tone;
    far.offset = 40.0;
    CHECK_THROWS_AS((void)reflect(dev, g, ReadoutComb{{far}}, 2.0, 200.0), ConfigError);
    CHECK_NOTHROW((void)reflect(dev, g, ReadoutComb{{tone}}, 2.0, 200.0));
}
