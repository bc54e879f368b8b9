#include <doctest.h>

#include <muxsim/analysis.hpp>
#include <muxsim/errors.hpp>
#include <muxsim/rng.hpp>

#include <cmath>
#include <complex>
#include <vector>

using namespace muxsim;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::vector<double> mixture_samples(std::size_t n, double w0, double mu0, double s0,
                                    double mu1, double s1, std::uint64_t seed) {
    RngStream rng(seed, 0, 0, RngStage::kFastNoise);
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.uniform() < w0)
            out.push_back(mu0 + s0 * rng.normal());
        else
            out.push_back(mu1 + s1 * rng.normal());
    }
    return out;
}

}  // namespace

TEST_CASE("analysis: projection sends refs to -d/2 and +d/2") {
    const cplx ref_g{1.0, 1.0}, ref_e{4.0, 5.0};  // separation 5
    CHECK(rotate_and_project_one(ref_g, ref_g, ref_e) == doctest::Approx(-2.5));
    CHECK(rotate_and_project_one(ref_e, ref_g, ref_e) == doctest::Approx(2.5));
    // Midpoint maps to zero, orthogonal displacements are discarded.
    const cplx mid = 0.5 * (ref_g + ref_e);
    CHECK(rotate_and_project_one(mid, ref_g, ref_e) == doctest::Approx(0.0));
    const cplx ortho = mid + cplx(-0.8, 0.6);  // perpendicular to (3,4)/5
    CHECK(rotate_and_project_one(ortho, ref_g, ref_e) ==
          doctest::Approx(0.0).epsilon(1e-12));

    auto v = rotate_and_project({ref_g, mid, ref_e}, ref_g, ref_e);
    REQUIRE(v.size() == 3);
    CHECK(v[0] == doctest::Approx(-2.5));
    CHECK(v[1] == doctest::Approx(0.0));
    CHECK(v[2] == doctest::Approx(2.5));

    CHECK_THROWS_AS((void)rotate_and_project_one(mid, ref_g, ref_g), NumericalError);
}

TEST_CASE("analysis: EM recovers a synthetic mixture within 2 percent") {
    const double w0 = 0.55, mu0 = -3.0, s0 = 1.0, mu1 = 2.0, s1 = 1.3;
    auto vals = mixture_samples(300000, w0, mu0, s0, mu1, s1, 77);
    auto fit = fit_double_gaussian(vals);
    CHECK(fit.converged);
    CHECK(fit.mean0 == doctest::Approx(mu0).epsilon(0.02));
    CHECK(fit.mean1 == doctest::Approx(mu1).epsilon(0.02));
    CHECK(fit.sigma0 == doctest::Approx(s0).epsilon(0.02));
    CHECK(fit.sigma1 == doctest::Approx(s1).epsilon(0.02));
    CHECK(fit.weight0 == doctest::Approx(w0).epsilon(0.02));
    CHECK(fit.weight1 == doctest::Approx(1.0 - w0).epsilon(0.02));
}

TEST_CASE("analysis: equal-sigma threshold reduces to the erfc closed form") {
    DoubleGaussianFit fit;
    fit.weight0 = fit.weight1 = 0.5;
    fit.mean0 = -2.0;
    fit.mean1 = 2.0;
    fit.sigma0 = fit.sigma1 = 0.8;
    auto rep = choose_threshold(fit);
    CHECK(std::abs(rep.threshold) < 1e-9);
    const double d = fit.mean1 - fit.mean0;
    const double f_closed = 1.0 - 0.5 * std::erfc(d / (2.0 * std::sqrt(2.0) * 0.8));
    CHECK(std::abs(rep.fidelity - f_closed) < 1e-6);
    CHECK(rep.err_low_as_high == doctest::Approx(rep.err_high_as_low).epsilon(1e-9));
    CHECK(rep.fidelity_alt ==
          doctest::Approx(1.0 - rep.err_low_as_high - rep.err_high_as_low).epsilon(1e-9));
}

TEST_CASE("analysis: unequal weights move the MAP threshold") {
    DoubleGaussianFit fit;
    fit.weight0 = 0.9;
    fit.weight1 = 0.1;
    fit.mean0 = -2.0;
    fit.mean1 = 2.0;
    fit.sigma0 = fit.sigma1 = 0.8;
    auto rep = choose_threshold(fit);
    // Equal-sigma closed form: mid + sigma^2 ln(w0/w1) / (mu1 - mu0).
    const double expect = 0.64 * std::log(9.0) / 4.0;
    CHECK(rep.threshold == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("analysis: coincident components degrade gracefully") {
    DoubleGaussianFit fit;
    fit.mean0 = fit.mean1 = 1.0;
    fit.sigma0 = fit.sigma1 = 0.5;
    auto rep = choose_threshold(fit);
    CHECK(rep.fidelity == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(rep.fidelity_alt) < 0.04);
}

TEST_CASE("analysis: fidelity report bookkeeping") {
    RngStream rng(5, 0, 0, RngStage::kFastNoise);
    std::vector<ShotOutcome> shots;
    const std::size_t n_per = 1000;
    for (std::size_t i = 0; i < 2 * n_per; ++i) {
        ShotOutcome s;
        s.shot = i;
        s.prepared = i < n_per ? QubitState::kGround : QubitState::kExcited;
        s.state_at_readout = s.prepared;
        double centre = s.prepared == QubitState::kGround ? -1.0 : 1.0;
        // Ten prepared-g shots flip upward inside the window.
        if (i < 10) {
            centre = 1.0;
            s.flipped_in_window = true;
        }
        // Forty of the prepared-e shots fail the herald.
        if (i >= n_per && i < n_per + 40) s.herald_pass = false;
        s.value = centre + 0.1 * rng.normal();
        shots.push_back(s);
    }
    auto rep = fidelity_report(shots);
    CHECK(rep.kept_g == n_per);
    CHECK(rep.kept_e == n_per - 40);
    CHECK(rep.discarded == 40);
    CHECK(rep.herald_discard_fraction == doctest::Approx(40.0 / 2000.0).epsilon(1e-12));
    CHECK(rep.err_g_as_e == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(rep.err_e_as_g == doctest::Approx(0.0));
    CHECK(rep.fidelity == doctest::Approx(1.0 - 0.005).epsilon(1e-9));
    CHECK(rep.fidelity_alt == doctest::Approx(0.99).epsilon(1e-9));
    CHECK(rep.flipped_in_window_fraction ==
          doctest::Approx(10.0 / (2.0 * n_per - 40.0)).epsilon(1e-12));
    CHECK(std::abs(rep.thr.threshold) < 0.3);
    CHECK(rep.fidelity_fit > 0.98);
}

TEST_CASE("analysis: jump detector finds clean transitions") {
    // g for 3 bins, e for 4, g for 3; bin 0.1 us.
    std::vector<double> tr = {-1, -1, -1, 1, 1, 1, 1, -1, -1, -1};
    auto rep = detect_jumps(tr, 0.0, 0.1, 0.0, 2);
    CHECK(rep.initial == QubitState::kGround);
    REQUIRE(rep.events.size() == 2);
    CHECK(rep.events[0].to == QubitState::kExcited);
    CHECK(rep.events[0].time == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rep.events[1].to == QubitState::kGround);
    CHECK(rep.events[1].time == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(!rep.first_decay_dwell.has_value());

    // t0 offsets every reported time.
    auto shifted = detect_jumps(tr, 2.0, 0.1, 0.0, 2);
    CHECK(shifted.events[0].time == doctest::Approx(2.3).epsilon(1e-12));
}

TEST_CASE("analysis: jump detector rejects blips shorter than the dwell") {
    std::vector<double> tr = {-1, -1, 1, -1, -1, -1, -1, 1, 1, -1, -1, -1};
    // Single- and double-bin excursions with min_dwell_bins = 3: no events.
    auto rep = detect_jumps(tr, 0.0, 0.1, 0.0, 3);
    CHECK(rep.initial == QubitState::kGround);
    CHECK(rep.events.empty());
    // Lowering the requirement to 2 accepts the double blip only.
    auto rep2 = detect_jumps(tr, 0.0, 0.1, 0.0, 2);
    REQUIRE(rep2.events.size() == 2);
    CHECK(rep2.events[0].time == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("analysis: first decay dwell of an excited trace") {
    std::vector<double> tr = {1, 1, 1, 1, -1, -1, -1, -1, -1, -1};
    auto rep = detect_jumps(tr, 0.0, 0.1, 0.0, 2);
    CHECK(rep.initial == QubitState::kExcited);
    REQUIRE(rep.first_decay_dwell.has_value());
    CHECK(*rep.first_decay_dwell == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("analysis: demod-trace overload matches the raw projection") {
    DemodResult trace;
    trace.trace_bin = 0.2;
    trace.trace_t0 = 1.0;
    const cplx ref_g{-1.0, 0.0}, ref_e{1.0, 0.0};
    std::vector<double> raw = {-1, -1, 1, 1, 1, -1};
    for (double v : raw) trace.trace.push_back(cplx(v, 0.4));  // offset noise axis
    auto a = detect_jumps(trace, ref_g, ref_e, 0.0, 2);
    auto b = detect_jumps(raw, 1.0, 0.2, 0.0, 2);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == doctest::Approx(b.events[i].time).epsilon(1e-12));
        CHECK(a.events[i].to == b.events[i].to);
    }
}

TEST_CASE("analysis: ramsey fit recovers a noiseless fringe") {
    const double f = 2.3, tau = 1.7, phi = 0.3, amp = 0.42;
    std::vector<double> t, p;
    for (int i = 0; i < 61; ++i) {
        const double ti = 3.0 * i / 60.0;
        t.push_back(ti);
        p.push_back(0.5 + amp * std::exp(-ti / tau) * std::cos(kTwoPi * f * ti + phi));
    }
    auto fit = fit_ramsey(t, p);
    CHECK(fit.converged);
    CHECK(fit.freq == doctest::Approx(f).epsilon(2e-3));
    CHECK(fit.decay_time == doctest::Approx(tau).epsilon(0.02));
    CHECK(fit.amplitude == doctest::Approx(amp).epsilon(0.02));
    CHECK(std::abs(fit.phase - phi) < 0.02);
    CHECK(fit.residual < 1e-4);
}

TEST_CASE("analysis: ramsey fit tolerates assignment compression") {
    // Amplitude well below 1/2 and a visible frequency: the free-amplitude
    // model keeps the frequency unbiased.
    const double f = 1.8, tau = 0.9;
    std::vector<double> t, p;
    for (int i = 0; i < 81; ++i) {
        const double ti = 2.4 * i / 80.0;
        t.push_back(ti);
        p.push_back(0.5 + 0.37 * std::exp(-ti / tau) * std::cos(kTwoPi * f * ti));
    }
    auto fit = fit_ramsey(t, p);
    CHECK(fit.freq == doctest::Approx(f).epsilon(2e-3));
    CHECK(fit.decay_time == doctest::Approx(tau).epsilon(0.03));
}

TEST_CASE("analysis: stark slope halves to a signed chi") {
    // Fringe frequency |delta + 2 chi nbar| is linear in nbar while the
    // shift stays below the detuning; the fitted slope is 2 chi with sign.
    std::vector<double> nbars = {0.0, 1.0, 2.0, 3.0};
    std::vector<double> up, down;
    for (double n : nbars) {
        up.push_back(4.0 + 2.0 * 1.41 * n);
        down.push_back(4.0 - 2.0 * 1.41 * n);
    }
    CHECK(chi_from_stark_slope(nbars, up) == doctest::Approx(1.41).epsilon(1e-12));
    CHECK(chi_from_stark_slope(nbars, down) == doctest::Approx(-1.41).epsilon(1e-12));
}

TEST_CASE("analysis: KS test accepts exponential and rejects uniform") {
    RngStream rng(9, 0, 0, RngStage::kJumps);
    std::vector<double> expo, unif;
    for (int i = 0; i < 5000; ++i) {
        expo.push_back(rng.exponential(17.0));
        unif.push_back(34.0 * rng.uniform());
    }
    auto ok = ks_test_exponential(expo, 17.0);
    CHECK(ok.p_value > 0.01);
    CHECK(ok.statistic < 0.03);
    auto bad = ks_test_exponential(unif, 17.0);
    CHECK(bad.p_value < 1e-3);
    // Wrong mean is also caught.
    auto off = ks_test_exponential(expo, 10.0);
    CHECK(off.p_value < 1e-3);
}
