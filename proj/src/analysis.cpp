#include "muxsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

#include "muxsim/errors.hpp"

namespace muxsim {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double gauss_tail_above(double thr, double mu, double sigma) {
    return 0.5 * std::erfc((thr - mu) / (sigma * std::numbers::sqrt2));
}
double gauss_tail_below(double thr, double mu, double sigma) {
    return 0.5 * std::erfc((mu - thr) / (sigma * std::numbers::sqrt2));
}
}  // namespace

double rotate_and_project_one(cplx point, cplx ref_g, cplx ref_e) {
    const cplx axis = ref_e - ref_g;
    const double len = std::abs(axis);
    if (len <= 0.0)
        throw NumericalError("rotate_and_project: reference states coincide");
    const cplx u = axis / len;
    const cplx mid = 0.5 * (ref_g + ref_e);
    return std::real(std::conj(u) * (point - mid));
}

std::vector<double> rotate_and_project(const std::vector<cplx>& points, cplx ref_g,
                                       cplx ref_e) {
    const cplx axis = ref_e - ref_g;
    const double len = std::abs(axis);
    if (len <= 0.0)
        throw NumericalError("rotate_and_project: reference states coincide");
    const cplx u = axis / len;
    const cplx mid = 0.5 * (ref_g + ref_e);
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(std::real(std::conj(u) * (p - mid)));
    return out;
}

DoubleGaussianFit fit_double_gaussian(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 4) throw NumericalError("fit_double_gaussian: need at least 4 samples");

    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front(), hi = sorted.back();
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    double var = 0.0;
    for (double v : sorted) var += (v - mean) * (v - mean);
    var /= n;
    const double scale = std::max(std::sqrt(var), 1e-300);
    const double sigma_floor = std::max(1e-9 * std::max(hi - lo, scale), 1e-300);

    DoubleGaussianFit f;
    f.weight0 = f.weight1 = 0.5;
    f.mean0 = sorted[n / 4];
    f.mean1 = sorted[(3 * n) / 4];
    if (f.mean1 - f.mean0 < sigma_floor) {
        f.mean0 = mean - 0.5 * scale;
        f.mean1 = mean + 0.5 * scale;
    }
    f.sigma0 = f.sigma1 = std::max(0.5 * scale, sigma_floor);

    std::vector<double> resp(n);
    double prev_ll = -std::numeric_limits<double>::infinity();
    const int max_iter = 500;
    for (int it = 1; it <= max_iter; ++it) {
        // E step, in log space for tail safety.
        double ll = 0.0;
        double s_r = 0.0, s_rx0 = 0.0, s_rx1 = 0.0, s_rxx0 = 0.0, s_rxx1 = 0.0;
        const double lw0 = std::log(std::max(f.weight0, 1e-300)) - std::log(f.sigma0);
        const double lw1 = std::log(std::max(f.weight1, 1e-300)) - std::log(f.sigma1);
        for (std::size_t i = 0; i < n; ++i) {
            const double z0 = (sorted[i] - f.mean0) / f.sigma0;
            const double z1 = (sorted[i] - f.mean1) / f.sigma1;
            const double l0 = lw0 - 0.5 * z0 * z0;
            const double l1 = lw1 - 0.5 * z1 * z1;
            const double m = std::max(l0, l1);
            const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
            const double r1 = e1 / (e0 + e1);
            resp[i] = r1;
            ll += m + std::log(e0 + e1);
            s_r += r1;
            s_rx1 += r1 * sorted[i];
            s_rx0 += (1.0 - r1) * sorted[i];
        }
        ll -= 0.5 * n * std::log(kTwoPi);

        // M step.
        const double n1 = s_r, n0 = static_cast<double>(n) - s_r;
        if (n0 < 1e-9 || n1 < 1e-9) {
            // One component evaporated; freeze and stop.
            f.log_likelihood = ll;
            f.iterations = it;
            f.converged = false;
            break;
        }
        const double mu0 = s_rx0 / n0, mu1 = s_rx1 / n1;
        for (std::size_t i = 0; i < n; ++i) {
            s_rxx0 += (1.0 - resp[i]) * (sorted[i] - mu0) * (sorted[i] - mu0);
            s_rxx1 += resp[i] * (sorted[i] - mu1) * (sorted[i] - mu1);
        }
        f.mean0 = mu0;
        f.mean1 = mu1;
        f.sigma0 = std::max(std::sqrt(s_rxx0 / n0), sigma_floor);
        f.sigma1 = std::max(std::sqrt(s_rxx1 / n1), sigma_floor);
        f.weight0 = n0 / static_cast<double>(n);
        f.weight1 = n1 / static_cast<double>(n);
        f.log_likelihood = ll;
        f.iterations = it;
        if (std::abs(ll - prev_ll) < 1e-9 * static_cast<double>(n)) {
            f.converged = true;
            break;
        }
        prev_ll = ll;
    }

    if (f.mean0 > f.mean1) {
        std::swap(f.mean0, f.mean1);
        std::swap(f.sigma0, f.sigma1);
        std::swap(f.weight0, f.weight1);
    }
    return f;
}

ThresholdReport choose_threshold(const DoubleGaussianFit& fit) {
    const double mu0 = fit.mean0, mu1 = fit.mean1;
    const double s0 = fit.sigma0, s1 = fit.sigma1;
    const double w0 = std::max(fit.weight0, 1e-300);
    const double w1 = std::max(fit.weight1, 1e-300);

    ThresholdReport rep;
    const double span = mu1 - mu0;
    if (span <= 1e-12 * std::max(s0, s1)) {
        rep.threshold = 0.5 * (mu0 + mu1);
    } else {
        // w0 N(x; mu0, s0) = w1 N(x; mu1, s1) as a quadratic in x.
        const double a = 0.5 / (s1 * s1) - 0.5 / (s0 * s0);
        const double b = mu0 / (s0 * s0) - mu1 / (s1 * s1);
        const double c = 0.5 * mu1 * mu1 / (s1 * s1) - 0.5 * mu0 * mu0 / (s0 * s0) +
                         std::log((w0 * s1) / (w1 * s0));
        bool found = false;
        if (std::abs(a) < 1e-14 / (span * span)) {
            if (std::abs(b) > 0.0) {
                const double x = -c / b;
                if (x >= mu0 && x <= mu1) {
                    rep.threshold = x;
                    found = true;
                }
            }
        } else {
            const double disc = b * b - 4.0 * a * c;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                // Pick the root between the means; with equal-ish weights
                // exactly one lives there.
                for (double x : {(-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)}) {
                    if (x >= mu0 && x <= mu1 && (!found || std::abs(x - 0.5 * (mu0 + mu1)) <
                                                               std::abs(rep.threshold -
                                                                        0.5 * (mu0 + mu1)))) {
                        rep.threshold = x;
                        found = true;
                    }
                }
            }
        }
        if (!found) {
            // Scan for the minimum weighted misassignment over the gap.
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i <= 1000; ++i) {
                const double x = mu0 + span * i / 1000.0;
                const double err = w0 * gauss_tail_above(x, mu0, s0) +
                                   w1 * gauss_tail_below(x, mu1, s1);
                if (err < best) {
                    best = err;
                    rep.threshold = x;
                }
            }
        }
    }

    rep.err_low_as_high = gauss_tail_above(rep.threshold, mu0, s0);
    rep.err_high_as_low = gauss_tail_below(rep.threshold, mu1, s1);
    rep.fidelity = 1.0 - 0.5 * (rep.err_low_as_high + rep.err_high_as_low);
    rep.fidelity_alt = 1.0 - rep.err_low_as_high - rep.err_high_as_low;
    return rep;
}

ChannelFidelityReport fidelity_report(const std::vector<ShotOutcome>& shots) {
    ChannelFidelityReport rep;
    if (shots.empty()) throw NumericalError("fidelity_report: no shots");
    rep.channel = shots.front().channel;

    std::vector<double> pooled;
    std::size_t ng = 0, ne = 0, flipped = 0;
    for (const auto& s : shots) {
        if (s.channel != rep.channel)
            throw NumericalError("fidelity_report: shots from mixed channels");
        if (!s.herald_pass) {
            ++rep.discarded;
            continue;
        }
        pooled.push_back(s.value);
        if (s.prepared == QubitState::kGround) ++ng; else ++ne;
        if (s.flipped_in_window) ++flipped;
    }
    if (ng == 0 || ne == 0)
        throw NumericalError("fidelity_report: need kept shots of both preparations");
    rep.kept_g = ng;
    rep.kept_e = ne;
    rep.herald_discard_fraction =
        static_cast<double>(rep.discarded) / static_cast<double>(shots.size());
    rep.flipped_in_window_fraction =
        static_cast<double>(flipped) / static_cast<double>(pooled.size());

    rep.fit = fit_double_gaussian(pooled);
    rep.thr = choose_threshold(rep.fit);

    std::size_t g_high = 0, e_low = 0;
    for (const auto& s : shots) {
        if (!s.herald_pass) continue;
        const bool high = s.value > rep.thr.threshold;
        if (s.prepared == QubitState::kGround && high) ++g_high;
        if (s.prepared == QubitState::kExcited && !high) ++e_low;
    }
    rep.err_g_as_e = static_cast<double>(g_high) / static_cast<double>(ng);
    rep.err_e_as_g = static_cast<double>(e_low) / static_cast<double>(ne);
    rep.fidelity = 1.0 - 0.5 * (rep.err_g_as_e + rep.err_e_as_g);
    rep.fidelity_alt = 1.0 - rep.err_g_as_e - rep.err_e_as_g;
    rep.fidelity_fit = rep.thr.fidelity;
    return rep;
}

JumpReport detect_jumps(const std::vector<double>& projected, double t0, double bin,
                        double threshold, int min_dwell_bins) {
    if (projected.empty()) throw NumericalError("detect_jumps: empty trace");
    if (min_dwell_bins < 1) throw NumericalError("detect_jumps: min_dwell_bins must be >= 1");

    auto side = [&](double v) { return v > threshold; };  // true = excited

    JumpReport rep;
    bool cur = side(projected[0]);
    rep.initial = cur ? QubitState::kExcited : QubitState::kGround;
    int pending = 0;
    std::size_t pending_start = 0;
    for (std::size_t i = 1; i < projected.size(); ++i) {
        if (side(projected[i]) != cur) {
            if (pending == 0) pending_start = i;
            if (++pending >= min_dwell_bins) {
                cur = !cur;
                JumpEvent ev;
                // The boundary in front of the first confirming bin; the
                // same convention applies to a time-reversed trace.
                ev.time = t0 + static_cast<double>(pending_start) * bin;
                ev.to = cur ? QubitState::kExcited : QubitState::kGround;
                rep.events.push_back(ev);
                pending = 0;
            }
        } else {
            pending = 0;
        }
    }
    if (rep.initial == QubitState::kExcited) {
        for (const auto& ev : rep.events) {
            if (ev.to == QubitState::kGround) {
                rep.first_decay_dwell = ev.time - t0;
                break;
            }
        }
    }
    return rep;
}

JumpReport detect_jumps(const DemodResult& trace, cplx ref_g, cplx ref_e,
                        double threshold, int min_dwell_bins) {
    std::vector<double> proj = rotate_and_project(trace.trace, ref_g, ref_e);
    return detect_jumps(proj, trace.trace_t0, trace.trace_bin, threshold,
                        min_dwell_bins);
}

namespace {

double ramsey_sse(const std::vector<double>& t, const std::vector<double>& y,
                  double f, double tau, double phi, double amp) {
    double sse = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double m =
            0.5 + amp * std::exp(-t[i] / tau) * std::cos(kTwoPi * f * t[i] + phi);
        sse += (y[i] - m) * (y[i] - m);
    }
    return sse;
}

}  // namespace

RamseyFit fit_ramsey(const std::vector<double>& delays,
                     const std::vector<double>& populations) {
    const std::size_t n = delays.size();
    if (n < 6 || populations.size() != n)
        throw NumericalError("fit_ramsey: need at least 6 (delay, population) pairs");

    const double span = delays.back() - delays.front();
    if (span <= 0.0) throw NumericalError("fit_ramsey: delays must be ascending");
    double min_dt = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < n; ++i)
        min_dt = std::min(min_dt, delays[i] - delays[i - 1]);
    if (min_dt <= 0.0) throw NumericalError("fit_ramsey: delays must be ascending");

    // Coarse periodogram of y - 1/2 for the initial frequency and phase.
    const double f_hi = 0.5 / min_dt;
    const double f_lo = 0.25 / span;
    double best_f = f_lo, best_mag = -1.0;
    cplx best_s{0.0, 0.0};
    const int grid = 600;
    for (int k = 0; k <= grid; ++k) {
        const double f = f_lo + (f_hi - f_lo) * k / grid;
        cplx s{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i)
            s += (populations[i] - 0.5) * std::polar(1.0, -kTwoPi * f * delays[i]);
        if (std::abs(s) > best_mag) {
            best_mag = std::abs(s);
            best_f = f;
            best_s = s;
        }
    }
    const double phi0 = std::arg(best_s);
    const double tau0 = std::max(0.5 * span, 2.0 * min_dt);

    // Nelder-Mead on (f, log tau, phi, log amp). The amplitude is free:
    // preparation and assignment errors compress the fringe below 1/2, and
    // pinning it would leak the envelope mismatch into the frequency on
    // short-lived fringes.
    constexpr int kDim = 4;
    struct Vertex {
        double p[kDim];
        double cost;
    };
    auto eval = [&](const double p[kDim]) {
        const double f = p[0];
        if (f <= 0.0) return std::numeric_limits<double>::max();
        return ramsey_sse(delays, populations, f, std::exp(p[1]), p[2], std::exp(p[3]));
    };
    Vertex simplex[kDim + 1];
    const double init[kDim] = {best_f, std::log(tau0), phi0, std::log(0.45)};
    const double step[kDim] = {std::max(0.05 * best_f, 0.25 / span), 0.5, 0.4, 0.3};
    for (int v = 0; v < kDim + 1; ++v) {
        for (int d = 0; d < kDim; ++d)
            simplex[v].p[d] = init[d] + ((v == d + 1) ? step[d] : 0.0);
        simplex[v].cost = eval(simplex[v].p);
    }
    auto by_cost = [](const Vertex& a, const Vertex& b) { return a.cost < b.cost; };
    bool converged = false;
    for (int it = 0; it < 800; ++it) {
        std::sort(std::begin(simplex), std::end(simplex), by_cost);
        if (simplex[kDim].cost - simplex[0].cost <
            1e-12 * (1.0 + std::abs(simplex[0].cost))) {
            converged = true;
            break;
        }
        double centroid[kDim] = {0, 0, 0, 0};
        for (int v = 0; v < kDim; ++v)
            for (int d = 0; d < kDim; ++d) centroid[d] += simplex[v].p[d] / kDim;
        auto blend = [&](double alpha, Vertex& out) {
            for (int d = 0; d < kDim; ++d)
                out.p[d] = centroid[d] + alpha * (simplex[kDim].p[d] - centroid[d]);
            out.cost = eval(out.p);
        };
        Vertex refl;
        blend(-1.0, refl);
        if (refl.cost < simplex[0].cost) {
            Vertex exp_v;
            blend(-2.0, exp_v);
            simplex[kDim] = (exp_v.cost < refl.cost) ? exp_v : refl;
        } else if (refl.cost < simplex[kDim - 1].cost) {
            simplex[kDim] = refl;
        } else {
            Vertex con;
            blend(0.5, con);
            if (con.cost < simplex[kDim].cost) {
                simplex[kDim] = con;
            } else {
                for (int v = 1; v < kDim + 1; ++v) {
                    for (int d = 0; d < kDim; ++d)
                        simplex[v].p[d] =
                            simplex[0].p[d] + 0.5 * (simplex[v].p[d] - simplex[0].p[d]);
                    simplex[v].cost = eval(simplex[v].p);
                }
            }
        }
    }
    std::sort(std::begin(simplex), std::end(simplex), by_cost);

    RamseyFit fit;
    fit.freq = simplex[0].p[0];
    fit.decay_time = std::exp(simplex[0].p[1]);
    fit.phase = std::remainder(simplex[0].p[2], kTwoPi);
    fit.amplitude = std::exp(simplex[0].p[3]);
    fit.residual = std::sqrt(simplex[0].cost / static_cast<double>(n));
    fit.converged = converged;
    return fit;
}

double chi_from_stark_slope(const std::vector<double>& nbars,
                            const std::vector<double>& freqs) {
    const std::size_t n = nbars.size();
    if (n < 2 || freqs.size() != n)
        throw NumericalError("chi_from_stark_slope: need at least two photon settings");
    const double xm = std::accumulate(nbars.begin(), nbars.end(), 0.0) / n;
    const double ym = std::accumulate(freqs.begin(), freqs.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (nbars[i] - xm) * (nbars[i] - xm);
        sxy += (nbars[i] - xm) * (freqs[i] - ym);
    }
    if (sxx <= 0.0)
        throw NumericalError("chi_from_stark_slope: photon settings are degenerate");
    return 0.5 * sxy / sxx;
}

KsResult ks_test_exponential(std::vector<double> samples, double mean) {
    if (samples.empty() || mean <= 0.0)
        throw NumericalError("ks_test_exponential: bad input");
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = 1.0 - std::exp(-samples[i] / mean);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max({d, cdf - lo, hi - cdf});
    }
    KsResult res;
    res.statistic = d;
    // Asymptotic Kolmogorov distribution with the Stephens small-sample
    // correction.
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double q = 0.0;
    for (int k = 1; k <= 100; ++k)
        q += 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    res.p_value = std::clamp(q, 0.0, 1.0);
    return res;
}

}  // namespace muxsim
