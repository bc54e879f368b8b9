#include "muxsim/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "muxsim/demod.hpp"
#include "muxsim/errors.hpp"
#include "muxsim/fastpath.hpp"
#include "muxsim/feedline.hpp"
#include "muxsim/qubit.hpp"
#include "muxsim/rng.hpp"

namespace muxsim {

namespace {

namespace fs = std::filesystem;

double json_number_or(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_null()) return std::numeric_limits<double>::infinity();
    return v.get<double>();
}

// ------------------------------------------------------------------ threads

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const int workers = std::min<std::size_t>(std::max(worker_count_from_env(), 1),
                                              std::max<std::size_t>(n, 1));
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mtx;
    std::exception_ptr first_error;
    auto work = [&]() {
        constexpr std::size_t chunk = 8;
        while (true) {
            const std::size_t begin = next.fetch_add(chunk);
            if (begin >= n) return;
            const std::size_t end = std::min(begin + chunk, n);
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mtx);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ----------------------------------------------------------------- manifest

constexpr const char* kVersion = "muxsim 0.1.0";

nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

// Resolved config snapshot: everything needed to reproduce the run
// bit-identically, device inlined.
nlohmann::json config_snapshot(const ExperimentConfig& cfg) {
    nlohmann::json j;
    nlohmann::json dev;
    dev["carrier_freq"] = cfg.device.carrier_freq;
    auto& chans = dev["channels"] = nlohmann::json::array();
    for (const auto& q : cfg.device.channels) {
        nlohmann::json c;
        c["label"] = q.label;
        c["cavity_freq"] = q.cavity_freq;
        c["kappa_ext"] = q.kappa_ext;
        c["kappa_int"] = q.kappa_int;
        c["qubit_freq"] = q.qubit_freq;
        c["anharmonicity"] = q.anharmonicity;
        c["coupling_g"] = q.coupling_g;
        c["t1"] = q.t1;
        c["t2_ramsey"] = q.t2_ramsey;
        c["t2_echo"] = q.t2_echo;
        c["thermal_excited_pop"] = q.thermal_excited_pop;
        chans.push_back(c);
    }
    if (!cfg.device.crosstalk_leakage.empty())
        dev["crosstalk_leakage"] = cfg.device.crosstalk_leakage;
    j["device"] = dev;

    nlohmann::json amp;
    amp["pump_freq"] = cfg.amplifier.pump_freq;
    amp["peak_gain_db"] = cfg.amplifier.peak_gain_db;
    amp["bandwidth"] = cfg.amplifier.bandwidth;
    amp["rolloff_order"] = cfg.amplifier.rolloff_order;
    amp["efficiency"] = number_or_null(cfg.amplifier.efficiency);
    amp["saturation_flux"] = number_or_null(cfg.amplifier.saturation_flux);
    if (!cfg.amplifier.gain_table.empty()) {
        auto& tbl = amp["gain_table_inline"] = nlohmann::json::array();
        for (const auto& p : cfg.amplifier.gain_table)
            tbl.push_back({p.freq, p.gain_db});
    }
    j["amplifier"] = amp;

    j["digitizer"] = {{"sample_rate", cfg.digitizer.sample_rate},
                      {"adc_noise_flux", cfg.digitizer.adc_noise_flux}};
    j["sim_sample_rate"] = cfg.sim_sample_rate;
    nlohmann::json comb;
    if (!cfg.comb.channels.empty()) comb["channels"] = cfg.comb.channels;
    comb["target_photons"] = cfg.comb.target_photons;
    if (!cfg.comb.amplitudes.empty()) comb["amplitudes"] = cfg.comb.amplitudes;
    comb["integration"] = cfg.comb.integration;
    comb["snap_integration"] = cfg.comb.snap_integration;
    comb["ring_guard"] = cfg.comb.ring_guard;
    comb["herald"] = cfg.comb.herald;
    comb["gap"] = cfg.comb.gap;
    j["comb"] = comb;
    j["pi_pulse_infidelity"] = cfg.pi_pulse_infidelity;
    j["experiment"] = cfg.experiment;
    j["shots"] = cfg.shots;
    j["seed"] = cfg.seed;
    j["fast_path"] = cfg.fast_path;
    j["out_dir"] = cfg.out_dir;
    j["params"] = cfg.extra;
    return j;
}

// ------------------------------------------------------------------- engine

struct ShotGeometry {
    double tau = 0.0;          // main integration length, snapped
    double herald_len = 0.0;   // herald integration length, 0 = disabled
    double t_pulse = 0.0;      // preparation pulse time
    double main_start = 0.0;   // main window start
    double span = 0.0;         // total shot length
    double herald_start = 0.0; // herald window start
};

// Precomputed per-run readout machinery: tone comb, demod windows,
// noise-free references, fast-path prototypes. Shot methods are const and
// safe to call concurrently.
class Engine {
  public:
    Engine(const ExperimentConfig& cfg, bool with_herald);

    std::size_t active_count() const { return chans_.size(); }
    std::size_t channel(std::size_t i) const { return chans_[i]; }
    const QubitCavityConfig& qubit(std::size_t i) const {
        return cfg_.device.channels[chans_[i]];
    }
    const ShotGeometry& geometry() const { return geo_; }
    double amplitude(std::size_t i) const { return amps_[i]; }
    cplx ref_main(QubitState s, std::size_t i) const {
        return ref_main_[static_cast<int>(s)][i];
    }

    // Thermal init, herald segment, optional pi pulse when prepared
    // excited, then the measurement segment. Writes active_count()
    // outcomes.
    void standard_shot(std::uint64_t slot, QubitState prepared, ShotOutcome* out) const;

    // Measurement of externally prepared states (no herald, no pulse).
    void simple_shot(std::uint64_t slot, const QubitState* initial,
                     ShotOutcome* out) const;

  private:
    void measure(std::uint64_t slot, const std::vector<StateTimeline>& tls, bool noisy,
                 cplx* herald_pts, cplx* main_pts) const;
    void make_refs();

    ExperimentConfig cfg_;
    std::vector<std::size_t> chans_;
    std::vector<double> amps_;
    std::vector<double> offsets_;
    ShotGeometry geo_;
    std::vector<ToneSpec> tones_;           // rendered comb (herald + main gates)
    std::vector<DemodSpec> demod_main_, demod_herald_;
    std::vector<FastChannel> fast_protos_;
    std::vector<double> sqrt_gain_;
    // Fast-path integrated noise per quadrature, post-gain, per channel.
    std::vector<double> sigma_main_, sigma_herald_;
    cplx ref_main_[2][8], ref_herald_[2][8];
};

Engine::Engine(const ExperimentConfig& cfg, bool with_herald) : cfg_(cfg) {
    const auto& dev = cfg_.device;
    const std::size_t n = dev.num_channels();
    if (n == 0) throw ConfigError("device has no channels");
    if (n > 8) throw ConfigError("at most 8 readout channels are supported");

    if (cfg_.comb.channels.empty()) {
        chans_.resize(n);
        std::iota(chans_.begin(), chans_.end(), 0);
    } else {
        chans_ = cfg_.comb.channels;
        for (std::size_t ch : chans_)
            if (ch >= n) throw ConfigError("comb channel index out of range");
    }

    offsets_.reserve(chans_.size());
    for (std::size_t ch : chans_) offsets_.push_back(dev.tone_offset(ch));

    const double spacing = min_tone_spacing(offsets_);
    const auto& comb = cfg_.comb;
    geo_.tau = comb.snap_integration ? snap_integration_length(comb.integration, spacing)
                                     : comb.integration;
    const bool herald_on = with_herald && comb.herald > 0.0;
    geo_.herald_len = herald_on ? (comb.snap_integration
                                       ? snap_integration_length(comb.herald, spacing)
                                       : comb.herald)
                                : 0.0;
    geo_.herald_start = comb.ring_guard;
    geo_.t_pulse = herald_on ? comb.ring_guard + geo_.herald_len + comb.gap : 0.0;
    geo_.main_start = geo_.t_pulse + comb.ring_guard;
    geo_.span = geo_.main_start + geo_.tau;

    if (!comb.amplitudes.empty() && comb.amplitudes.size() != chans_.size())
        throw ConfigError("comb.amplitudes must match the active channel count");

    for (std::size_t i = 0; i < chans_.size(); ++i) {
        const auto& q = dev.channels[chans_[i]];
        // Tone at the bare cavity frequency: both pulled peaks sit |chi|
        // away, so the steady photon number is state-independent.
        const double abs_chi = std::abs(dispersive_shift(q));
        const double amp = comb.amplitudes.empty()
                               ? amplitude_for_photons(q, comb.target_photons, abs_chi)
                               : comb.amplitudes[i];
        amps_.push_back(amp);

        ToneSpec main_tone;
        main_tone.channel = chans_[i];
        main_tone.offset = offsets_[i];
        main_tone.amplitude = amp;
        main_tone.phase = 0.0;
        main_tone.start = geo_.t_pulse;
        main_tone.duration = geo_.span - geo_.t_pulse;
        std::vector<std::pair<double, double>> gates;
        if (herald_on) {
            ToneSpec herald_tone = main_tone;
            herald_tone.start = 0.0;
            herald_tone.duration = comb.ring_guard + geo_.herald_len;
            tones_.push_back(herald_tone);
            gates.push_back({0.0, herald_tone.duration});
        }
        tones_.push_back(main_tone);
        gates.push_back({main_tone.start, main_tone.start + main_tone.duration});

        DemodSpec dm;
        dm.channel = chans_[i];
        dm.offset = offsets_[i];
        dm.integration_start = geo_.main_start;
        dm.integration_length = geo_.tau;
        demod_main_.push_back(dm);
        if (herald_on) {
            DemodSpec dh = dm;
            dh.integration_start = geo_.herald_start;
            dh.integration_length = geo_.herald_len;
            demod_herald_.push_back(dh);
        }

        fast_protos_.emplace_back(q, dev.carrier_freq, main_tone, std::move(gates));
        sqrt_gain_.push_back(std::sqrt(
            gain_profile(cfg_.amplifier, dev.carrier_freq + offsets_[i] * 1e-3)));
    }

    // Integrated per-quadrature noise on a boxcar point, referred past the
    // amplifier: tau G / (4 eta) of amplifier noise plus tau adc^2 / 4 of
    // digitizer noise.
    auto integrated_sigma = [&](double tau, double g) {
        double var = 0.0;
        if (std::isfinite(cfg_.amplifier.efficiency))
            var += g * tau / (4.0 * cfg_.amplifier.efficiency);
        const double adc = cfg_.digitizer.adc_noise_flux;
        var += adc * adc * tau / 4.0;
        return std::sqrt(var);
    };
    for (std::size_t i = 0; i < chans_.size(); ++i) {
        const double g = sqrt_gain_[i] * sqrt_gain_[i];
        sigma_main_.push_back(integrated_sigma(geo_.tau, g));
        sigma_herald_.push_back(herald_on ? integrated_sigma(geo_.herald_len, g) : 0.0);
    }

    make_refs();
}

void Engine::make_refs() {
    for (QubitState s : {QubitState::kGround, QubitState::kExcited}) {
        std::vector<StateTimeline> tls(cfg_.device.num_channels());
        for (auto& tl : tls) tl.initial = s;
        cplx h[8], m[8];
        measure(0, tls, /*noisy=*/false, h, m);
        for (std::size_t i = 0; i < chans_.size(); ++i) {
            ref_main_[static_cast<int>(s)][i] = m[i];
            ref_herald_[static_cast<int>(s)][i] = h[i];
        }
    }
}

void Engine::measure(std::uint64_t slot, const std::vector<StateTimeline>& tls,
                     bool noisy, cplx* herald_pts, cplx* main_pts) const {
    const bool herald_on = geo_.herald_len > 0.0;
    if (!cfg_.fast_path) {
        auto rr = reflect(cfg_.device, tls, tones_, geo_.span, cfg_.sim_sample_rate);
        AmplifierConfig ac = cfg_.amplifier;
        if (!noisy) ac.efficiency = std::numeric_limits<double>::infinity();
        RngStream amp_rng(cfg_.seed, slot, kFeedlineChannel, RngStage::kAmplifierNoise);
        auto amped = amplify(ac, rr.reflected, cfg_.device.carrier_freq, amp_rng);
        DigitizerConfig dc = cfg_.digitizer;
        if (!noisy) dc.adc_noise_flux = 0.0;
        RngStream adc_rng(cfg_.seed, slot, kFeedlineChannel, RngStage::kAdcNoise);
        auto digi = digitize(dc, amped, adc_rng);
        for (std::size_t i = 0; i < chans_.size(); ++i) {
            main_pts[i] = demodulate(digi, demod_main_[i]).integrated_point;
            herald_pts[i] = herald_on
                                ? demodulate(digi, demod_herald_[i]).integrated_point
                                : cplx{0.0, 0.0};
        }
        return;
    }

    for (std::size_t i = 0; i < chans_.size(); ++i) {
        FastChannel fc = fast_protos_[i];
        fc.reset();
        const auto& tl = tls[chans_[i]];
        cplx hp{0.0, 0.0};
        if (herald_on)
            hp = fc.integrate(tl, geo_.herald_start, geo_.herald_start + geo_.herald_len);
        cplx mp = fc.integrate(tl, geo_.main_start, geo_.main_start + geo_.tau);
        hp *= sqrt_gain_[i];
        mp *= sqrt_gain_[i];
        if (noisy) {
            RngStream rng(cfg_.seed, slot, static_cast<std::uint32_t>(chans_[i]),
                          RngStage::kFastNoise);
            if (herald_on && sigma_herald_[i] > 0.0)
                hp += sigma_herald_[i] * cplx(rng.normal(), rng.normal());
            if (sigma_main_[i] > 0.0)
                mp += sigma_main_[i] * cplx(rng.normal(), rng.normal());
        }
        herald_pts[i] = hp;
        main_pts[i] = mp;
    }
}

void Engine::standard_shot(std::uint64_t slot, QubitState prepared,
                           ShotOutcome* out) const {
    const auto& dev = cfg_.device;
    std::vector<StateTimeline> tls(dev.num_channels());
    struct Truth {
        QubitState at_window;
        bool flipped;
    } truth[8];

    for (std::size_t i = 0; i < chans_.size(); ++i) {
        const std::size_t ch = chans_[i];
        const auto& q = dev.channels[ch];
        const auto ch32 = static_cast<std::uint32_t>(ch);
        RngStream init_rng(cfg_.seed, slot, ch32, RngStage::kInitialState);
        RngStream jump_rng(cfg_.seed, slot, ch32, RngStage::kJumps);
        RngStream pulse_rng(cfg_.seed, slot, ch32, RngStage::kControlPulse);

        const QubitState init = sample_initial_state(q, init_rng);
        StateTimeline tl;
        tl.initial = init;
        QubitState s1 = init;
        if (geo_.t_pulse > 0.0) {
            auto seg = evolve_during_measurement(q, init, geo_.t_pulse, jump_rng);
            tl.flip_times = seg.jump_times;
            s1 = seg.final_state();
        }
        QubitState s2 = s1;
        if (prepared == QubitState::kExcited) {
            if (pulse_rng.uniform() >= cfg_.pi_pulse_infidelity) s2 = flipped(s1);
            if (s2 != s1) tl.flip_times.push_back(geo_.t_pulse);
        }
        auto seg2 = evolve_during_measurement(q, s2, geo_.span - geo_.t_pulse, jump_rng);
        for (double t : seg2.jump_times) tl.flip_times.push_back(t + geo_.t_pulse);

        truth[i].at_window = tl.at(geo_.main_start);
        truth[i].flipped = false;
        for (double t : tl.flip_times)
            if (t > geo_.main_start && t <= geo_.main_start + geo_.tau)
                truth[i].flipped = true;
        tls[ch] = std::move(tl);
    }

    cplx hp[8], mp[8];
    measure(slot, tls, /*noisy=*/true, hp, mp);

    for (std::size_t i = 0; i < chans_.size(); ++i) {
        ShotOutcome& o = out[i];
        o.shot = slot;
        o.channel = chans_[i];
        o.prepared = prepared;
        o.herald_pass =
            geo_.herald_len <= 0.0 ||
            rotate_and_project_one(hp[i], ref_herald_[0][i], ref_herald_[1][i]) <= 0.0;
        o.point = mp[i];
        o.value = rotate_and_project_one(mp[i], ref_main_[0][i], ref_main_[1][i]);
        o.assigned.reset();
        o.state_at_readout = truth[i].at_window;
        o.flipped_in_window = truth[i].flipped;
    }
}

void Engine::simple_shot(std::uint64_t slot, const QubitState* initial,
                         ShotOutcome* out) const {
    const auto& dev = cfg_.device;
    std::vector<StateTimeline> tls(dev.num_channels());
    struct Truth {
        QubitState at_window;
        bool flipped;
    } truth[8];

    for (std::size_t i = 0; i < chans_.size(); ++i) {
        const std::size_t ch = chans_[i];
        const auto& q = dev.channels[ch];
        RngStream jump_rng(cfg_.seed, slot, static_cast<std::uint32_t>(ch),
                           RngStage::kJumps);
        auto seg = evolve_during_measurement(q, initial[i], geo_.span, jump_rng);
        StateTimeline tl;
        tl.initial = initial[i];
        tl.flip_times = seg.jump_times;
        truth[i].at_window = tl.at(geo_.main_start);
        truth[i].flipped = false;
        for (double t : tl.flip_times)
            if (t > geo_.main_start && t <= geo_.main_start + geo_.tau)
                truth[i].flipped = true;
        tls[ch] = std::move(tl);
    }

    cplx hp[8], mp[8];
    measure(slot, tls, /*noisy=*/true, hp, mp);

    for (std::size_t i = 0; i < chans_.size(); ++i) {
        ShotOutcome& o = out[i];
        o.shot = slot;
        o.channel = chans_[i];
        o.prepared = initial[i];
        o.herald_pass = true;
        o.point = mp[i];
        o.value = rotate_and_project_one(mp[i], ref_main_[0][i], ref_main_[1][i]);
        o.assigned = o.value > 0.0 ? QubitState::kExcited : QubitState::kGround;
        o.state_at_readout = truth[i].at_window;
        o.flipped_in_window = truth[i].flipped;
    }
}

// --------------------------------------------------------------- summaries

std::string chan_key(const QubitCavityConfig& q, const char* field) {
    return "channel." + q.label + "." + field;
}

void add_run_header(Summary& s, const ExperimentConfig& cfg) {
    s.set("experiment", cfg.experiment);
    s.set("seed", static_cast<double>(cfg.seed));
    s.set("shots", static_cast<double>(cfg.shots));
    s.set("fast_path", cfg.fast_path ? "true" : "false");
}

// Linear least squares y = a x + b.
void linear_fit(const std::vector<double>& x, const std::vector<double>& y, double* a,
                double* b) {
    const std::size_t n = x.size();
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double ym = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    if (sxx <= 0.0) throw NumericalError("linear_fit: degenerate abscissa");
    *a = sxy / sxx;
    *b = ym - (*a) * xm;
}

}  // namespace

int worker_count_from_env() {
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (const char* env = std::getenv("MUXSIM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1 || v > 1024)
            throw ConfigError("MUXSIM_THREADS must be an integer in [1, 1024]");
        workers = static_cast<int>(v);
    }
    return workers;
}

AcquisitionResult acquire_histogram_shots(const ExperimentConfig& cfg) {
    Engine eng(cfg, /*with_herald=*/true);
    const std::size_t per_state = cfg.shots;
    const std::size_t total = 2 * per_state;

    AcquisitionResult res;
    res.outcomes.assign(eng.active_count(), std::vector<ShotOutcome>(total));
    res.integration = eng.geometry().tau;
    res.window_start = eng.geometry().main_start;
    res.span = eng.geometry().span;
    for (std::size_t i = 0; i < eng.active_count(); ++i) {
        res.ref_g.push_back(eng.ref_main(QubitState::kGround, i));
        res.ref_e.push_back(eng.ref_main(QubitState::kExcited, i));
    }

    parallel_for(total, [&](std::size_t slot) {
        ShotOutcome row[8];
        const QubitState prepared =
            slot < per_state ? QubitState::kGround : QubitState::kExcited;
        eng.standard_shot(slot, prepared, row);
        for (std::size_t i = 0; i < eng.active_count(); ++i)
            res.outcomes[i][slot] = row[i];
    });
    return res;
}

namespace experiments {

RunResult histogram(const ExperimentConfig& cfg) {
    auto acq = acquire_histogram_shots(cfg);

    RunResult rr;
    add_run_header(rr.summary, cfg);
    rr.summary.set("integration_us", acq.integration);
    rr.summary.set("window_start_us", acq.window_start);
    rr.summary.set("span_us", acq.span);

    ensure_directory(cfg.out_dir);
    Engine probe(cfg, true);  // labels only; cheap relative to the shots
    const bool dump_shots = cfg.extra.value("dump_shots", false);

    for (std::size_t i = 0; i < acq.outcomes.size(); ++i) {
        auto& shots = acq.outcomes[i];
        auto rep = fidelity_report(shots);
        const auto& q = cfg.device.channels[rep.channel];
        for (auto& s : shots)
            if (s.herald_pass)
                s.assigned = s.value > rep.thr.threshold ? QubitState::kExcited
                                                         : QubitState::kGround;

        rr.summary.set(chan_key(q, "fidelity"), rep.fidelity);
        rr.summary.set(chan_key(q, "fidelity_alt"), rep.fidelity_alt);
        rr.summary.set(chan_key(q, "fidelity_fit"), rep.fidelity_fit);
        rr.summary.set(chan_key(q, "err_g_as_e"), rep.err_g_as_e);
        rr.summary.set(chan_key(q, "err_e_as_g"), rep.err_e_as_g);
        rr.summary.set(chan_key(q, "threshold"), rep.thr.threshold);
        rr.summary.set(chan_key(q, "herald_discard_fraction"),
                       rep.herald_discard_fraction);
        rr.summary.set(chan_key(q, "kept_g"), static_cast<double>(rep.kept_g));
        rr.summary.set(chan_key(q, "kept_e"), static_cast<double>(rep.kept_e));
        rr.summary.set(chan_key(q, "flipped_in_window_fraction"),
                       rep.flipped_in_window_fraction);
        rr.summary.set(chan_key(q, "fit.mean0"), rep.fit.mean0);
        rr.summary.set(chan_key(q, "fit.mean1"), rep.fit.mean1);
        rr.summary.set(chan_key(q, "fit.sigma0"), rep.fit.sigma0);
        rr.summary.set(chan_key(q, "fit.sigma1"), rep.fit.sigma1);
        rr.summary.set(chan_key(q, "fit.weight0"), rep.fit.weight0);
        rr.summary.set(chan_key(q, "fit.weight1"), rep.fit.weight1);
        rr.summary.set(chan_key(q, "snr"),
                       (rep.fit.mean1 - rep.fit.mean0) /
                           (0.5 * (rep.fit.sigma0 + rep.fit.sigma1)));

        // Histogram export: one row per bin, counts split by preparation.
        double lo = 0.0, hi = 0.0;
        bool first = true;
        for (const auto& s : shots) {
            if (!s.herald_pass) continue;
            if (first || s.value < lo) lo = first ? s.value : std::min(lo, s.value);
            if (first || s.value > hi) hi = first ? s.value : std::max(hi, s.value);
            first = false;
        }
        if (hi <= lo) hi = lo + 1.0;
        constexpr int nbins = 121;
        std::vector<std::vector<double>> rows(nbins, std::vector<double>(3, 0.0));
        const double w = (hi - lo) / nbins;
        for (int b = 0; b < nbins; ++b) rows[b][0] = lo + (b + 0.5) * w;
        for (const auto& s : shots) {
            if (!s.herald_pass) continue;
            int b = static_cast<int>((s.value - lo) / w);
            b = std::clamp(b, 0, nbins - 1);
            rows[b][s.prepared == QubitState::kGround ? 1 : 2] += 1.0;
        }
        const std::string hist_file = "hist_" + q.label + ".csv";
        write_csv(cfg.out_dir + "/" + hist_file, "value,count_g,count_e", rows);
        rr.output_files.push_back(hist_file);

        if (dump_shots) {
            std::vector<std::vector<double>> srows;
            srows.reserve(shots.size());
            for (const auto& s : shots) {
                srows.push_back({static_cast<double>(s.shot),
                                 s.prepared == QubitState::kExcited ? 1.0 : 0.0,
                                 s.herald_pass ? 1.0 : 0.0, s.point.real(),
                                 s.point.imag(), s.value,
                                 s.assigned.has_value()
                                     ? (*s.assigned == QubitState::kExcited ? 1.0 : 0.0)
                                     : -1.0});
            }
            const std::string shot_file = "shots_" + q.label + ".csv";
            write_csv(cfg.out_dir + "/" + shot_file,
                      "shot,prepared,herald_pass,re,im,value,assigned", srows);
            rr.output_files.push_back(shot_file);
        }
    }
    return rr;
}

RunResult spectroscopy(const ExperimentConfig& cfg) {
    const auto& dev = cfg.device;
    const double span_mhz = json_number_or(cfg.extra, "span_mhz", 15.0);
    const int points = static_cast<int>(json_number_or(cfg.extra, "points", 121));
    const double measure_len = json_number_or(cfg.extra, "measure_window", 0.5);
    const double settle_factor = json_number_or(cfg.extra, "settle_factor", 10.0);
    if (points < 8) throw ConfigError("spectroscopy needs at least 8 points");

    std::vector<std::size_t> chans = cfg.comb.channels;
    if (chans.empty()) {
        chans.resize(dev.num_channels());
        std::iota(chans.begin(), chans.end(), 0);
    }

    RunResult rr;
    add_run_header(rr.summary, cfg);
    rr.summary.set("span_mhz", span_mhz);
    rr.summary.set("points", static_cast<double>(points));
    ensure_directory(cfg.out_dir);

    for (std::size_t ch : chans) {
        const auto& q = dev.channels[ch];
        const double base = dev.tone_offset(ch);
        // Snap both windows onto the sample grid so the demod window fits
        // exactly inside the rendered span.
        const double fs = cfg.sim_sample_rate;
        const double settle =
            std::ceil(settle_factor / q.kappa_total() * fs) / fs;
        const double measure =
            std::max<double>(1.0, std::llround(measure_len * fs)) / fs;
        const double total = settle + measure;
        const double amp = amplitude_for_photons(q, std::min(cfg.comb.target_photons, 2.5),
                                                 std::abs(dispersive_shift(q)));

        struct Curve {
            std::vector<double> delta;
            std::vector<cplx> gamma;
        } curves[2];

        for (int s = 0; s < 2; ++s) {
            curves[s].delta.resize(points);
            curves[s].gamma.resize(points);
            std::vector<QubitState> pinned(dev.num_channels(), QubitState::kGround);
            pinned[ch] = static_cast<QubitState>(s);
            parallel_for(static_cast<std::size_t>(points), [&](std::size_t k) {
                const double delta =
                    -span_mhz + 2.0 * span_mhz * static_cast<double>(k) / (points - 1);
                ReadoutComb comb;
                ToneSpec tone;
                tone.channel = ch;
                tone.offset = base + delta;
                tone.amplitude = amp;
                tone.start = 0.0;
                tone.duration = total;
                comb.tones.push_back(tone);
                auto rres = reflect(dev, pinned, comb, total, cfg.sim_sample_rate);
                DemodSpec dm;
                dm.channel = ch;
                dm.offset = tone.offset;
                dm.integration_start = settle;
                dm.integration_length = measure;
                const cplx num = demodulate(rres.reflected, dm).integrated_point;
                const cplx den = demodulate(rres.incident, dm).integrated_point;
                curves[s].delta[k] = delta;
                curves[s].gamma[k] = num / den;
            });
        }

        // One-port fit through w = 1 / (1 - Gamma):
        // Re(w) = kappa_tot / (2 kappa_ext), Im(w) = (delta - delta_0) / kappa_ext.
        double pulled_fit[2], ke_fit[2], kt_fit[2];
        for (int s = 0; s < 2; ++s) {
            std::vector<double> im_w(points), re_w(points);
            for (int k = 0; k < points; ++k) {
                const cplx w = 1.0 / (1.0 - curves[s].gamma[k]);
                im_w[k] = w.imag();
                re_w[k] = w.real();
            }
            double slope, intercept;
            linear_fit(curves[s].delta, im_w, &slope, &intercept);
            if (slope <= 0.0)
                throw NumericalError("spectroscopy fit failed on channel " + q.label);
            ke_fit[s] = 1.0 / slope;
            const double mean_re =
                std::accumulate(re_w.begin(), re_w.end(), 0.0) / points;
            kt_fit[s] = 2.0 * ke_fit[s] * mean_re;
            const double delta0 = -intercept / slope;
            pulled_fit[s] = q.cavity_freq + delta0 * 1e-3;
        }

        for (int s = 0; s < 2; ++s) {
            std::vector<std::vector<double>> rows;
            rows.reserve(static_cast<std::size_t>(points));
            for (int k = 0; k < points; ++k) {
                const cplx g = curves[s].gamma[k];
                rows.push_back({q.cavity_freq + curves[s].delta[k] * 1e-3, g.real(),
                                g.imag(), std::abs(g), std::arg(g)});
            }
            const std::string file =
                "spectroscopy_" + q.label + (s == 0 ? "_g" : "_e") + ".csv";
            write_csv(cfg.out_dir + "/" + file, "freq_ghz,re,im,amplitude,phase_rad",
                      rows);
            rr.output_files.push_back(file);
        }

        const double chi_fit = (pulled_fit[0] - pulled_fit[1]) * 1e3 / 2.0;
        rr.summary.set(chan_key(q, "kappa_ext_fit"), ke_fit[0]);
        rr.summary.set(chan_key(q, "kappa_total_fit"), kt_fit[0]);
        rr.summary.set(chan_key(q, "kappa_total_config"), q.kappa_total());
        rr.summary.set(chan_key(q, "pulled_g_fit_ghz"), pulled_fit[0]);
        rr.summary.set(chan_key(q, "pulled_e_fit_ghz"), pulled_fit[1]);
        rr.summary.set(chan_key(q, "chi_fit_mhz"), chi_fit);
        rr.summary.set(chan_key(q, "chi_config_mhz"), dispersive_shift(q));
    }

    // The amplifier profile over (and a little beyond) its band, as a
    // companion curve to the phase responses.
    {
        std::vector<std::vector<double>> rows;
        const double lo = cfg.amplifier.band_low() - 0.05;
        const double hi = cfg.amplifier.band_high() + 0.05;
        const int n = 241;
        for (int k = 0; k < n; ++k) {
            const double f = lo + (hi - lo) * k / (n - 1);
            rows.push_back({f, 10.0 * std::log10(gain_profile(cfg.amplifier, f))});
        }
        write_csv(cfg.out_dir + "/gain_profile.csv", "freq_ghz,gain_db", rows);
        rr.output_files.push_back("gain_profile.csv");
    }
    return rr;
}

namespace {

// Shared sweep machinery for rabi / ramsey style population measurements:
// for each x value, prepare per-channel states by Bernoulli sampling of a
// model population, measure once, and average the outcomes.
struct SweepResult {
    std::vector<double> xs;
    // [active][point]
    std::vector<std::vector<double>> pop_model, pop_sampled, pop_assigned;
    std::vector<std::vector<double>> re_mean, im_mean, value_mean;
};

SweepResult population_sweep(
    const ExperimentConfig& cfg, const Engine& eng, const std::vector<double>& xs,
    std::uint64_t slot_base, std::size_t shots_per_point,
    const std::function<double(const QubitCavityConfig&, std::size_t, double)>& model) {
    const std::size_t na = eng.active_count();
    const std::size_t pts = xs.size();
    const std::size_t total = pts * shots_per_point;

    SweepResult sw;
    sw.xs = xs;
    auto init2d = [&](std::vector<std::vector<double>>& v) {
        v.assign(na, std::vector<double>(pts, 0.0));
    };
    init2d(sw.pop_model);
    init2d(sw.pop_sampled);
    init2d(sw.pop_assigned);
    init2d(sw.re_mean);
    init2d(sw.im_mean);
    init2d(sw.value_mean);

    std::vector<std::vector<ShotOutcome>> store(na,
                                                std::vector<ShotOutcome>(total));

    parallel_for(total, [&](std::size_t idx) {
        const std::size_t k = idx / shots_per_point;
        const std::uint64_t slot = slot_base + idx;
        QubitState init[8];
        for (std::size_t i = 0; i < na; ++i) {
            const auto& q = eng.qubit(i);
            RngStream prep(cfg.seed, slot, static_cast<std::uint32_t>(eng.channel(i)),
                           RngStage::kInitialState);
            const QubitState thermal = sample_initial_state(q, prep);
            double p = model(q, i, xs[k]);
            if (thermal == QubitState::kExcited) p = 1.0 - p;
            init[i] = prep.uniform() < p ? QubitState::kExcited : QubitState::kGround;
        }
        ShotOutcome row[8];
        eng.simple_shot(slot, init, row);
        for (std::size_t i = 0; i < na; ++i) store[i][idx] = row[i];
    });

    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t k = 0; k < pts; ++k) {
            double se = 0.0, sa = 0.0, sre = 0.0, sim = 0.0, sv = 0.0;
            for (std::size_t s = 0; s < shots_per_point; ++s) {
                const auto& o = store[i][k * shots_per_point + s];
                se += o.prepared == QubitState::kExcited ? 1.0 : 0.0;
                sa += (o.assigned && *o.assigned == QubitState::kExcited) ? 1.0 : 0.0;
                sre += o.point.real();
                sim += o.point.imag();
                sv += o.value;
            }
            const auto n = static_cast<double>(shots_per_point);
            const auto& q = eng.qubit(i);
            const double pm = model(q, i, xs[k]);
            sw.pop_model[i][k] =
                (1.0 - q.thermal_excited_pop) * pm + q.thermal_excited_pop * (1.0 - pm);
            sw.pop_sampled[i][k] = se / n;
            sw.pop_assigned[i][k] = sa / n;
            sw.re_mean[i][k] = sre / n;
            sw.im_mean[i][k] = sim / n;
            sw.value_mean[i][k] = sv / n;
        }
    }
    return sw;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        xs[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return xs;
}

ExperimentConfig without_herald(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.comb.herald = 0.0;
    return c;
}

}  // namespace

RunResult rabi(const ExperimentConfig& cfg) {
    const double rate = json_number_or(cfg.extra, "rabi_rate_mhz", 2.5);
    const double max_d = json_number_or(cfg.extra, "max_duration", 1.2);
    const int points = static_cast<int>(json_number_or(cfg.extra, "points", 49));
    const auto spp = static_cast<std::size_t>(
        json_number_or(cfg.extra, "shots_per_point", 400));
    if (points < 8 || spp < 10) throw ConfigError("rabi sweep too small");

    const ExperimentConfig run_cfg = without_herald(cfg);
    Engine eng(run_cfg, /*with_herald=*/false);
    const auto xs = linspace(0.0, max_d, points);

    auto sw = population_sweep(run_cfg, eng, xs, 0, spp,
                               [&](const QubitCavityConfig& q, std::size_t, double d) {
                                   return rabi_population(q, rate, d);
                               });

    RunResult rr;
    add_run_header(rr.summary, cfg);
    rr.summary.set("rabi_rate_mhz", rate);
    ensure_directory(cfg.out_dir);

    for (std::size_t i = 0; i < eng.active_count(); ++i) {
        const auto& q = eng.qubit(i);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < xs.size(); ++k)
            rows.push_back({xs[k], sw.pop_model[i][k], sw.pop_sampled[i][k],
                            sw.pop_assigned[i][k], sw.re_mean[i][k], sw.im_mean[i][k],
                            sw.value_mean[i][k]});
        const std::string file = "rabi_" + q.label + ".csv";
        write_csv(cfg.out_dir + "/" + file,
                  "duration_us,pop_model,pop_sampled,pop_assigned,re,im,value", rows);
        rr.output_files.push_back(file);

        auto fit = fit_ramsey(xs, sw.pop_assigned[i]);
        double vmin = sw.value_mean[i][0], vmax = vmin;
        for (double v : sw.value_mean[i]) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        rr.summary.set(chan_key(q, "rabi_freq_fit_mhz"), fit.freq);
        rr.summary.set(chan_key(q, "rabi_freq_config_mhz"), rate);
        rr.summary.set(chan_key(q, "signal_amplitude"), 0.5 * (vmax - vmin));
    }
    return rr;
}

RunResult ramsey(const ExperimentConfig& cfg) {
    const double detuning = json_number_or(cfg.extra, "detuning_mhz", 2.0);
    const double max_d = json_number_or(cfg.extra, "max_delay", 3.0);
    const int points = static_cast<int>(json_number_or(cfg.extra, "points", 61));
    const auto spp = static_cast<std::size_t>(
        json_number_or(cfg.extra, "shots_per_point", 400));
    const double photons = json_number_or(cfg.extra, "photons", 0.0);
    if (points < 8 || spp < 10) throw ConfigError("ramsey sweep too small");

    const ExperimentConfig run_cfg = without_herald(cfg);
    Engine eng(run_cfg, /*with_herald=*/false);
    const auto xs = linspace(0.0, max_d, points);

    auto model = [&](const QubitCavityConfig& q, std::size_t, double d) {
        double shift = 0.0, deph = 0.0;
        if (photons > 0.0) {
            // Photons injected at the bare cavity frequency during the
            // delay; round-trip through the drive calibration.
            const double delta = std::abs(dispersive_shift(q));
            const double amp = amplitude_for_photons(q, photons, delta);
            const double nbar = steady_state_photons(q, amp, delta);
            shift = stark_shift(q, nbar);
            deph = photon_dephasing_rate(q, nbar);
        }
        return ramsey_population(q, detuning, d, shift, deph);
    };
    auto sw = population_sweep(run_cfg, eng, xs, 0, spp, model);

    RunResult rr;
    add_run_header(rr.summary, cfg);
    rr.summary.set("detuning_mhz", detuning);
    rr.summary.set("photons", photons);
    ensure_directory(cfg.out_dir);

    for (std::size_t i = 0; i < eng.active_count(); ++i) {
        const auto& q = eng.qubit(i);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < xs.size(); ++k)
            rows.push_back({xs[k], sw.pop_model[i][k], sw.pop_sampled[i][k],
                            sw.pop_assigned[i][k], sw.re_mean[i][k], sw.im_mean[i][k]});
        const std::string file = "ramsey_" + q.label + ".csv";
        write_csv(cfg.out_dir + "/" + file,
                  "delay_us,pop_model,pop_sampled,pop_assigned,re,im", rows);
        rr.output_files.push_back(file);

        auto fit = fit_ramsey(xs, sw.pop_assigned[i]);
        rr.summary.set(chan_key(q, "fringe_freq_fit_mhz"), fit.freq);
        rr.summary.set(chan_key(q, "decay_time_fit_us"), fit.decay_time);
        rr.summary.set(chan_key(q, "t2_ramsey_config_us"), q.t2_ramsey);
    }
    return rr;
}

RunResult jumps(const ExperimentConfig& cfg) {
    const double window_t1 = json_number_or(cfg.extra, "window_t1_multiples", 8.0);
    const double bin = json_number_or(cfg.extra, "bin_us", 0.096);
    const double nbar = json_number_or(cfg.extra, "target_photons", 60.0);
    const int min_dwell = static_cast<int>(json_number_or(cfg.extra, "min_dwell_bins", 3));
    const auto traces = static_cast<std::size_t>(cfg.shots);
    const auto export_traces = static_cast<std::size_t>(
        json_number_or(cfg.extra, "export_traces", 3));
    if (traces < 100) throw ConfigError("jumps needs at least 100 traces");

    const auto& dev = cfg.device;
    std::vector<std::size_t> chans = cfg.comb.channels;
    if (chans.empty()) {
        chans.resize(dev.num_channels());
        std::iota(chans.begin(), chans.end(), 0);
    }

    RunResult rr;
    add_run_header(rr.summary, cfg);
    rr.summary.set("bin_us", bin);
    rr.summary.set("monitor_photons", nbar);
    ensure_directory(cfg.out_dir);

    const double guard = cfg.comb.ring_guard;
    const double eta = cfg.amplifier.efficiency;

    for (std::size_t ch : chans) {
        const auto& q = dev.channels[ch];
        const auto nbins =
            static_cast<std::size_t>(std::ceil(window_t1 * q.t1 / bin));
        const double window = static_cast<double>(nbins) * bin;
        const double span = guard + window;

        ToneSpec tone;
        tone.channel = ch;
        tone.offset = dev.tone_offset(ch);
        tone.amplitude = amplitude_for_photons(q, nbar, std::abs(dispersive_shift(q)));
        tone.start = 0.0;
        tone.duration = span;
        const FastChannel proto(q, dev.carrier_freq, tone);

        const double g = gain_profile(cfg.amplifier, dev.carrier_freq + tone.offset * 1e-3);
        const double sqrt_g = std::sqrt(g);
        double bin_var = 0.0;
        if (std::isfinite(eta)) bin_var += g / (4.0 * eta * bin);
        const double adc = cfg.digitizer.adc_noise_flux;
        bin_var += adc * adc / (4.0 * bin);
        const double bin_sigma = std::sqrt(bin_var);

        const cplx ref_g = proto.steady_output(QubitState::kGround) * sqrt_g;
        const cplx ref_e = proto.steady_output(QubitState::kExcited) * sqrt_g;

        struct TraceStat {
            bool started_excited = false;
            double dwell = -1.0;  // first detected decay, -1 = none
            int events = 0;
            int unmatched = 0;
            int truth_flips = 0;
            std::vector<double> exported;  // projected bins, first few traces
        };
        std::vector<TraceStat> stats(traces);

        parallel_for(traces, [&](std::size_t tr) {
            const auto ch32 = static_cast<std::uint32_t>(ch);
            RngStream init_rng(cfg.seed, tr, ch32, RngStage::kInitialState);
            RngStream pulse_rng(cfg.seed, tr, ch32, RngStage::kControlPulse);
            RngStream jump_rng(cfg.seed, tr, ch32, RngStage::kJumps);
            RngStream noise_rng(cfg.seed, tr, ch32, RngStage::kFastNoise);

            QubitState init = sample_initial_state(q, init_rng);
            if (pulse_rng.uniform() >= cfg.pi_pulse_infidelity) init = flipped(init);
            auto seg = evolve_during_measurement(q, init, span, jump_rng);
            StateTimeline tl;
            tl.initial = init;
            tl.flip_times = seg.jump_times;

            FastChannel fc = proto;
            fc.reset();
            auto bins = fc.integrate_bins(tl, guard, bin, nbins);
            std::vector<double> proj(nbins);
            for (std::size_t b = 0; b < nbins; ++b) {
                cplx v = bins[b] * sqrt_g;
                if (bin_sigma > 0.0)
                    v += bin_sigma * cplx(noise_rng.normal(), noise_rng.normal());
                proj[b] = rotate_and_project_one(v, ref_g, ref_e);
            }

            auto rep = detect_jumps(proj, guard, bin, 0.0, min_dwell);
            auto& st = stats[tr];
            st.started_excited = rep.initial == QubitState::kExcited;
            if (rep.first_decay_dwell) st.dwell = *rep.first_decay_dwell;
            st.events = static_cast<int>(rep.events.size());
            st.truth_flips = static_cast<int>(tl.flip_times.size());
            // Match detected flips against the truth record.
            const double tol = (min_dwell + 1) * bin;
            std::vector<bool> used(tl.flip_times.size(), false);
            for (const auto& ev : rep.events) {
                bool matched = false;
                for (std::size_t j = 0; j < tl.flip_times.size(); ++j) {
                    if (used[j]) continue;
                    if (std::abs(tl.flip_times[j] - ev.time) <= tol) {
                        used[j] = true;
                        matched = true;
                        break;
                    }
                }
                if (!matched) ++st.unmatched;
            }
            if (tr < export_traces) st.exported = proj;
        });

        std::size_t started = 0, decays = 0, events = 0, unmatched = 0;
        std::vector<double> dwells;
        for (const auto& st : stats) {
            started += st.started_excited ? 1 : 0;
            events += static_cast<std::size_t>(st.events);
            unmatched += static_cast<std::size_t>(st.unmatched);
            if (st.dwell >= 0.0) {
                ++decays;
                dwells.push_back(st.dwell);
            }
        }

        // First-decay times against Exp(T1). The detector cannot see
        // dwells shorter than its confirmation depth, so condition both
        // sides on dwell > dead time (memorylessness makes the conditional
        // law Exp(T1) again).
        const double dead = (min_dwell + 1) * bin;
        std::vector<double> cond;
        for (double d : dwells)
            if (d > dead) cond.push_back(d - dead);
        KsResult ks{0.0, 0.0};
        if (cond.size() >= 100) ks = ks_test_exponential(cond, q.t1);

        const double mean_dwell =
            dwells.empty() ? 0.0
                           : std::accumulate(dwells.begin(), dwells.end(), 0.0) /
                                 static_cast<double>(dwells.size());

        rr.summary.set(chan_key(q, "traces"), static_cast<double>(traces));
        rr.summary.set(chan_key(q, "started_excited_fraction"),
                       static_cast<double>(started) / static_cast<double>(traces));
        rr.summary.set(chan_key(q, "decays_detected"), static_cast<double>(decays));
        rr.summary.set(chan_key(q, "mean_dwell_us"), mean_dwell);
        rr.summary.set(chan_key(q, "t1_config_us"), q.t1);
        rr.summary.set(chan_key(q, "ks_statistic"), ks.statistic);
        rr.summary.set(chan_key(q, "ks_p_value"), ks.p_value);
        rr.summary.set(chan_key(q, "events_per_trace"),
                       static_cast<double>(events) / static_cast<double>(traces));
        rr.summary.set(chan_key(q, "unmatched_fraction"),
                       events > 0 ? static_cast<double>(unmatched) /
                                        static_cast<double>(events)
                                  : 0.0);

        {
            std::vector<std::vector<double>> rows;
            rows.reserve(dwells.size());
            std::vector<double> sorted_dwells = dwells;
            std::sort(sorted_dwells.begin(), sorted_dwells.end());
            for (double d : sorted_dwells) rows.push_back({d});
            const std::string file = "jumps_dwell_" + q.label + ".csv";
            write_csv(cfg.out_dir + "/" + file, "dwell_us", rows);
            rr.output_files.push_back(file);
        }
        for (std::size_t tr = 0; tr < std::min(export_traces, traces); ++tr) {
            if (stats[tr].exported.empty()) continue;
            std::vector<std::vector<double>> rows;
            for (std::size_t b = 0; b < stats[tr].exported.size(); ++b)
                rows.push_back({guard + static_cast<double>(b) * bin,
                                stats[tr].exported[b]});
            const std::string file =
                "jumps_trace_" + q.label + "_" + std::to_string(tr) + ".csv";
            write_csv(cfg.out_dir + "/" + file, "t_us,value", rows);
            rr.output_files.push_back(file);
        }
    }
    return rr;
}

RunResult crosstalk(const ExperimentConfig& cfg) {
    const auto& dev = cfg.device;
    const std::string victim_label = cfg.extra.value("victim", "C3");
    const std::string aggressor_label = cfg.extra.value("aggressor", "C4");
    const double target_spur = json_number_or(cfg.extra, "target_spur_photons", 0.106);
    const double detuning = json_number_or(cfg.extra, "detuning_mhz", 2.0);
    const double max_d = json_number_or(cfg.extra, "max_delay", 2.4);
    const int points = static_cast<int>(json_number_or(cfg.extra, "points", 64));
    const auto spp = static_cast<std::size_t>(
        json_number_or(cfg.extra, "shots_per_point", 800));

    std::size_t victim = dev.num_channels(), aggressor = dev.num_channels();
    for (std::size_t i = 0; i < dev.num_channels(); ++i) {
        if (dev.channels[i].label == victim_label) victim = i;
        if (dev.channels[i].label == aggressor_label) aggressor = i;
    }
    if (victim >= dev.num_channels() || aggressor >= dev.num_channels() ||
        victim == aggressor)
        throw ConfigError("crosstalk: bad victim/aggressor labels");

    const auto& vq = dev.channels[victim];
    const auto& aq = dev.channels[aggressor];

    // Aggressor readout drive at its nominal operating point.
    const double agg_amp = amplitude_for_photons(aq, cfg.comb.target_photons,
                                                 std::abs(dispersive_shift(aq)));

    // Leakage: either taken from the device matrix or calibrated to push
    // the requested spurious photon number into the victim cavity.
    double xi = dev.leakage(victim, aggressor);
    if (xi == 0.0 && target_spur > 0.0) {
        const double delta_leak =
            dev.tone_offset(aggressor) -
            (pulled_resonance(vq, QubitState::kGround) - dev.carrier_freq) * 1e3;
        const double per_unit = steady_state_photons(vq, agg_amp, delta_leak);
        xi = std::sqrt(target_spur / per_unit);
    }

    DeviceConfig dev2 = dev;
    if (dev2.crosstalk_leakage.empty()) {
        dev2.crosstalk_leakage.assign(dev.num_channels(),
                                      std::vector<double>(dev.num_channels(), 0.0));
        for (std::size_t i = 0; i < dev.num_channels(); ++i)
            dev2.crosstalk_leakage[i][i] = 1.0;
    }
    dev2.crosstalk_leakage[victim][aggressor] = xi;
    const CrosstalkEffect eff = crosstalk_effects(dev2, victim, aggressor, agg_amp);

    ExperimentConfig run_cfg = without_herald(cfg);
    run_cfg.comb.channels = {victim};
    Engine eng(run_cfg, /*with_herald=*/false);
    const auto xs = linspace(0.0, max_d, points);
    const auto block = static_cast<std::uint64_t>(xs.size()) * spp;

    auto sweep = [&](double shift, double deph, std::uint64_t base) {
        return population_sweep(run_cfg, eng, xs, base, spp,
                                [&](const QubitCavityConfig& q, std::size_t, double d) {
                                    return ramsey_population(q, detuning, d, shift, deph);
                                });
    };
    auto off = sweep(0.0, 0.0, 0);
    auto on = sweep(eff.stark_shift, eff.extra_dephasing, block);

    auto fit_off = fit_ramsey(xs, off.pop_assigned[0]);
    auto fit_on = fit_ramsey(xs, on.pop_assigned[0]);

    RunResult rr;
    add_run_header(rr.summary, cfg);
    rr.summary.set("victim", victim_label);
    rr.summary.set("aggressor", aggressor_label);
    rr.summary.set("leakage_xi", xi);
    rr.summary.set("spurious_photons", eff.spurious_photons);
    rr.summary.set("stark_shift_model_mhz", eff.stark_shift);
    rr.summary.set("extra_dephasing_model", eff.extra_dephasing);
    rr.summary.set("detuning_mhz", detuning);
    rr.summary.set("fringe_freq_off_mhz", fit_off.freq);
    rr.summary.set("fringe_freq_on_mhz", fit_on.freq);
    rr.summary.set("delta_f_mhz", fit_on.freq - fit_off.freq);
    rr.summary.set("decay_time_off_us", fit_off.decay_time);
    rr.summary.set("decay_time_on_us", fit_on.decay_time);
    rr.summary.set("delta_decay_time_us", fit_on.decay_time - fit_off.decay_time);

    ensure_directory(cfg.out_dir);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < xs.size(); ++k)
        rows.push_back({xs[k], off.pop_assigned[0][k], on.pop_assigned[0][k],
                        off.pop_model[0][k], on.pop_model[0][k]});
    const std::string file = "crosstalk_" + vq.label + ".csv";
    write_csv(cfg.out_dir + "/" + file,
              "delay_us,pop_off,pop_on,pop_model_off,pop_model_on", rows);
    rr.output_files.push_back(file);
    return rr;
}

RunResult chi_calibration(const ExperimentConfig& cfg) {
    const double detuning = json_number_or(cfg.extra, "detuning_mhz", 8.0);
    const double max_d = json_number_or(cfg.extra, "max_delay", 2.0);
    const int points = static_cast<int>(json_number_or(cfg.extra, "points", 100));
    const auto spp = static_cast<std::size_t>(
        json_number_or(cfg.extra, "shots_per_point", 4000));
    // Photon settings as fractions of the per-channel maximum; the maximum
    // is chosen so measurement dephasing stays comparable to 1/T2R and the
    // fringe survives long enough to fit.
    const double deph_factor = json_number_or(cfg.extra, "dephasing_factor", 1.5);
    std::vector<double> fractions = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
    if (cfg.extra.contains("fractions"))
        fractions = cfg.extra.at("fractions").get<std::vector<double>>();

    ExperimentConfig run_cfg = without_herald(cfg);
    Engine eng(run_cfg, /*with_herald=*/false);
    const auto xs = linspace(0.0, max_d, points);
    const std::size_t na = eng.active_count();

    // Per-channel photon ceiling: dephasing_factor / T2R of extra rate.
    std::vector<double> nbar_max(na);
    for (std::size_t i = 0; i < na; ++i) {
        const auto& q = eng.qubit(i);
        nbar_max[i] = deph_factor / (q.t2_ramsey * photon_dephasing_rate(q, 1.0));
    }

    RunResult rr;
    add_run_header(rr.summary, cfg);
    rr.summary.set("detuning_mhz", detuning);
    ensure_directory(cfg.out_dir);

    const auto block = static_cast<std::uint64_t>(xs.size()) * spp;
    std::vector<std::vector<double>> nbars(na), freqs(na);

    for (std::size_t m = 0; m < fractions.size(); ++m) {
        auto sw = population_sweep(
            run_cfg, eng, xs, static_cast<std::uint64_t>(m) * block, spp,
            [&](const QubitCavityConfig& q, std::size_t i, double d) {
                const double target = fractions[m] * nbar_max[i];
                double shift = 0.0, deph = 0.0;
                if (target > 0.0) {
                    const double delta = std::abs(dispersive_shift(q));
                    const double amp = amplitude_for_photons(q, target, delta);
                    const double nb = steady_state_photons(q, amp, delta);
                    shift = stark_shift(q, nb);
                    deph = photon_dephasing_rate(q, nb);
                }
                return ramsey_population(q, detuning, d, shift, deph);
            });
        for (std::size_t i = 0; i < na; ++i) {
            auto fit = fit_ramsey(xs, sw.pop_assigned[i]);
            nbars[i].push_back(fractions[m] * nbar_max[i]);
            freqs[i].push_back(fit.freq);
        }
    }

    for (std::size_t i = 0; i < na; ++i) {
        const auto& q = eng.qubit(i);
        const double chi_fit = chi_from_stark_slope(nbars[i], freqs[i]);
        const double chi_cfg = dispersive_shift(q);
        std::vector<std::vector<double>> rows;
        for (std::size_t m = 0; m < nbars[i].size(); ++m)
            rows.push_back({nbars[i][m], freqs[i][m],
                            std::abs(detuning + 2.0 * chi_cfg * nbars[i][m])});
        const std::string file = "chi_" + q.label + ".csv";
        write_csv(cfg.out_dir + "/" + file, "nbar,freq_fit_mhz,freq_model_mhz", rows);
        rr.output_files.push_back(file);

        rr.summary.set(chan_key(q, "chi_fit_mhz"), chi_fit);
        rr.summary.set(chan_key(q, "chi_config_mhz"), chi_cfg);
        rr.summary.set(chan_key(q, "chi_rel_error"),
                       std::abs(chi_fit - chi_cfg) / std::abs(chi_cfg));
        rr.summary.set(chan_key(q, "nbar_max"), nbar_max[i]);
    }
    return rr;
}

}  // namespace experiments

RunResult run_experiment(const ExperimentConfig& cfg) {
    ensure_directory(cfg.out_dir);
    const auto t0 = std::chrono::steady_clock::now();

    RunResult rr;
    if (cfg.experiment == "histogram") rr = experiments::histogram(cfg);
    else if (cfg.experiment == "spectroscopy") rr = experiments::spectroscopy(cfg);
    else if (cfg.experiment == "rabi") rr = experiments::rabi(cfg);
    else if (cfg.experiment == "ramsey") rr = experiments::ramsey(cfg);
    else if (cfg.experiment == "jumps") rr = experiments::jumps(cfg);
    else if (cfg.experiment == "crosstalk") rr = experiments::crosstalk(cfg);
    else if (cfg.experiment == "chi_calibration") rr = experiments::chi_calibration(cfg);
    else throw ConfigError("unknown experiment '" + cfg.experiment + "'");

    rr.summary.write(cfg.out_dir + "/summary.txt");
    rr.output_files.push_back("summary.txt");
    std::sort(rr.output_files.begin(), rr.output_files.end());

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["config"] = config_snapshot(cfg);
    manifest["workers"] = worker_count_from_env();
    manifest["wallclock_s"] = wall;
    auto& outs = manifest["outputs"] = nlohmann::json::array();
    for (const auto& f : rr.output_files) {
        nlohmann::json entry;
        entry["path"] = f;
        entry["bytes"] = static_cast<std::uint64_t>(
            std::filesystem::file_size(fs::path(cfg.out_dir) / f));
        outs.push_back(entry);
    }
    std::ofstream mf(cfg.out_dir + "/manifest.json", std::ios::binary);
    if (!mf) throw ConfigError("cannot write manifest");
    mf << manifest.dump(2) << "\n";
    return rr;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    const fs::path base = fs::path(path).parent_path();

    ExperimentConfig cfg;
    try {
        if (!j.contains("device")) throw ConfigError("config needs a 'device' entry");
        if (j.at("device").is_string()) {
            cfg.device = load_device((base / j.at("device").get<std::string>()).string());
        } else {
            cfg.device = device_from_json(j.at("device"));
        }

        if (j.contains("amplifier")) {
            const auto& ja = j.at("amplifier");
            cfg.amplifier.pump_freq = ja.value("pump_freq", cfg.amplifier.pump_freq);
            cfg.amplifier.peak_gain_db =
                ja.value("peak_gain_db", cfg.amplifier.peak_gain_db);
            cfg.amplifier.bandwidth = ja.value("bandwidth", cfg.amplifier.bandwidth);
            cfg.amplifier.rolloff_order =
                ja.value("rolloff_order", cfg.amplifier.rolloff_order);
            cfg.amplifier.efficiency = json_number_or(ja, "efficiency", 0.35);
            cfg.amplifier.saturation_flux = json_number_or(
                ja, "saturation_flux", std::numeric_limits<double>::infinity());
            if (ja.contains("gain_table"))
                cfg.amplifier.gain_table =
                    load_gain_table((base / ja.at("gain_table").get<std::string>()).string());
        }
        if (j.contains("digitizer")) {
            const auto& jd = j.at("digitizer");
            cfg.digitizer.sample_rate = jd.value("sample_rate", cfg.digitizer.sample_rate);
            cfg.digitizer.adc_noise_flux =
                jd.value("adc_noise_flux", cfg.digitizer.adc_noise_flux);
        }
        cfg.sim_sample_rate = j.value("sim_sample_rate", cfg.sim_sample_rate);
        if (j.contains("comb")) {
            const auto& jc = j.at("comb");
            if (jc.contains("channels")) {
                for (const auto& e : jc.at("channels")) {
                    if (e.is_string()) {
                        const std::string lbl = e.get<std::string>();
                        bool found = false;
                        for (std::size_t i = 0; i < cfg.device.num_channels(); ++i) {
                            if (cfg.device.channels[i].label == lbl) {
                                cfg.comb.channels.push_back(i);
                                found = true;
                                break;
                            }
                        }
                        if (!found)
                            throw ConfigError("comb.channels: unknown label '" + lbl + "'");
                    } else {
                        cfg.comb.channels.push_back(e.get<std::size_t>());
                    }
                }
            }
            cfg.comb.target_photons = jc.value("target_photons", cfg.comb.target_photons);
            if (jc.contains("amplitudes"))
                cfg.comb.amplitudes = jc.at("amplitudes").get<std::vector<double>>();
            cfg.comb.integration = jc.value("integration", cfg.comb.integration);
            cfg.comb.snap_integration =
                jc.value("snap_integration", cfg.comb.snap_integration);
            cfg.comb.ring_guard = jc.value("ring_guard", cfg.comb.ring_guard);
            cfg.comb.herald = jc.value("herald", cfg.comb.herald);
            cfg.comb.gap = jc.value("gap", cfg.comb.gap);
        }
        cfg.pi_pulse_infidelity =
            j.value("pi_pulse_infidelity", cfg.pi_pulse_infidelity);
        cfg.experiment = j.value("experiment", cfg.experiment);
        cfg.shots = j.value("shots", cfg.shots);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.fast_path = j.value("fast_path", cfg.fast_path);
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        if (j.contains("params")) cfg.extra = j.at("params");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }

    const auto problems = validate_device(cfg.device, &cfg.amplifier, &cfg.digitizer);
    if (!problems.empty()) {
        std::string msg = "invalid device:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    if (cfg.shots < 1) throw ConfigError("shots must be at least 1");
    if (cfg.sim_sample_rate <= 0.0) throw ConfigError("sim_sample_rate must be positive");
    if (cfg.digitizer.sample_rate > cfg.sim_sample_rate)
        throw ConfigError("digitizer rate cannot exceed the simulation rate");
    if (cfg.pi_pulse_infidelity < 0.0 || cfg.pi_pulse_infidelity > 0.5)
        throw ConfigError("pi_pulse_infidelity out of range");
    if (cfg.comb.integration <= 0.0 || cfg.comb.ring_guard < 0.0 ||
        cfg.comb.herald < 0.0 || cfg.comb.gap < 0.0)
        throw ConfigError("comb timing parameters out of range");
    if (cfg.comb.target_photons <= 0.0 && cfg.comb.amplitudes.empty())
        throw ConfigError("either target_photons or explicit amplitudes required");
    return cfg;
}

}  // namespace muxsim
