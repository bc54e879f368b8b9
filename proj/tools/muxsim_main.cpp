// muxsim command line front end: run an experiment described by a JSON
// config, or just validate the config and report derived device numbers.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "muxsim/device.hpp"
#include "muxsim/errors.hpp"
#include "muxsim/runner.hpp"

namespace {

int do_validate(const std::string& config_path) {
    const auto cfg = muxsim::load_experiment_config(config_path);
    std::printf("config ok: %s\n", config_path.c_str());
    std::printf("experiment: %s  shots: %llu  seed: %llu  fast_path: %s\n",
                cfg.experiment.c_str(), static_cast<unsigned long long>(cfg.shots),
                static_cast<unsigned long long>(cfg.seed),
                cfg.fast_path ? "true" : "false");
    std::printf("carrier: %.6f GHz  channels: %zu\n", cfg.device.carrier_freq,
                cfg.device.num_channels());
    for (std::size_t i = 0; i < cfg.device.num_channels(); ++i) {
        const auto& q = cfg.device.channels[i];
        const double chi = muxsim::dispersive_shift(q);
        std::printf(
            "  %-4s cavity %.6f GHz  kappa_t %.2f MHz  chi/2pi %+0.4f MHz  "
            "pulled g/e %.6f/%.6f GHz  tone offset %+0.1f MHz\n",
            q.label.c_str(), q.cavity_freq, q.kappa_total(), chi,
            muxsim::pulled_resonance(q, muxsim::QubitState::kGround),
            muxsim::pulled_resonance(q, muxsim::QubitState::kExcited),
            cfg.device.tone_offset(i));
    }
    std::printf("amplifier: pump %.4f GHz  peak %.1f dB  bandwidth %.0f MHz\n",
                cfg.amplifier.pump_freq, cfg.amplifier.peak_gain_db,
                cfg.amplifier.bandwidth);
    return 0;
}

int do_run(muxsim::ExperimentConfig cfg) {
    const auto res = muxsim::run_experiment(cfg);
    std::printf("experiment '%s' finished, %zu output file(s) in %s\n",
                cfg.experiment.c_str(), res.output_files.size(), cfg.out_dir.c_str());
    for (const auto& e : res.summary.entries()) {
        if (e.first.rfind("channel.", 0) == 0 || e.first == "experiment")
            std::printf("  %s = %s\n", e.first.c_str(), e.second.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multiplexed dispersive readout simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string experiment;
    long long shots = -1;
    long long seed = -1;
    std::string out_dir;
    bool fast_path = false;

    auto* run = app.add_subcommand("run", "run an experiment");
    run->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--experiment", experiment, "override the configured experiment");
    run->add_option("--shots", shots, "override the shot count");
    run->add_option("--seed", seed, "override the RNG seed");
    run->add_option("--out", out_dir, "override the output directory");
    run->add_flag("--fast-path", fast_path, "use the calibrated fast signal model");

    auto* validate = app.add_subcommand("validate", "check a config and print device numbers");
    validate->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (validate->parsed()) return do_validate(config_path);
        auto cfg = muxsim::load_experiment_config(config_path);
        if (!experiment.empty()) cfg.experiment = experiment;
        if (shots >= 0) cfg.shots = static_cast<std::uint64_t>(shots);
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (fast_path) cfg.fast_path = true;
        if (cfg.shots < 1) throw muxsim::ConfigError("shots must be at least 1");
        return do_run(std::move(cfg));
    } catch (const muxsim::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const muxsim::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
