#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "muxsim/amplifier.hpp"
#include "muxsim/analysis.hpp"
#include "muxsim/device.hpp"
#include "muxsim/io.hpp"

namespace muxsim {

// Geometry of a standard readout shot: optional herald window, gap with
// the preparation pulse, then the measurement window. Times in us.
struct CombSettings {
    std::vector<std::size_t> channels;  // empty = every device channel
    double target_photons = 2.5;        // steady-state photons per cavity
    std::vector<double> amplitudes;     // per-channel override, sqrt(photons/us)
    double integration = 1.0;           // requested; snapped unless disabled
    bool snap_integration = true;
    double ring_guard = 0.1;            // tone start to window start
    double herald = 2.0;                // herald window length; 0 = no herald
    double gap = 0.2;                   // herald window end to pulse
};

struct ExperimentConfig {
    DeviceConfig device;
    AmplifierConfig amplifier;
    DigitizerConfig digitizer;
    double sim_sample_rate = 1000.0;  // MHz
    CombSettings comb;
    double pi_pulse_infidelity = 0.005;
    std::string experiment = "histogram";
    std::uint64_t shots = 10000;
    std::uint64_t seed = 1;
    bool fast_path = false;
    std::string out_dir = "out";
    nlohmann::json extra;  // experiment-specific knobs
};

// Parse a config file; "device" may be inline or a path relative to the
// config file, "amplifier.gain_table" likewise.
ExperimentConfig load_experiment_config(const std::string& path);

struct RunResult {
    Summary summary;
    std::vector<std::string> output_files;  // relative to out_dir, sorted
};

// Worker threads: MUXSIM_THREADS if set (>= 1), else hardware concurrency.
int worker_count_from_env();

// Run one experiment end to end and write its outputs (summary.txt, the
// experiment's CSV exports and manifest.json) under cfg.out_dir. Results
// are byte-identical for a given (config, seed) on any worker count; the
// manifest is the one file excluded from that guarantee (it records the
// wall-clock time).
RunResult run_experiment(const ExperimentConfig& cfg);

// The individual experiments, also callable directly (used heavily by the
// tests). They fill `summary` and write CSVs; run_experiment wraps them.
namespace experiments {
RunResult histogram(const ExperimentConfig& cfg);
RunResult spectroscopy(const ExperimentConfig& cfg);
RunResult rabi(const ExperimentConfig& cfg);
RunResult ramsey(const ExperimentConfig& cfg);
RunResult jumps(const ExperimentConfig& cfg);
RunResult crosstalk(const ExperimentConfig& cfg);
RunResult chi_calibration(const ExperimentConfig& cfg);
}  // namespace experiments

// Shot-level access for tests and custom studies: run the standard
// histogram-style acquisition and return every shot outcome, without
// writing files. outcomes[ch][slot] covers 2 * cfg.shots slots per
// channel: prepared |g> first, then prepared |e>.
struct AcquisitionResult {
    std::vector<std::vector<ShotOutcome>> outcomes;
    // Noise-free reference points (main window) per channel.
    std::vector<cplx> ref_g, ref_e;
    double integration = 0.0;       // snapped, us
    double window_start = 0.0;      // absolute, us
    double span = 0.0;              // us
};

AcquisitionResult acquire_histogram_shots(const ExperimentConfig& cfg);

}  // namespace muxsim
