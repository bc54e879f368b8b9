#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace muxsim {

struct AmplifierConfig;   // amplifier.hpp
struct DigitizerConfig;   // amplifier.hpp

enum class QubitState : int { kGround = 0, kExcited = 1 };

inline QubitState flipped(QubitState s) {
    return s == QubitState::kGround ? QubitState::kExcited : QubitState::kGround;
}

// One qubit-cavity pair. Frequencies in GHz, linewidths / couplings /
// anharmonicity in MHz, lifetimes in us. Anharmonicity is negative for a
// transmon.
struct QubitCavityConfig {
    std::string label;
    double cavity_freq = 0.0;         // GHz
    double kappa_ext = 0.0;           // MHz
    double kappa_int = 0.0;           // MHz
    double qubit_freq = 0.0;          // GHz
    double anharmonicity = 0.0;       // MHz
    double coupling_g = 0.0;          // MHz
    double t1 = 0.0;                  // us
    double t2_ramsey = 0.0;           // us
    double t2_echo = 0.0;             // us
    double thermal_excited_pop = 0.0; // dimensionless

    double kappa_total() const { return kappa_ext + kappa_int; }
    // Qubit-cavity detuning in MHz, qubit minus cavity.
    double detuning() const { return (qubit_freq - cavity_freq) * 1e3; }
};

// Full device: the four readout channels sharing one feedline, the common
// up/down-conversion carrier, and the drive leakage matrix xi[j][k] (the
// fraction of channel k's drive amplitude that reaches cavity j). Identity
// means no crosstalk.
struct DeviceConfig {
    std::vector<QubitCavityConfig> channels;
    double carrier_freq = 0.0;  // GHz
    std::vector<std::vector<double>> crosstalk_leakage;

    std::size_t num_channels() const { return channels.size(); }
    // Baseband offset of channel ch's bare cavity from the carrier, MHz.
    double tone_offset(std::size_t ch) const {
        return (channels[ch].cavity_freq - carrier_freq) * 1e3;
    }
    double leakage(std::size_t dst, std::size_t src) const;
};

// Transmon dispersive shift chi = g^2 * alpha / (Delta * (Delta + alpha))
// in MHz. Throws ConfigError when the qubit sits in the straddling regime
// (Delta or Delta + alpha within guard of zero) where the formula blows up.
double dispersive_shift(const QubitCavityConfig& q);

// Cavity frequency pulled by the qubit state: nu +/- |chi|, with the
// ground state below the excited state for negative chi. GHz.
double pulled_resonance(const QubitCavityConfig& q, QubitState s);

// Static sanity checks on a device (and optionally on the amplifier and
// digitizer it will be read out through). Returns human-readable problem
// descriptions; empty means the configuration is usable.
std::vector<std::string> validate_device(const DeviceConfig& dev,
                                         const AmplifierConfig* amp = nullptr,
                                         const DigitizerConfig* dig = nullptr);

// Load a device description from JSON (see data/table1.json).
DeviceConfig load_device(const std::string& path);
DeviceConfig device_from_json(const nlohmann::json& j);

}  // namespace muxsim
