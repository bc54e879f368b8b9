#include "muxsim/device.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "muxsim/amplifier.hpp"
#include "muxsim/errors.hpp"

namespace muxsim {

namespace {
// Below this |Delta| or |Delta + alpha| (MHz) the dispersive formula is
// meaningless.
constexpr double kStraddlingGuard = 1.0;
}

double DeviceConfig::leakage(std::size_t dst, std::size_t src) const {
    if (crosstalk_leakage.empty()) return dst == src ? 1.0 : 0.0;
    return crosstalk_leakage[dst][src];
}

double dispersive_shift(const QubitCavityConfig& q) {
    const double delta = q.detuning();
    const double shifted = delta + q.anharmonicity;
    if (std::abs(delta) < kStraddlingGuard || std::abs(shifted) < kStraddlingGuard ||
        delta * shifted < 0.0) {
        throw ConfigError("channel '" + q.label +
                          "': qubit-cavity detuning lies in the straddling regime, "
                          "dispersive approximation invalid");
    }
    const double g2 = q.coupling_g * q.coupling_g;
    return g2 * q.anharmonicity / (delta * shifted);
}

double pulled_resonance(const QubitCavityConfig& q, QubitState s) {
    const double chi = dispersive_shift(q);
    // chi < 0 for a transmon below its cavity, so the ground-state
    // resonance sits below the excited-state one.
    const double sign = (s == QubitState::kGround) ? 1.0 : -1.0;
    return q.cavity_freq + sign * chi * 1e-3;
}

std::vector<std::string> validate_device(const DeviceConfig& dev,
                                         const AmplifierConfig* amp,
                                         const DigitizerConfig* dig) {
    std::vector<std::string> problems;
    auto complain = [&problems](const std::string& msg) { problems.push_back(msg); };

    if (dev.channels.empty()) {
        complain("device has no readout channels");
        return problems;
    }
    if (dev.carrier_freq <= 0.0) complain("carrier_freq must be positive");

    std::set<std::string> labels;
    for (std::size_t i = 0; i < dev.channels.size(); ++i) {
        const auto& q = dev.channels[i];
        const std::string who = "channel '" + q.label + "'";
        if (!labels.insert(q.label).second) complain("duplicate label '" + q.label + "'");
        if (q.cavity_freq <= 0.0) complain(who + ": cavity_freq must be positive");
        if (q.kappa_ext <= 0.0) complain(who + ": kappa_ext must be positive");
        if (q.kappa_int < 0.0) complain(who + ": kappa_int must be non-negative");
        if (q.coupling_g <= 0.0) complain(who + ": coupling_g must be positive");
        if (q.t1 <= 0.0) complain(who + ": t1 must be positive");
        if (q.t2_ramsey <= 0.0) complain(who + ": t2_ramsey must be positive");
        if (q.t2_ramsey > 2.0 * q.t1 + 1e-9)
            complain(who + ": t2_ramsey exceeds the 2*T1 limit");
        if (q.thermal_excited_pop < 0.0 || q.thermal_excited_pop >= 0.5)
            complain(who + ": thermal_excited_pop must lie in [0, 0.5)");
        try {
            (void)dispersive_shift(q);
        } catch (const ConfigError& e) {
            complain(e.what());
            continue;
        }
        if (amp != nullptr) {
            for (QubitState s : {QubitState::kGround, QubitState::kExcited}) {
                const double f = pulled_resonance(q, s);
                if (f < amp->band_low() || f > amp->band_high()) {
                    std::ostringstream os;
                    os << who << ": pulled resonance " << f
                       << " GHz falls outside the amplifier band [" << amp->band_low()
                       << ", " << amp->band_high() << "] GHz";
                    complain(os.str());
                }
            }
        }
        if (dig != nullptr) {
            // Keep the tone plus several linewidths below Nyquist.
            const double need = std::abs(dev.tone_offset(i)) + 5.0 * q.kappa_total();
            if (need > 0.5 * dig->sample_rate) {
                std::ostringstream os;
                os << who << ": tone offset " << dev.tone_offset(i)
                   << " MHz too close to the digitizer Nyquist frequency "
                   << 0.5 * dig->sample_rate << " MHz";
                complain(os.str());
            }
        }
    }

    // Tone collisions: offsets must be separated by well more than the
    // larger of the two linewidths.
    for (std::size_t i = 0; i < dev.channels.size(); ++i) {
        for (std::size_t j = i + 1; j < dev.channels.size(); ++j) {
            const double spacing = std::abs(dev.tone_offset(i) - dev.tone_offset(j));
            const double lw = std::max(dev.channels[i].kappa_total(),
                                       dev.channels[j].kappa_total());
            if (spacing < 5.0 * lw) {
                std::ostringstream os;
                os << "channels '" << dev.channels[i].label << "' and '"
                   << dev.channels[j].label << "' are only " << spacing
                   << " MHz apart (need at least 5 linewidths)";
                complain(os.str());
            }
        }
    }

    if (!dev.crosstalk_leakage.empty()) {
        const std::size_t n = dev.channels.size();
        if (dev.crosstalk_leakage.size() != n) {
            complain("crosstalk_leakage must be a square matrix matching the channel count");
        } else {
            for (std::size_t r = 0; r < n; ++r) {
                if (dev.crosstalk_leakage[r].size() != n) {
                    complain("crosstalk_leakage must be a square matrix matching the channel count");
                    break;
                }
                for (std::size_t c = 0; c < n; ++c) {
                    const double v = dev.crosstalk_leakage[r][c];
                    if (v < 0.0)
                        complain("crosstalk_leakage entries must be non-negative");
                    if (r == c && std::abs(v - 1.0) > 1e-12)
                        complain("crosstalk_leakage diagonal must be 1 (own drive reaches own cavity)");
                }
            }
        }
    }

    return problems;
}

DeviceConfig load_device(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open device file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("device file '" + path + "': " + e.what());
    }
    return device_from_json(j);
}

DeviceConfig device_from_json(const nlohmann::json& j) {
    DeviceConfig dev;
    try {
        dev.carrier_freq = j.at("carrier_freq").get<double>();
        for (const auto& jc : j.at("channels")) {
            QubitCavityConfig q;
            q.label = jc.at("label").get<std::string>();
            q.cavity_freq = jc.at("cavity_freq").get<double>();
            q.kappa_ext = jc.at("kappa_ext").get<double>();
            q.kappa_int = jc.at("kappa_int").get<double>();
            q.qubit_freq = jc.at("qubit_freq").get<double>();
            q.anharmonicity = jc.at("anharmonicity").get<double>();
            q.coupling_g = jc.at("coupling_g").get<double>();
            q.t1 = jc.at("t1").get<double>();
            q.t2_ramsey = jc.at("t2_ramsey").get<double>();
            q.t2_echo = jc.value("t2_echo", 0.0);
            q.thermal_excited_pop = jc.value("thermal_excited_pop", 0.0);
            dev.channels.push_back(std::move(q));
        }
        if (j.contains("crosstalk_leakage"))
            dev.crosstalk_leakage =
                j.at("crosstalk_leakage").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("device description: ") + e.what());
    }
    return dev;
}

}  // namespace muxsim
