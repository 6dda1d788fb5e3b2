#include "physres/signals.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "physres/common.hpp"
#include "physres/csv.hpp"

namespace physres {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTeeth = 16.0;  // pinion tooth count; mesh = teeth * rotation

struct ChannelSpec {
    double mean_fixed;    // load-independent mean
    double mean_per_load; // added mean per unit load
    double ripple_mesh;   // sinusoid amplitude at mesh frequency
    double ripple_mesh2;  // at 2x mesh
    double noise_std;
};

// speed, torque, vdc, i_active, i_reactive, accel_x, accel_y
constexpr ChannelSpec kChannels[kNumChannels] = {
    {0.0, 0.0, 0.15, 0.00, 0.10},   // speed: mean = base_speed_hz, set below
    {0.0, 20.0, 0.25, 0.10, 0.35},  // torque
    {540.0, 0.0, 0.50, 0.00, 0.80}, // vdc (ripple at 6x rotation, see below)
    {0.0, 10.0, 0.20, 0.00, 0.25},  // i_active
    {3.0, 0.0, 0.10, 0.00, 0.15},   // i_reactive
    {0.0, 0.0, 0.50, 0.20, 0.25},   // accel_x
    {0.0, 0.0, 0.45, 0.18, 0.25},   // accel_y
};

constexpr double kChannelPhase[kNumChannels] = {0.0, 0.7, 1.4, 2.1, 2.8, 3.5, 4.2};

}  // namespace

FaultLabel fault_label_from_int(int code) {
    if (code < 0 || code > 5) {
        throw DataError("fault label " + std::to_string(code) + " out of range 0..5");
    }
    return static_cast<FaultLabel>(code);
}

std::string fault_name(FaultLabel label) {
    switch (label) {
        case FaultLabel::Healthy: return "healthy";
        case FaultLabel::MissingTooth: return "missing_tooth";
        case FaultLabel::ChippedTooth: return "chipped_tooth";
        case FaultLabel::RootCrack: return "root_crack";
        case FaultLabel::SurfaceCrack: return "surface_crack";
        case FaultLabel::Eccentricity: return "eccentricity";
    }
    throw DataError("invalid fault label");
}

const std::array<std::string, kNumChannels>& channel_names() {
    static const std::array<std::string, kNumChannels> names = {
        "speed", "torque", "vdc", "i_active", "i_reactive", "accel_x", "accel_y"};
    return names;
}

int channel_index(const std::string& name) {
    const auto& names = channel_names();
    for (int i = 0; i < kNumChannels; ++i) {
        if (names[i] == name) return i;
    }
    return -1;
}

RawRecording synthesize_recording(FaultLabel label, double load_level, const SynthConfig& cfg,
                                  std::uint64_t seed) {
    if (cfg.duration_s <= 0.0) throw DataError("duration_s must be positive");
    if (cfg.sample_rate_hz <= 0.0) throw DataError("sample_rate_hz must be positive");
    if (load_level < 0.0 || load_level > 1.0) throw DataError("load_level must be in [0,1]");
    if (cfg.fault_intensity < 0.0 || cfg.fault_intensity > 1.0) {
        throw DataError("fault_intensity must be in [0,1]");
    }
    if (cfg.noise_std < 0.0) throw DataError("noise_std must be nonnegative");

    const long num_samples = std::lround(cfg.duration_s * cfg.sample_rate_hz);
    if (num_samples < 1) throw DataError("duration_s * sample_rate_hz must be >= 1");

    const double dt = 1.0 / cfg.sample_rate_hz;
    const double f_rot = cfg.base_speed_hz;
    const double f_mesh = kTeeth * f_rot;
    const double intensity = cfg.fault_intensity;

    RawRecording rec;
    rec.samples.resize(kNumChannels, num_samples);
    rec.sample_rate_hz = cfg.sample_rate_hz;
    rec.label = label;
    rec.load_level = load_level;
    rec.seed = seed;

    // One noise stream per channel, independent of label, so identical
    // (cfg, seed) pairs share the same noise realization across labels.
    for (int c = 0; c < kNumChannels; ++c) {
        const ChannelSpec& spec = kChannels[c];
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
        std::normal_distribution<double> gauss(0.0, 1.0);

        double mean = spec.mean_fixed + spec.mean_per_load * load_level;
        if (c == 0) mean = cfg.base_speed_hz;

        double noise_scale = spec.noise_std * cfg.noise_std;
        // surface crack: broadband noise-floor raise on both accelerometers
        if (label == FaultLabel::SurfaceCrack && (c == 5 || c == 6)) {
            noise_scale *= 1.0 + 2.0 * intensity;
        }

        // base ripple frequency: mesh for most channels, 6x rotation for vdc
        const double f_ripple = (c == 2) ? 6.0 * f_rot : f_mesh;

        for (long i = 0; i < num_samples; ++i) {
            const double t = static_cast<double>(i) * dt;
            double ac = spec.ripple_mesh * std::sin(2.0 * kPi * f_ripple * t + kChannelPhase[c]) +
                        spec.ripple_mesh2 * std::sin(4.0 * kPi * f_ripple * t + 2.0 * kChannelPhase[c]) +
                        noise_scale * gauss(rng);

            switch (label) {
                case FaultLabel::ChippedTooth:
                    // torque fluctuation scaled so its variance inflates by
                    // exactly (1 + 3*intensity); accel amplitude modulation
                    if (c == 1) ac *= std::sqrt(1.0 + 3.0 * intensity);
                    if (c == 5 || c == 6) ac *= 1.0 + 0.4 * intensity * std::sin(2.0 * kPi * f_rot * t);
                    break;
                case FaultLabel::RootCrack:
                    // low-frequency sideband on torque and active current
                    if (c == 1) ac += 0.9 * intensity * std::sin(kPi * f_rot * t);
                    if (c == 3) ac += 0.5 * intensity * std::sin(kPi * f_rot * t + 0.9);
                    break;
                case FaultLabel::Eccentricity:
                    // 1x rotation oscillation on speed and reactive current
                    if (c == 0) ac += 1.2 * intensity * std::sin(2.0 * kPi * f_rot * t);
                    if (c == 4) ac += 0.7 * intensity * std::sin(2.0 * kPi * f_rot * t + 1.3);
                    break;
                default:
                    break;
            }

            rec.samples(c, i) = mean + ac;
        }

        // missing tooth: damped impulse burst on the accelerometers once per
        // rotation, raising kurtosis far above the Gaussian baseline
        if (label == FaultLabel::MissingTooth && (c == 5 || c == 6)) {
            const double period = 1.0 / f_rot;
            const double burst_tau = 0.002;
            const double burst_len = 5.0 * burst_tau;
            for (double t0 = 0.0; t0 < cfg.duration_s; t0 += period) {
                const long i0 = std::lround(t0 * cfg.sample_rate_hz);
                const long i1 = std::min<long>(num_samples, i0 + std::lround(burst_len * cfg.sample_rate_hz));
                for (long i = std::max<long>(0, i0); i < i1; ++i) {
                    const double dt_b = static_cast<double>(i) * dt - t0;
                    rec.samples(c, i) += 2.5 * intensity * std::exp(-dt_b / burst_tau) *
                                         std::sin(2.0 * kPi * f_mesh * dt_b);
                }
            }
        }
    }

    return rec;
}

RawRecording ingest_csv(const std::string& path, FaultLabel label, double sample_rate_hz) {
    if (sample_rate_hz <= 0.0) throw DataError("sample_rate_hz must be positive");
    const CsvTable table = read_csv(path);

    std::array<int, kNumChannels> column_of{};
    for (int c = 0; c < kNumChannels; ++c) {
        const std::string& want = channel_names()[c];
        int found = -1;
        for (std::size_t h = 0; h < table.header.size(); ++h) {
            if (table.header[h] == want) { found = static_cast<int>(h); break; }
        }
        if (found < 0) throw DataError("CSV is missing channel column '" + want + "' (" + path + ")");
        column_of[c] = found;
    }
    if (table.rows.size() < 2) {
        throw DataError("CSV must contain at least 2 sample rows, got " +
                        std::to_string(table.rows.size()) + " (" + path + ")");
    }

    RawRecording rec;
    rec.samples.resize(kNumChannels, static_cast<long>(table.rows.size()));
    rec.sample_rate_hz = sample_rate_hz;
    rec.label = label;
    rec.load_level = 0.0;
    rec.seed = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (int c = 0; c < kNumChannels; ++c) {
            rec.samples(c, static_cast<long>(r)) = table.rows[r][column_of[c]];
        }
    }
    return rec;
}

void write_recording_csv(const std::string& path, const RawRecording& rec) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    const auto& names = channel_names();
    for (int c = 0; c < kNumChannels; ++c) out << names[c] << (c + 1 < kNumChannels ? "," : "\n");
    for (long i = 0; i < rec.samples.cols(); ++i) {
        for (int c = 0; c < kNumChannels; ++c) {
            out << format_double(rec.samples(c, i)) << (c + 1 < kNumChannels ? "," : "\n");
        }
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<Window> segment(const RawRecording& rec, int window_len, int hop) {
    if (window_len <= 0 || hop <= 0) throw DataError("window_len and hop must be positive");
    const long num_samples = rec.samples.cols();
    if (window_len > num_samples) {
        throw DataError("window_len " + std::to_string(window_len) + " exceeds recording length " +
                        std::to_string(num_samples));
    }
    std::vector<Window> windows;
    for (long off = 0; off + window_len <= num_samples; off += hop) {
        Window w;
        w.data = rec.samples.middleCols(off, window_len);
        w.label = rec.label;
        w.load_level = rec.load_level;
        windows.push_back(std::move(w));
    }
    return windows;
}

}  // namespace physres
