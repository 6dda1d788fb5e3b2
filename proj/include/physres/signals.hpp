#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace physres {

// Gearbox condition labels. 0 = healthy, 1..5 = fault classes.
enum class FaultLabel : int {
    Healthy = 0,
    MissingTooth = 1,
    ChippedTooth = 2,
    RootCrack = 3,
    SurfaceCrack = 4,
    Eccentricity = 5,
};

FaultLabel fault_label_from_int(int code);
std::string fault_name(FaultLabel label);

inline constexpr int kNumChannels = 7;

// First five are drive-intrinsic measurements, last two accelerometers.
const std::array<std::string, kNumChannels>& channel_names();
int channel_index(const std::string& name);  // -1 if unknown

struct RawRecording {
    Eigen::MatrixXd samples;  // [kNumChannels x num_samples]
    double sample_rate_hz = 0.0;
    FaultLabel label = FaultLabel::Healthy;
    double load_level = 0.0;
    std::uint64_t seed = 0;
};

struct SynthConfig {
    double duration_s = 5.0;
    double sample_rate_hz = 5000.0;
    double base_speed_hz = 30.0;
    double noise_std = 1.0;       // global multiplier on per-channel noise floors
    double fault_intensity = 1.0; // in [0,1]
};

// Deterministic synthetic recording for (label, load, cfg, seed). Healthy
// baseline is gear-mesh sinusoids plus Gaussian noise; each fault label adds
// its own signature on top (see generator source for the per-label design).
RawRecording synthesize_recording(FaultLabel label, double load_level, const SynthConfig& cfg,
                                  std::uint64_t seed);

// Columns are matched to channels by header name, not position.
RawRecording ingest_csv(const std::string& path, FaultLabel label, double sample_rate_hz);

void write_recording_csv(const std::string& path, const RawRecording& rec);

struct Window {
    Eigen::MatrixXd data;  // [kNumChannels x window_len]
    FaultLabel label = FaultLabel::Healthy;
    double load_level = 0.0;
};

// Windows at offsets 0, hop, 2*hop, ...; a trailing partial window is dropped.
std::vector<Window> segment(const RawRecording& rec, int window_len, int hop);

}  // namespace physres
