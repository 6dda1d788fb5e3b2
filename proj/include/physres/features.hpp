#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "physres/signals.hpp"

namespace physres {

inline constexpr int kStatsPerChannel = 5;  // mean, var, skew, kurt, rms
inline constexpr int kNumFeatures = kNumChannels * kStatsPerChannel;

const std::vector<std::string>& feature_names();  // "channel.stat", channel-major

struct FeatureVector {
    Eigen::VectorXd values;  // length kNumFeatures
    FaultLabel label = FaultLabel::Healthy;
    double load_level = 0.0;
};

// Per channel: mean, unbiased variance, skewness m3/m2^1.5, excess kurtosis
// m4/m2^2 - 3 (both 0 when m2 < 1e-12), RMS. Requires window length >= 4.
FeatureVector extract_features(const Window& window);

struct GlobalStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;              // unbiased
    std::vector<bool> zero_variance;  // flagged features standardize to 0
};

struct FeatureMatrix {
    Eigen::MatrixXd values;  // [rows x kNumFeatures]
    std::vector<FaultLabel> labels;
    std::vector<double> loads;

    long rows() const { return values.rows(); }
};

FeatureMatrix extract_features(const std::vector<Window>& windows);

// Header = feature names + "label" + "load".
void write_feature_matrix_csv(const std::string& path, const FeatureMatrix& fm);

GlobalStats fit_global_stats(const FeatureMatrix& train);
FeatureMatrix standardize(const FeatureMatrix& matrix, const GlobalStats& stats);
FeatureMatrix destandardize(const FeatureMatrix& matrix, const GlobalStats& stats);

enum class DensityKind { Histogram, Kde };

struct Density {
    DensityKind kind = DensityKind::Histogram;
    double lo = 0.0, hi = 0.0;
    std::vector<double> edges;   // histogram: strictly increasing, size bins+1
    std::vector<double> masses;  // histogram: sums to 1
    std::vector<double> samples; // kde
    double bandwidth = 0.0;      // kde

    double pdf(double x) const;
};

// Histogram bins default to Freedman-Diaconis (Sturges when IQR = 0);
// KDE uses a Gaussian kernel with Silverman bandwidth, floored at 1e-6.
Density empirical_density(const std::vector<double>& samples, DensityKind kind,
                          std::optional<int> bins = std::nullopt);

}  // namespace physres
