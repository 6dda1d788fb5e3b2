#include "physres/features.hpp"

#include <algorithm>
#include <cmath>

#include "physres/common.hpp"
#include "physres/csv.hpp"

namespace physres {

namespace {

constexpr double kDegenerateM2 = 1e-12;
constexpr double kZeroStd = 1e-12;

const std::array<std::string, kStatsPerChannel> kStatNames = {"mean", "var", "skew", "kurt", "rms"};

double quantile(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double pos = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        out.reserve(kNumFeatures);
        for (const auto& channel : channel_names()) {
            for (const auto& stat : kStatNames) out.push_back(channel + "." + stat);
        }
        return out;
    }();
    return names;
}

FeatureVector extract_features(const Window& window) {
    const long len = window.data.cols();
    if (window.data.rows() != kNumChannels) throw DataError("window must have 7 channel rows");
    if (len < 4) throw DataError("window length must be >= 4 for kurtosis, got " + std::to_string(len));
    if (!window.data.allFinite()) throw DataError("window contains non-finite samples");

    FeatureVector fv;
    fv.values.resize(kNumFeatures);
    fv.label = window.label;
    fv.load_level = window.load_level;

    const double n = static_cast<double>(len);
    for (int c = 0; c < kNumChannels; ++c) {
        const auto row = window.data.row(c);
        const double mean = row.mean();
        const Eigen::ArrayXd centered = row.array() - mean;
        const double m2 = centered.square().mean();
        const double var_unbiased = centered.square().sum() / (n - 1.0);
        double skew = 0.0, kurt = 0.0;
        if (m2 >= kDegenerateM2) {
            const double m3 = centered.cube().mean();
            const double m4 = centered.square().square().mean();
            skew = m3 / std::pow(m2, 1.5);
            kurt = m4 / (m2 * m2) - 3.0;
        }
        const double rms = std::sqrt(row.array().square().mean());

        const int base = c * kStatsPerChannel;
        fv.values[base + 0] = mean;
        fv.values[base + 1] = var_unbiased;
        fv.values[base + 2] = skew;
        fv.values[base + 3] = kurt;
        fv.values[base + 4] = rms;
    }
    return fv;
}

FeatureMatrix extract_features(const std::vector<Window>& windows) {
    FeatureMatrix fm;
    fm.values.resize(static_cast<long>(windows.size()), kNumFeatures);
    fm.labels.reserve(windows.size());
    fm.loads.reserve(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const FeatureVector fv = extract_features(windows[i]);
        fm.values.row(static_cast<long>(i)) = fv.values.transpose();
        fm.labels.push_back(fv.label);
        fm.loads.push_back(fv.load_level);
    }
    return fm;
}

void write_feature_matrix_csv(const std::string& path, const FeatureMatrix& fm) {
    std::vector<std::string> header = feature_names();
    header.push_back("label");
    header.push_back("load");
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(fm.rows()));
    for (long r = 0; r < fm.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(kNumFeatures) + 2);
        for (int j = 0; j < kNumFeatures; ++j) row[static_cast<std::size_t>(j)] = fm.values(r, j);
        row[kNumFeatures] = static_cast<double>(fm.labels[static_cast<std::size_t>(r)]);
        row[kNumFeatures + 1] = fm.loads[static_cast<std::size_t>(r)];
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

GlobalStats fit_global_stats(const FeatureMatrix& train) {
    const long n = train.rows();
    if (n < 2) throw DataError("fit_global_stats needs at least 2 rows, got " + std::to_string(n));

    GlobalStats stats;
    stats.mean = train.values.colwise().mean();
    stats.std.resize(kNumFeatures);
    stats.zero_variance.assign(kNumFeatures, false);
    for (int j = 0; j < kNumFeatures; ++j) {
        const Eigen::ArrayXd centered = train.values.col(j).array() - stats.mean[j];
        const double sd = std::sqrt(centered.square().sum() / static_cast<double>(n - 1));
        stats.std[j] = sd;
        if (sd < kZeroStd) {
            stats.zero_variance[j] = true;
            log_debug("feature '" + feature_names()[j] + "' has zero variance; standardized to 0");
        }
    }
    return stats;
}

FeatureMatrix standardize(const FeatureMatrix& matrix, const GlobalStats& stats) {
    FeatureMatrix out = matrix;
    for (int j = 0; j < kNumFeatures; ++j) {
        if (stats.zero_variance[j]) {
            out.values.col(j).setZero();
        } else {
            out.values.col(j) = (matrix.values.col(j).array() - stats.mean[j]) / stats.std[j];
        }
    }
    return out;
}

FeatureMatrix destandardize(const FeatureMatrix& matrix, const GlobalStats& stats) {
    FeatureMatrix out = matrix;
    for (int j = 0; j < kNumFeatures; ++j) {
        if (stats.zero_variance[j]) {
            out.values.col(j).setConstant(stats.mean[j]);
        } else {
            out.values.col(j) = matrix.values.col(j).array() * stats.std[j] + stats.mean[j];
        }
    }
    return out;
}

double Density::pdf(double x) const {
    if (kind == DensityKind::Histogram) {
        if (x < lo || x > hi) return 0.0;
        // right-closed last bin
        const auto it = std::upper_bound(edges.begin(), edges.end(), x);
        std::size_t bin = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
        if (bin >= masses.size()) bin = masses.size() - 1;
        const double width = edges[bin + 1] - edges[bin];
        return masses[bin] / width;
    }
    const double inv = 1.0 / (bandwidth * std::sqrt(2.0 * 3.14159265358979323846));
    double sum = 0.0;
    for (const double xi : samples) {
        const double z = (x - xi) / bandwidth;
        sum += std::exp(-0.5 * z * z);
    }
    return sum * inv / static_cast<double>(samples.size());
}

Density empirical_density(const std::vector<double>& samples, DensityKind kind,
                          std::optional<int> bins) {
    if (samples.empty()) throw DataError("empirical_density requires at least one sample");
    for (const double s : samples) {
        if (!std::isfinite(s)) throw DataError("empirical_density: non-finite sample");
    }

    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    const double min = sorted.front(), max = sorted.back();
    const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);

    Density d;
    d.kind = kind;

    if (kind == DensityKind::Histogram) {
        int bin_count;
        if (bins.has_value()) {
            if (*bins < 1) throw DataError("bin count must be >= 1");
            bin_count = *bins;
        } else if (iqr > 0.0 && max > min) {
            const double width = 2.0 * iqr / std::cbrt(n);
            bin_count = static_cast<int>(std::ceil((max - min) / width));
            bin_count = std::clamp(bin_count, 1, 10000);
        } else {
            bin_count = static_cast<int>(std::ceil(std::log2(n))) + 1;  // Sturges
            bin_count = std::max(bin_count, 1);
        }
        d.lo = min;
        d.hi = max;
        if (max == min) { d.lo = min - 0.5; d.hi = max + 0.5; }
        d.edges.resize(static_cast<std::size_t>(bin_count) + 1);
        for (int b = 0; b <= bin_count; ++b) {
            d.edges[static_cast<std::size_t>(b)] =
                d.lo + (d.hi - d.lo) * static_cast<double>(b) / static_cast<double>(bin_count);
        }
        d.masses.assign(static_cast<std::size_t>(bin_count), 0.0);
        for (const double s : sorted) {
            auto it = std::upper_bound(d.edges.begin(), d.edges.end(), s);
            std::size_t bin = it == d.edges.begin() ? 0 : static_cast<std::size_t>(it - d.edges.begin()) - 1;
            if (bin >= d.masses.size()) bin = d.masses.size() - 1;
            d.masses[bin] += 1.0 / n;
        }
        return d;
    }

    // KDE: Silverman h = 0.9 * min(std, IQR/1.349) * n^(-1/5)
    double mean = 0.0;
    for (const double s : sorted) mean += s;
    mean /= n;
    double ss = 0.0;
    for (const double s : sorted) ss += (s - mean) * (s - mean);
    const double sd = sorted.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;

    double spread = 0.0;
    if (sd > 0.0 && iqr > 0.0) spread = std::min(sd, iqr / 1.349);
    else if (sd > 0.0) spread = sd;
    else if (iqr > 0.0) spread = iqr / 1.349;

    d.bandwidth = std::max(0.9 * spread * std::pow(n, -0.2), 1e-6);
    d.samples = samples;
    d.lo = min - 6.0 * d.bandwidth;
    d.hi = max + 6.0 * d.bandwidth;
    return d;
}

}  // namespace physres
