#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "physres/explain.hpp"
#include "physres/features.hpp"
#include "physres/priors.hpp"
#include "physres/readout.hpp"
#include "physres/reservoir.hpp"
#include "physres/signals.hpp"

namespace physres {

struct PipelineConfig {
    SynthConfig synth;
    std::vector<int> classes = {1, 2, 3, 4, 5};
    std::vector<double> loads = {0.25, 0.5, 0.75, 1.0};
    int window_len = 500;
    int hop = 500;
    double tau = 0.05;
    DensityKind density_kind = DensityKind::Histogram;
    int nodes_per_class = 4;
    double leak_alpha = 0.8;
    double spectral_radius = 0.9;
    double input_scaling = 1.0;
    int t_drive = 10;
    bool use_shap = true;
    double shap_validation_fraction = 0.2;
    TrainConfig train;
    double test_fraction = 0.3;
    int predict_mc_samples = 100;
    int workers = 1;
    std::uint64_t seed = 42;
};

// One recording per (class, load) with a seed derived from the master seed.
std::vector<Window> build_synthetic_dataset(const PipelineConfig& cfg);

struct TrainedModel {
    std::vector<FaultLabel> class_labels;  // sorted; index = output neuron
    GlobalStats stats;
    WeightPrior prior;
    ReservoirConfig reservoir_cfg;
    ReservoirWeights reservoir;
    NodePrior node_prior;
    VariationalPosterior q0;  // prior-initialized posterior
    VariationalPosterior q;   // trained posterior
    std::vector<double> loss_trace;
    std::optional<ShapleyReport> shap;

    int num_classes() const { return static_cast<int>(class_labels.size()); }
    int class_index(FaultLabel label) const;  // -1 if unknown
    long trainable_params() const { return 2 * q.mu.size(); }
};

// features -> priors -> (optional SHAP pre-pass + restructuring) ->
// reservoir -> BBB readout training. Takes raw (unstandardized) features.
TrainedModel train_pipeline(const FeatureMatrix& raw_train_features, const PipelineConfig& cfg);

FeatureMatrix standardize_with(const TrainedModel& model, const FeatureMatrix& raw);

// Reservoir state for one standardized feature row.
Eigen::VectorXd state_for_row(const TrainedModel& model, const Eigen::VectorXd& standardized_row);

PredictiveResult predict_row(const TrainedModel& model, const Eigen::VectorXd& standardized_row,
                             int mc_samples, std::uint64_t seed);

// Per-sample RNG streams derive from (seed, row index), so results are
// identical for any worker count.
std::vector<PredictiveResult> predict_batch(const TrainedModel& model, const FeatureMatrix& standardized,
                                            int mc_samples, std::uint64_t seed, int workers = 1);

// Mean log-likelihood of the true labels under the posterior-mean readout.
double mean_log_likelihood(const TrainedModel& model, const FeatureMatrix& standardized,
                           const std::optional<std::vector<bool>>& channel_mask = std::nullopt);

std::vector<long> select_class_rows(const FeatureMatrix& fm, FaultLabel label);
FeatureMatrix select_rows(const FeatureMatrix& fm, const std::vector<long>& rows);

struct SplitIndices {
    std::vector<long> train;
    std::vector<long> test;
};

// Per-class shuffle with a seeded RNG; disjoint and deterministic.
SplitIndices stratified_split(const std::vector<FaultLabel>& labels, double test_fraction,
                              std::uint64_t seed);

}  // namespace physres
