#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "physres/features.hpp"

namespace physres {

struct ReservoirConfig {
    int num_nodes = 0;
    double leak_alpha = 0.8;
    double spectral_radius = 0.9;  // target, < 1
    double input_scaling = 1.0;
    int t_drive = 10;  // constant-input settling steps per window
    std::vector<int> node_to_feature;     // primary feature column per node
    std::vector<int> channel_node_counts; // nodes allocated per channel group
    std::uint64_t seed = 0;
    int num_features = kNumFeatures;
};

// Largest-remainder allocation of `total` nodes over `slots`. Without weights
// the split is round-robin; with weights every slot keeps a floor node and
// the remainder goes proportional to the (nonnegative) weights.
std::vector<int> allocate_nodes(int total, int slots,
                                const std::optional<Eigen::VectorXd>& weights = std::nullopt);

// Primary feature columns for per-channel node counts; nodes cycle over the
// channel statistics, variance and kurtosis first.
std::vector<int> assign_node_features(const std::vector<int>& channel_node_counts);

// N = K * nodes_per_class; nodes are allocated over the 7 measurement
// channels (optionally weighted by Shapley values) and each channel's nodes
// cycle over its statistics to pick a primary feature column.
ReservoirConfig size_reservoir(int num_classes, const std::optional<Eigen::VectorXd>& channel_weights,
                               int nodes_per_class, std::uint64_t seed);

struct ReservoirWeights {
    Eigen::MatrixXd w_in;  // [N x F], one dominant entry per row + small cross-terms
    Eigen::MatrixXd w;     // [N x N], sparse skew-symmetric, spectral radius = target
    double achieved_rho = 0.0;
};

// Three-term power iteration; handles real and conjugate-pair dominant
// eigenvalues. Returns nullopt if the estimate does not stabilize.
std::optional<double> estimate_spectral_radius(const Eigen::MatrixXd& w, int max_iters = 200,
                                               double tol = 1e-8);

// Deterministic by cfg.seed; on a degenerate sparse draw the matrix is
// redrawn once before giving up.
ReservoirWeights init_reservoir(const ReservoirConfig& cfg);

// Leaky tanh recurrence s_t = (1-a) s_{t-1} + a tanh(W_in x_t + W s_{t-1});
// returns the final state.
Eigen::VectorXd run_reservoir(const ReservoirWeights& weights, const ReservoirConfig& cfg,
                              const std::vector<Eigen::VectorXd>& inputs,
                              const Eigen::VectorXd& initial_state);

// One state row per feature row; each row is driven as a constant sequence
// of length cfg.t_drive from a zero initial state.
Eigen::MatrixXd collect_states(const ReservoirWeights& weights, const ReservoirConfig& cfg,
                               const Eigen::MatrixXd& feature_rows);

}  // namespace physres
