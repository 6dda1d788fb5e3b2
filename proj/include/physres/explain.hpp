#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "physres/features.hpp"
#include "physres/reservoir.hpp"

namespace physres {

struct TrainedModel;  // pipeline.hpp

// v(S) over subsets of {0..G-1}; mask[i] marks membership.
using CoalitionValueFn = std::function<double(const std::vector<bool>&)>;

struct ShapleyReport {
    std::vector<std::string> names;     // one per group
    Eigen::VectorXd values;             // aggregate Shapley value per group
    Eigen::MatrixXd per_class;          // [K x G]; empty for plain games
    std::vector<int> ranking;           // group indices, descending by value
    double baseline_value = 0.0;        // v(empty)
    double full_value = 0.0;            // v(all)
};

// Exact enumeration over all 2^G coalitions (G <= 12).
ShapleyReport exact_shapley(const CoalitionValueFn& v, int num_groups);

// Channel-level attribution: v(S) is the mean validation log-likelihood with
// the channels outside S mean-imputed (zeroed in standardized space), scored
// with the posterior-mean readout. `validation` must be standardized.
ShapleyReport rank_channels(const TrainedModel& model, const FeatureMatrix& validation);

// Reallocates reservoir nodes proportionally to positive Shapley values; a
// report with no positive mass keeps the round-robin allocation and warns.
ReservoirConfig structure_from_ranks(const ShapleyReport& report, const ReservoirConfig& cfg);

}  // namespace physres
