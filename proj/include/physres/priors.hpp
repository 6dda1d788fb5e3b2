#pragma once

#include <Eigen/Dense>
#include <vector>

#include "physres/features.hpp"

namespace physres {

struct ClassConditionalMoments {
    std::vector<FaultLabel> class_labels;  // sorted ascending, defines row order
    Eigen::MatrixXd mu;                    // [K x F]
    Eigen::MatrixXd var;                   // [K x F], unbiased
    std::vector<long> counts;              // n_k per class
};

// Per (class, feature) sample mean and unbiased variance. Every class needs
// at least 2 rows.
ClassConditionalMoments match_moments(const FeatureMatrix& features);

struct WeightPrior {
    std::vector<FaultLabel> class_labels;
    Eigen::MatrixXd mean;  // [K x F]
    Eigen::MatrixXd var;   // [K x F], moments.var + tau^2
    double tau = 0.0;
};

WeightPrior build_prior(const ClassConditionalMoments& moments, double tau);

// KL[N(q_mean, q_var) || N(p_mean, p_var)], closed form.
double kl_gaussian(double q_mean, double q_var, double p_mean, double p_var);

}  // namespace physres
