#include "physres/priors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "physres/common.hpp"

namespace physres {

ClassConditionalMoments match_moments(const FeatureMatrix& features) {
    std::map<FaultLabel, std::vector<long>> by_class;
    for (long r = 0; r < features.rows(); ++r) by_class[features.labels[r]].push_back(r);
    if (by_class.empty()) throw DataError("match_moments: empty feature matrix");

    ClassConditionalMoments m;
    const long F = features.values.cols();
    m.mu.resize(static_cast<long>(by_class.size()), F);
    m.var.resize(static_cast<long>(by_class.size()), F);

    long k = 0;
    for (const auto& [label, rows] : by_class) {
        if (rows.size() < 2) {
            throw DataError("class " + std::to_string(static_cast<int>(label)) + " has " +
                            std::to_string(rows.size()) + " row(s); moment matching needs >= 2");
        }
        m.class_labels.push_back(label);
        m.counts.push_back(static_cast<long>(rows.size()));
        const double n = static_cast<double>(rows.size());
        for (long j = 0; j < F; ++j) {
            double mean = 0.0;
            for (const long r : rows) mean += features.values(r, j);
            mean /= n;
            double ss = 0.0;
            for (const long r : rows) {
                const double d = features.values(r, j) - mean;
                ss += d * d;
            }
            m.mu(k, j) = mean;
            m.var(k, j) = ss / (n - 1.0);
        }
        ++k;
    }
    return m;
}

WeightPrior build_prior(const ClassConditionalMoments& moments, double tau) {
    if (tau < 0.0) throw DataError("tau must be nonnegative");
    WeightPrior prior;
    prior.class_labels = moments.class_labels;
    prior.mean = moments.mu;
    prior.var = moments.var.array() + tau * tau;
    prior.tau = tau;
    return prior;
}

double kl_gaussian(double q_mean, double q_var, double p_mean, double p_var) {
    if (q_var <= 0.0 || p_var <= 0.0) throw NumericalError("kl_gaussian: variances must be positive");
    const double diff = q_mean - p_mean;
    return 0.5 * std::log(p_var / q_var) + (q_var + diff * diff) / (2.0 * p_var) - 0.5;
}

}  // namespace physres
