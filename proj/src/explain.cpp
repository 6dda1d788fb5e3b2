#include "physres/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "physres/common.hpp"
#include "physres/pipeline.hpp"

namespace physres {

namespace {

std::vector<double> coalition_weights(int g) {
    // w(s) = s! (g-s-1)! / g! for |S| = s, exact in double for g <= 12
    std::vector<double> factorial(static_cast<std::size_t>(g) + 1, 1.0);
    for (int i = 1; i <= g; ++i) {
        factorial[static_cast<std::size_t>(i)] = factorial[static_cast<std::size_t>(i - 1)] * i;
    }
    std::vector<double> w(static_cast<std::size_t>(g));
    for (int s = 0; s < g; ++s) {
        w[static_cast<std::size_t>(s)] = factorial[static_cast<std::size_t>(s)] *
                                         factorial[static_cast<std::size_t>(g - s - 1)] /
                                         factorial[static_cast<std::size_t>(g)];
    }
    return w;
}

Eigen::VectorXd shapley_from_values(const std::vector<double>& value_of_mask, int g) {
    const auto weights = coalition_weights(g);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(g);
    const unsigned full = 1u << g;
    for (unsigned mask = 0; mask < full; ++mask) {
        const int size = std::popcount(mask);
        for (int i = 0; i < g; ++i) {
            if (mask & (1u << i)) continue;
            phi[i] += weights[static_cast<std::size_t>(size)] *
                      (value_of_mask[mask | (1u << i)] - value_of_mask[mask]);
        }
    }
    return phi;
}

std::vector<int> rank_descending(const Eigen::VectorXd& values) {
    std::vector<int> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return values[a] > values[b]; });
    return order;
}

}  // namespace

ShapleyReport exact_shapley(const CoalitionValueFn& v, int num_groups) {
    if (num_groups < 1) throw DataError("exact_shapley: need at least one group");
    if (num_groups > 12) {
        throw DataError("exact_shapley refuses G > 12 (got " + std::to_string(num_groups) +
                        "); exact enumeration only");
    }

    const unsigned full = 1u << num_groups;
    std::vector<double> value_of_mask(full);
    std::vector<bool> members(static_cast<std::size_t>(num_groups));
    for (unsigned mask = 0; mask < full; ++mask) {
        for (int i = 0; i < num_groups; ++i) members[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
        value_of_mask[mask] = v(members);
        if (!std::isfinite(value_of_mask[mask])) {
            throw NumericalError("exact_shapley: coalition value is non-finite");
        }
    }

    ShapleyReport report;
    report.values = shapley_from_values(value_of_mask, num_groups);
    report.baseline_value = value_of_mask[0];
    report.full_value = value_of_mask[full - 1];
    report.ranking = rank_descending(report.values);
    report.names.resize(static_cast<std::size_t>(num_groups));
    for (int i = 0; i < num_groups; ++i) report.names[static_cast<std::size_t>(i)] = "group" + std::to_string(i);
    return report;
}

ShapleyReport rank_channels(const TrainedModel& model, const FeatureMatrix& validation) {
    if (validation.rows() == 0) throw DataError("rank_channels: empty validation set");
    if (model.q.mu.size() == 0) throw DataError("rank_channels: model has no trained readout");

    const auto aggregate_value = [&](const std::vector<bool>& members) {
        return mean_log_likelihood(model, validation, members);
    };
    ShapleyReport report = exact_shapley(aggregate_value, kNumChannels);
    for (int c = 0; c < kNumChannels; ++c) {
        report.names[static_cast<std::size_t>(c)] = channel_names()[static_cast<std::size_t>(c)];
    }

    // per-class values from the class-restricted mean log-likelihood
    const int K = model.num_classes();
    report.per_class.resize(K, kNumChannels);
    for (int k = 0; k < K; ++k) {
        const FeatureMatrix class_rows =
            select_rows(validation, select_class_rows(validation, model.class_labels[static_cast<std::size_t>(k)]));
        if (class_rows.rows() == 0) {
            report.per_class.row(k).setZero();
            continue;
        }
        const auto class_value = [&](const std::vector<bool>& members) {
            return mean_log_likelihood(model, class_rows, members);
        };
        report.per_class.row(k) = exact_shapley(class_value, kNumChannels).values.transpose();
    }
    return report;
}

ReservoirConfig structure_from_ranks(const ShapleyReport& report, const ReservoirConfig& cfg) {
    if (static_cast<int>(report.values.size()) != kNumChannels) {
        throw DataError("structure_from_ranks: report must cover the 7 channels");
    }
    if (report.values.maxCoeff() <= 0.0) {
        log_error("structure_from_ranks: no positive Shapley mass; keeping existing allocation");
        return cfg;
    }

    ReservoirConfig out = cfg;
    out.channel_node_counts = allocate_nodes(cfg.num_nodes, kNumChannels, report.values.cwiseMax(0.0));
    out.node_to_feature = assign_node_features(out.channel_node_counts);
    return out;
}

}  // namespace physres
