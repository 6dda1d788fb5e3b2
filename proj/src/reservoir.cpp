#include "physres/reservoir.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "physres/common.hpp"

namespace physres {

namespace {

// Stat priority when a channel holds fewer nodes than statistics: variance
// and kurtosis carry the fault signatures, so they are wired first.
constexpr int kStatPriority[kStatsPerChannel] = {1, 3, 0, 4, 2};  // var, kurt, mean, rms, skew

Eigen::MatrixXd draw_sparse_skew(int n, std::mt19937_64& rng) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> value(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (unit(rng) < 0.10) {
                const double v = value(rng);
                w(i, j) = v;
                w(j, i) = -v;
            }
        }
    }
    return w;
}

}  // namespace

std::vector<int> allocate_nodes(int total, int slots, const std::optional<Eigen::VectorXd>& weights) {
    std::vector<int> counts(static_cast<std::size_t>(slots), 0);

    if (!weights.has_value()) {
        for (int n = 0; n < total; ++n) counts[static_cast<std::size_t>(n % slots)] += 1;
        return counts;
    }

    if (total < slots) throw DataError("cannot allocate " + std::to_string(total) + " nodes over " +
                                       std::to_string(slots) + " slots with one-per-slot floors");
    if (weights->size() != slots) throw DataError("weight vector size mismatch in allocate_nodes");
    Eigen::VectorXd w = weights->cwiseMax(0.0);
    const double mass = w.sum();
    if (mass <= 0.0) {
        for (int n = 0; n < total; ++n) counts[static_cast<std::size_t>(n % slots)] += 1;
        return counts;
    }
    w /= mass;

    // one floor node per slot, remainder proportional with largest-remainder rounding
    const int extra = total - slots;
    std::vector<double> target(static_cast<std::size_t>(slots));
    int assigned = 0;
    for (int s = 0; s < slots; ++s) {
        target[static_cast<std::size_t>(s)] = w[s] * extra;
        counts[static_cast<std::size_t>(s)] = 1 + static_cast<int>(std::floor(target[static_cast<std::size_t>(s)]));
        assigned += counts[static_cast<std::size_t>(s)];
    }
    std::vector<int> order(static_cast<std::size_t>(slots));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double fa = target[static_cast<std::size_t>(a)] - std::floor(target[static_cast<std::size_t>(a)]);
        const double fb = target[static_cast<std::size_t>(b)] - std::floor(target[static_cast<std::size_t>(b)]);
        return fa > fb;
    });
    for (int i = 0; assigned < total; ++i) {
        counts[static_cast<std::size_t>(order[static_cast<std::size_t>(i % slots)])] += 1;
        ++assigned;
    }
    return counts;
}

std::vector<int> assign_node_features(const std::vector<int>& channel_node_counts) {
    if (static_cast<int>(channel_node_counts.size()) != kNumChannels) {
        throw DataError("channel node counts must cover the 7 channels");
    }
    std::vector<int> node_to_feature;
    for (int c = 0; c < kNumChannels; ++c) {
        for (int t = 0; t < channel_node_counts[static_cast<std::size_t>(c)]; ++t) {
            node_to_feature.push_back(c * kStatsPerChannel + kStatPriority[t % kStatsPerChannel]);
        }
    }
    return node_to_feature;
}

ReservoirConfig size_reservoir(int num_classes, const std::optional<Eigen::VectorXd>& channel_weights,
                               int nodes_per_class, std::uint64_t seed) {
    if (num_classes < 2) throw DataError("size_reservoir needs at least 2 classes");
    if (nodes_per_class < 1) throw DataError("nodes_per_class must be >= 1");

    ReservoirConfig cfg;
    cfg.num_nodes = num_classes * nodes_per_class;
    cfg.seed = seed;
    cfg.channel_node_counts = allocate_nodes(cfg.num_nodes, kNumChannels, channel_weights);
    cfg.node_to_feature = assign_node_features(cfg.channel_node_counts);
    return cfg;
}

std::optional<double> estimate_spectral_radius(const Eigen::MatrixXd& w, int max_iters, double tol) {
    const long n = w.rows();
    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> unit(0.1, 1.0);
    Eigen::VectorXd v_prev(n);
    for (long i = 0; i < n; ++i) v_prev[i] = unit(rng);
    v_prev.normalize();

    Eigen::VectorXd wv = w * v_prev;
    double g1 = wv.norm();
    if (g1 < 1e-300) return std::nullopt;
    Eigen::VectorXd v = wv / g1;

    // Fit W^2 v_prev + a W v_prev + b v_prev ~ 0 from three iterates; the
    // dominant eigenvalue magnitude is the largest root modulus of
    // x^2 + a x + b, which also covers conjugate-pair dominance.
    double prev_est = -1.0;
    int stable = 0;
    for (int iter = 0; iter < max_iters; ++iter) {
        wv = w * v;
        const double g2 = wv.norm();
        if (g2 < 1e-300) return std::nullopt;
        const Eigen::VectorXd wn = wv / g2;

        const double vv = v.dot(v_prev);
        const double a11 = g1 * g1, a12 = g1 * vv, a22 = 1.0;
        const double r1 = -(g1 * g2) * (g1 * wn.dot(v));
        const double r2 = -(g1 * g2) * wn.dot(v_prev);
        const double det = a11 * a22 - a12 * a12;
        double est = g2;  // plain power-iteration fallback when the fit degenerates
        if (std::abs(det) > 1e-14 * std::max(1.0, a11)) {
            const double a = (r1 * a22 - r2 * a12) / det;
            const double b = (a11 * r2 - a12 * r1) / det;
            const double disc = a * a - 4.0 * b;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                est = std::max(std::abs((-a + sq) / 2.0), std::abs((-a - sq) / 2.0));
            } else if (b > 0.0) {
                est = std::sqrt(b);
            }
        }

        if (std::abs(est - prev_est) <= tol * std::max(1.0, std::abs(est))) {
            if (++stable >= 5) return est;
        } else {
            stable = 0;
        }
        prev_est = est;
        v_prev = v;
        v = wn;
        g1 = g2;
    }
    return std::nullopt;
}

ReservoirWeights init_reservoir(const ReservoirConfig& cfg) {
    const int n = cfg.num_nodes;
    if (n <= 0) throw DataError("reservoir has no nodes");
    if (static_cast<int>(cfg.node_to_feature.size()) != n) {
        throw DataError("node_to_feature must assign every node exactly one feature");
    }
    for (const int f : cfg.node_to_feature) {
        if (f < 0 || f >= cfg.num_features) throw DataError("node assigned to out-of-range feature");
    }
    if (cfg.leak_alpha <= 0.0 || cfg.leak_alpha > 1.0) throw DataError("leak_alpha must be in (0,1]");
    if (cfg.spectral_radius <= 0.0 || cfg.spectral_radius >= 1.0) {
        throw DataError("spectral_radius target must be in (0,1)");
    }
    if (cfg.input_scaling <= 0.0) throw DataError("input_scaling must be positive");

    ReservoirWeights weights;

    std::mt19937_64 rng(mix_seed(cfg.seed, 0xA11CULL));
    std::uniform_real_distribution<double> cross(-0.1 * cfg.input_scaling, 0.1 * cfg.input_scaling);
    std::uniform_real_distribution<double> magnitude(0.3 * cfg.input_scaling, cfg.input_scaling);
    std::bernoulli_distribution sign(0.5);

    weights.w_in.resize(n, cfg.num_features);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < cfg.num_features; ++c) weights.w_in(r, c) = cross(rng);
        weights.w_in(r, cfg.node_to_feature[static_cast<std::size_t>(r)]) +=
            (sign(rng) ? 1.0 : -1.0) * magnitude(rng);
    }

    for (int attempt = 0; attempt < 2; ++attempt) {
        std::mt19937_64 wrng(mix_seed(cfg.seed, 0xBEEFULL + static_cast<std::uint64_t>(attempt)));
        Eigen::MatrixXd w = draw_sparse_skew(n, wrng);
        const auto rho = estimate_spectral_radius(w);
        if (!rho.has_value() || *rho < 1e-12) continue;
        w *= cfg.spectral_radius / *rho;
        const auto check = estimate_spectral_radius(w);
        if (!check.has_value() || std::abs(*check - cfg.spectral_radius) > 1e-6) continue;
        weights.w = std::move(w);
        weights.achieved_rho = *check;
        return weights;
    }
    throw NumericalError("reservoir spectral radius estimation failed to converge after reseed");
}

Eigen::VectorXd run_reservoir(const ReservoirWeights& weights, const ReservoirConfig& cfg,
                              const std::vector<Eigen::VectorXd>& inputs,
                              const Eigen::VectorXd& initial_state) {
    if (inputs.empty()) throw DataError("run_reservoir: empty input sequence");
    if (initial_state.size() != weights.w.rows()) throw DataError("initial state size mismatch");

    Eigen::VectorXd s = initial_state;
    const double a = cfg.leak_alpha;
    for (const auto& x : inputs) {
        if (x.size() != weights.w_in.cols()) throw DataError("input vector size mismatch");
        if (!x.allFinite()) throw DataError("run_reservoir: non-finite input");
        s = (1.0 - a) * s + a * (weights.w_in * x + weights.w * s).array().tanh().matrix();
    }
    return s;
}

Eigen::MatrixXd collect_states(const ReservoirWeights& weights, const ReservoirConfig& cfg,
                               const Eigen::MatrixXd& feature_rows) {
    const long rows = feature_rows.rows();
    Eigen::MatrixXd states(rows, cfg.num_nodes);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(cfg.num_nodes);
    for (long r = 0; r < rows; ++r) {
        const std::vector<Eigen::VectorXd> seq(static_cast<std::size_t>(cfg.t_drive),
                                               feature_rows.row(r).transpose());
        states.row(r) = run_reservoir(weights, cfg, seq, zero).transpose();
    }
    return states;
}

}  // namespace physres
