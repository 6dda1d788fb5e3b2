#include "physres/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "physres/common.hpp"

namespace physres {

std::vector<Window> build_synthetic_dataset(const PipelineConfig& cfg) {
    std::vector<Window> windows;
    for (std::size_t ci = 0; ci < cfg.classes.size(); ++ci) {
        const FaultLabel label = fault_label_from_int(cfg.classes[ci]);
        for (std::size_t li = 0; li < cfg.loads.size(); ++li) {
            const std::uint64_t rec_seed = mix_seed(cfg.seed, 1000 + ci * 64 + li);
            const RawRecording rec = synthesize_recording(label, cfg.loads[li], cfg.synth, rec_seed);
            auto rec_windows = segment(rec, cfg.window_len, cfg.hop);
            windows.insert(windows.end(), std::make_move_iterator(rec_windows.begin()),
                           std::make_move_iterator(rec_windows.end()));
        }
    }
    return windows;
}

int TrainedModel::class_index(FaultLabel label) const {
    for (std::size_t k = 0; k < class_labels.size(); ++k) {
        if (class_labels[k] == label) return static_cast<int>(k);
    }
    return -1;
}

namespace {

std::vector<int> to_class_indices(const TrainedModel& model, const std::vector<FaultLabel>& labels) {
    std::vector<int> out;
    out.reserve(labels.size());
    for (const FaultLabel l : labels) {
        const int k = model.class_index(l);
        if (k < 0) throw DataError("label " + std::to_string(static_cast<int>(l)) +
                                   " not present in the trained class set");
        out.push_back(k);
    }
    return out;
}

struct FitResult {
    ReservoirConfig rescfg;
    ReservoirWeights weights;
    ReadoutInit init;
    TrainResult train;
};

ReservoirConfig base_reservoir_config(int num_classes, const PipelineConfig& cfg) {
    ReservoirConfig rescfg =
        size_reservoir(num_classes, std::nullopt, cfg.nodes_per_class, mix_seed(cfg.seed, 0x7e5eULL));
    rescfg.leak_alpha = cfg.leak_alpha;
    rescfg.spectral_radius = cfg.spectral_radius;
    rescfg.input_scaling = cfg.input_scaling;
    rescfg.t_drive = cfg.t_drive;
    return rescfg;
}

FitResult fit_readout(const FeatureMatrix& standardized, const std::vector<int>& class_indices,
                      const WeightPrior& prior, const PipelineConfig& cfg,
                      const ReservoirConfig& rescfg) {
    FitResult fit;
    fit.rescfg = rescfg;
    fit.weights = init_reservoir(fit.rescfg);
    fit.init = init_readout_from_priors(prior, fit.rescfg.node_to_feature);

    const Eigen::MatrixXd states = collect_states(fit.weights, fit.rescfg, standardized.values);
    TrainConfig tc = cfg.train;
    tc.seed = mix_seed(cfg.seed, 0x7271ULL);
    fit.train = train_bbb(states, class_indices, fit.init.posterior, fit.init.prior, tc);
    return fit;
}

}  // namespace

TrainedModel train_pipeline(const FeatureMatrix& raw_train_features, const PipelineConfig& cfg) {
    TrainedModel model;
    model.stats = fit_global_stats(raw_train_features);
    const FeatureMatrix standardized = standardize(raw_train_features, model.stats);

    const ClassConditionalMoments moments = match_moments(standardized);
    if (moments.class_labels.size() < 2) throw DataError("training data must contain >= 2 classes");
    model.class_labels = moments.class_labels;
    model.prior = build_prior(moments, cfg.tau);

    const std::vector<int> class_indices = to_class_indices(model, standardized.labels);

    ReservoirConfig rescfg = base_reservoir_config(model.num_classes(), cfg);
    if (cfg.use_shap) {
        // pre-pass: train on a stratified slice, rank channels on the rest
        const SplitIndices split = stratified_split(standardized.labels, cfg.shap_validation_fraction,
                                                    mix_seed(cfg.seed, 0x5a9dULL));
        const FeatureMatrix fit_rows = select_rows(standardized, split.train);
        const FeatureMatrix val_rows = select_rows(standardized, split.test);
        std::vector<int> fit_indices;
        fit_indices.reserve(split.train.size());
        for (const long r : split.train) fit_indices.push_back(class_indices[static_cast<std::size_t>(r)]);

        TrainedModel prepass;
        prepass.stats = model.stats;
        prepass.class_labels = model.class_labels;
        prepass.prior = model.prior;
        FitResult pre = fit_readout(fit_rows, fit_indices, model.prior, cfg, rescfg);
        prepass.reservoir_cfg = pre.rescfg;
        prepass.reservoir = pre.weights;
        prepass.node_prior = pre.init.prior;
        prepass.q0 = pre.init.posterior;
        prepass.q = pre.train.posterior;

        const ShapleyReport report = rank_channels(prepass, val_rows);
        model.shap = report;
        rescfg = structure_from_ranks(report, rescfg);
    }

    FitResult fit = fit_readout(standardized, class_indices, model.prior, cfg, rescfg);
    model.reservoir_cfg = fit.rescfg;
    model.reservoir = fit.weights;
    model.node_prior = fit.init.prior;
    model.q0 = fit.init.posterior;
    model.q = fit.train.posterior;
    model.loss_trace = fit.train.loss_trace;
    return model;
}

FeatureMatrix standardize_with(const TrainedModel& model, const FeatureMatrix& raw) {
    return standardize(raw, model.stats);
}

Eigen::VectorXd state_for_row(const TrainedModel& model, const Eigen::VectorXd& standardized_row) {
    const std::vector<Eigen::VectorXd> seq(static_cast<std::size_t>(model.reservoir_cfg.t_drive),
                                           standardized_row);
    return run_reservoir(model.reservoir, model.reservoir_cfg, seq,
                         Eigen::VectorXd::Zero(model.reservoir_cfg.num_nodes));
}

PredictiveResult predict_row(const TrainedModel& model, const Eigen::VectorXd& standardized_row,
                             int mc_samples, std::uint64_t seed) {
    return predict(model.q, state_for_row(model, standardized_row), mc_samples, seed);
}

std::vector<PredictiveResult> predict_batch(const TrainedModel& model, const FeatureMatrix& standardized,
                                            int mc_samples, std::uint64_t seed, int workers) {
    const long rows = standardized.rows();
    std::vector<PredictiveResult> results(static_cast<std::size_t>(rows));
    const auto worker = [&](long begin, long end) {
        for (long r = begin; r < end; ++r) {
            results[static_cast<std::size_t>(r)] =
                predict_row(model, standardized.values.row(r).transpose(), mc_samples,
                            mix_seed(seed, static_cast<std::uint64_t>(r)));
        }
    };
    if (workers <= 1 || rows < 2) {
        worker(0, rows);
    } else {
        const int count = std::min<long>(workers, rows);
        std::vector<std::thread> threads;
        const long chunk = (rows + count - 1) / count;
        for (int t = 0; t < count; ++t) {
            const long begin = t * chunk;
            const long end = std::min(rows, begin + chunk);
            if (begin < end) threads.emplace_back(worker, begin, end);
        }
        for (auto& th : threads) th.join();
    }
    return results;
}

double mean_log_likelihood(const TrainedModel& model, const FeatureMatrix& standardized,
                           const std::optional<std::vector<bool>>& channel_mask) {
    const long rows = standardized.rows();
    if (rows == 0) throw DataError("mean_log_likelihood: empty feature matrix");

    Eigen::MatrixXd values = standardized.values;
    if (channel_mask.has_value()) {
        if (static_cast<int>(channel_mask->size()) != kNumChannels) {
            throw DataError("channel mask must cover all 7 channels");
        }
        for (int c = 0; c < kNumChannels; ++c) {
            if (!(*channel_mask)[static_cast<std::size_t>(c)]) {
                values.middleCols(c * kStatsPerChannel, kStatsPerChannel).setZero();
            }
        }
    }

    double total = 0.0;
    for (long r = 0; r < rows; ++r) {
        const int y = model.class_index(standardized.labels[static_cast<std::size_t>(r)]);
        if (y < 0) throw DataError("mean_log_likelihood: row label outside trained classes");
        const Eigen::VectorXd s = state_for_row(model, values.row(r).transpose());
        Eigen::VectorXd aug(s.size() + 1);
        aug.head(s.size()) = s;
        aug[s.size()] = 1.0;
        const Eigen::VectorXd logits = model.q.mu * aug;
        const double mx = logits.maxCoeff();
        total += logits[y] - (mx + std::log((logits.array() - mx).exp().sum()));
    }
    return total / static_cast<double>(rows);
}

std::vector<long> select_class_rows(const FeatureMatrix& fm, FaultLabel label) {
    std::vector<long> rows;
    for (long r = 0; r < fm.rows(); ++r) {
        if (fm.labels[static_cast<std::size_t>(r)] == label) rows.push_back(r);
    }
    return rows;
}

FeatureMatrix select_rows(const FeatureMatrix& fm, const std::vector<long>& rows) {
    FeatureMatrix out;
    out.values.resize(static_cast<long>(rows.size()), fm.values.cols());
    out.labels.reserve(rows.size());
    out.loads.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.values.row(static_cast<long>(i)) = fm.values.row(rows[i]);
        out.labels.push_back(fm.labels[static_cast<std::size_t>(rows[i])]);
        out.loads.push_back(fm.loads[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

SplitIndices stratified_split(const std::vector<FaultLabel>& labels, double test_fraction,
                              std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0) {
        throw DataError("test_fraction must be in [0,1)");
    }
    std::map<FaultLabel, std::vector<long>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<long>(i));

    SplitIndices split;
    for (auto& [label, rows] : by_class) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(label)));
        std::shuffle(rows.begin(), rows.end(), rng);
        const std::size_t test_count = static_cast<std::size_t>(
            std::lround(test_fraction * static_cast<double>(rows.size())));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (i < test_count ? split.test : split.train).push_back(rows[i]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

}  // namespace physres
