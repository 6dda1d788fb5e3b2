#include "physres/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "physres/common.hpp"

namespace physres {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

int argmax(const Eigen::VectorXd& v) {
    Eigen::Index idx = 0;
    v.maxCoeff(&idx);
    return static_cast<int>(idx);
}

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& logits) {
    const double mx = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - mx).exp();
    return p / p.sum();
}

}  // namespace

EvalReport evaluate_predictions(const TrainedModel& model, const FeatureMatrix& standardized_test,
                                const std::vector<PredictiveResult>& predictions) {
    const long n = standardized_test.rows();
    if (static_cast<long>(predictions.size()) != n) throw DataError("prediction count mismatch");
    const int K = model.num_classes();

    EvalReport report;
    report.class_labels = model.class_labels;
    report.confusion = Eigen::MatrixXi::Zero(K, K);
    report.mean_total = Eigen::VectorXd::Zero(K);
    report.mean_aleatoric = Eigen::VectorXd::Zero(K);
    report.mean_epistemic = Eigen::VectorXd::Zero(K);
    report.trainable_params = model.trainable_params();
    report.num_samples = n;

    Eigen::VectorXd class_counts = Eigen::VectorXd::Zero(K);
    long correct = 0;
    for (long r = 0; r < n; ++r) {
        const int truth = model.class_index(standardized_test.labels[static_cast<std::size_t>(r)]);
        if (truth < 0) throw DataError("test label outside trained classes");
        const auto& pred = predictions[static_cast<std::size_t>(r)];
        const int guess = argmax(pred.probs);
        report.confusion(truth, guess) += 1;
        if (guess == truth) ++correct;
        class_counts[truth] += 1.0;
        report.mean_total[truth] += pred.total;
        report.mean_aleatoric[truth] += pred.aleatoric;
        report.mean_epistemic[truth] += pred.epistemic;
    }

    report.overall_accuracy = n > 0 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
    report.per_class_accuracy = Eigen::VectorXd::Zero(K);
    for (int k = 0; k < K; ++k) {
        if (class_counts[k] > 0.0) {
            report.per_class_accuracy[k] =
                static_cast<double>(report.confusion(k, k)) / class_counts[k];
            report.mean_total[k] /= class_counts[k];
            report.mean_aleatoric[k] /= class_counts[k];
            report.mean_epistemic[k] /= class_counts[k];
        }
    }
    return report;
}

UncertaintySummary summarize_uncertainty(const std::vector<PredictiveResult>& predictions) {
    UncertaintySummary s;
    s.num_samples = static_cast<long>(predictions.size());
    for (const auto& p : predictions) {
        s.mean_total += p.total;
        s.mean_aleatoric += p.aleatoric;
        s.mean_epistemic += p.epistemic;
    }
    if (s.num_samples > 0) {
        s.mean_total /= static_cast<double>(s.num_samples);
        s.mean_aleatoric /= static_cast<double>(s.num_samples);
        s.mean_epistemic /= static_cast<double>(s.num_samples);
    }
    return s;
}

UnseenFaultReport unseen_fault_protocol(const std::vector<Window>& windows, FaultLabel held_out,
                                        const PipelineConfig& cfg) {
    const FeatureMatrix all = extract_features(windows);

    std::vector<long> seen_rows, unseen_rows;
    for (long r = 0; r < all.rows(); ++r) {
        (all.labels[static_cast<std::size_t>(r)] == held_out ? unseen_rows : seen_rows).push_back(r);
    }
    if (unseen_rows.empty()) {
        throw DataError("held-out class " + std::to_string(static_cast<int>(held_out)) +
                        " is absent from the dataset");
    }
    const FeatureMatrix seen = select_rows(all, seen_rows);
    const FeatureMatrix unseen = select_rows(all, unseen_rows);

    const SplitIndices split =
        stratified_split(seen.labels, cfg.test_fraction, mix_seed(cfg.seed, 0x517ULL));
    const FeatureMatrix train_rows = select_rows(seen, split.train);
    const FeatureMatrix test_rows = select_rows(seen, split.test);

    UnseenFaultReport report;
    const auto start = Clock::now();
    report.model = train_pipeline(train_rows, cfg);
    const double train_seconds = seconds_since(start);

    const FeatureMatrix test_std = standardize_with(report.model, test_rows);
    const FeatureMatrix unseen_std = standardize_with(report.model, unseen);
    report.seen_predictions = predict_batch(report.model, test_std, cfg.predict_mc_samples,
                                            mix_seed(cfg.seed, 0xeea1ULL), cfg.workers);
    report.unseen_predictions = predict_batch(report.model, unseen_std, cfg.predict_mc_samples,
                                              mix_seed(cfg.seed, 0xeea2ULL), cfg.workers);

    report.seen = evaluate_predictions(report.model, test_std, report.seen_predictions);
    report.seen.wall_seconds = train_seconds;
    report.seen_uncertainty = summarize_uncertainty(report.seen_predictions);
    report.unseen_uncertainty = summarize_uncertainty(report.unseen_predictions);
    report.epistemic_ratio = report.seen_uncertainty.mean_epistemic > 0.0
                                 ? report.unseen_uncertainty.mean_epistemic /
                                       report.seen_uncertainty.mean_epistemic
                                 : std::numeric_limits<double>::infinity();
    return report;
}

AblationReport readout_ablation(const std::vector<Window>& windows, const PipelineConfig& cfg) {
    const FeatureMatrix all = extract_features(windows);
    const SplitIndices split =
        stratified_split(all.labels, cfg.test_fraction, mix_seed(cfg.seed, 0x517ULL));
    const FeatureMatrix train_rows = select_rows(all, split.train);
    const FeatureMatrix test_rows = select_rows(all, split.test);

    TrainedModel model = train_pipeline(train_rows, cfg);
    const FeatureMatrix test_std = standardize_with(model, test_rows);

    // arm A: identical reservoir and priors, readout left at initialization
    TrainedModel untrained = model;
    untrained.q = model.q0;

    const auto untrained_preds = predict_batch(untrained, test_std, cfg.predict_mc_samples,
                                               mix_seed(cfg.seed, 0xab1aULL), cfg.workers);
    const auto trained_preds = predict_batch(model, test_std, cfg.predict_mc_samples,
                                             mix_seed(cfg.seed, 0xab1bULL), cfg.workers);

    AblationReport report;
    report.untrained = evaluate_predictions(untrained, test_std, untrained_preds);
    report.trained = evaluate_predictions(model, test_std, trained_preds);
    report.accuracy_gain = report.trained.overall_accuracy - report.untrained.overall_accuracy;
    return report;
}

Eigen::MatrixXd apply_shift(const Eigen::MatrixXd& standardized_values, double level) {
    if (level < 0.0) throw DataError("shift level must be nonnegative");
    if (level == 0.0) return standardized_values;
    constexpr double kOffsetScale = 0.5;  // s_j = 0.5 * train std (= 0.5 standardized)
    constexpr double kGamma = 0.3;
    return (standardized_values.array() * (1.0 + kGamma * level) + kOffsetScale * level).matrix();
}

std::vector<ShiftPoint> shift_sweep(const std::vector<Window>& windows,
                                    const std::vector<double>& levels, const PipelineConfig& cfg) {
    if (levels.size() < 5) throw DataError("shift sweep needs at least 5 levels");
    if (std::find(levels.begin(), levels.end(), 0.0) == levels.end()) {
        throw DataError("shift sweep levels must include 0");
    }
    for (const double level : levels) {
        if (level < 0.0) throw DataError("shift level must be nonnegative");
    }

    const FeatureMatrix all = extract_features(windows);
    const SplitIndices split =
        stratified_split(all.labels, cfg.test_fraction, mix_seed(cfg.seed, 0x517ULL));
    const TrainedModel model = train_pipeline(select_rows(all, split.train), cfg);
    const FeatureMatrix test_std = standardize_with(model, select_rows(all, split.test));

    std::vector<ShiftPoint> points;
    for (const double level : levels) {
        FeatureMatrix shifted = test_std;
        shifted.values = apply_shift(test_std.values, level);
        const auto preds = predict_batch(model, shifted, cfg.predict_mc_samples,
                                         mix_seed(cfg.seed, 0x5f1ULL), cfg.workers);
        const EvalReport report = evaluate_predictions(model, shifted, preds);
        ShiftPoint point;
        point.level = level;
        point.accuracy = report.overall_accuracy;
        point.mean_total_uncertainty = summarize_uncertainty(preds).mean_total;
        points.push_back(point);
    }
    return points;
}

double baseline_elbo_loss(const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                          const BaselineBnn& net, double beta,
                          const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& eps_draws,
                          BaselineGrads* grads) {
    const long B = inputs.rows();
    const long F = inputs.cols();
    const long H = net.layer1.mu.rows();
    const long K = net.layer2.mu.rows();
    if (net.layer1.mu.cols() != F + 1 || net.layer2.mu.cols() != H + 1) {
        throw DataError("baseline_elbo_loss: layer shape mismatch");
    }
    if (B == 0 || eps_draws.empty()) throw DataError("baseline_elbo_loss: empty batch or draws");

    const Eigen::MatrixXd sig1 = net.layer1.sigma();
    const Eigen::MatrixXd sig2 = net.layer2.sigma();

    Eigen::MatrixXd aug_in(B, F + 1);
    aug_in.leftCols(F) = inputs;
    aug_in.col(F).setOnes();

    if (grads != nullptr) {
        grads->layer1.d_mu = Eigen::MatrixXd::Zero(H, F + 1);
        grads->layer1.d_rho = Eigen::MatrixXd::Zero(H, F + 1);
        grads->layer2.d_mu = Eigen::MatrixXd::Zero(K, H + 1);
        grads->layer2.d_rho = Eigen::MatrixXd::Zero(K, H + 1);
    }

    const double inv_m = 1.0 / static_cast<double>(eps_draws.size());
    double nll_mean = 0.0;
    for (const auto& [eps1, eps2] : eps_draws) {
        const Eigen::MatrixXd w1 = net.layer1.mu + sig1.cwiseProduct(eps1);
        const Eigen::MatrixXd w2 = net.layer2.mu + sig2.cwiseProduct(eps2);

        const Eigen::MatrixXd pre = aug_in * w1.transpose();       // [B x H]
        const Eigen::MatrixXd hidden = pre.array().tanh().matrix();
        Eigen::MatrixXd aug_h(B, H + 1);
        aug_h.leftCols(H) = hidden;
        aug_h.col(H).setOnes();
        const Eigen::MatrixXd logits = aug_h * w2.transpose();     // [B x K]

        Eigen::MatrixXd dlogits(B, K);
        double nll = 0.0;
        for (long i = 0; i < B; ++i) {
            const int y = labels[static_cast<std::size_t>(i)];
            const Eigen::VectorXd p = stable_softmax(logits.row(i).transpose());
            nll -= std::log(std::max(p[y], 1e-300));
            Eigen::VectorXd d = p;
            d[y] -= 1.0;
            dlogits.row(i) = d.transpose();
        }
        nll_mean += inv_m * nll;

        if (grads != nullptr) {
            const Eigen::MatrixXd dw2 = dlogits.transpose() * aug_h;  // [K x H+1]
            const Eigen::MatrixXd dhidden = dlogits * w2.leftCols(H); // [B x H]
            const Eigen::MatrixXd dpre =
                dhidden.cwiseProduct((1.0 - hidden.array().square()).matrix());
            const Eigen::MatrixXd dw1 = dpre.transpose() * aug_in;    // [H x F+1]
            grads->layer2.d_mu += inv_m * dw2;
            grads->layer2.d_rho += inv_m * dw2.cwiseProduct(eps2);
            grads->layer1.d_mu += inv_m * dw1;
            grads->layer1.d_rho += inv_m * dw1.cwiseProduct(eps1);
        }
    }

    // standard normal prior on every weight
    double kl_total = 0.0;
    const auto kl_layer = [&](const VariationalPosterior& layer, const Eigen::MatrixXd& sig) {
        for (long r = 0; r < layer.mu.rows(); ++r)
            for (long c = 0; c < layer.mu.cols(); ++c)
                kl_total += kl_gaussian(layer.mu(r, c), sig(r, c) * sig(r, c), 0.0, 1.0);
    };
    kl_layer(net.layer1, sig1);
    kl_layer(net.layer2, sig2);

    const double loss = nll_mean + beta * kl_total;
    if (!std::isfinite(loss)) throw NumericalError("baseline_elbo_loss: non-finite loss");

    if (grads != nullptr) {
        const auto add_kl = [&](const VariationalPosterior& layer, const Eigen::MatrixXd& sig,
                                ElboGrads& g) {
            for (long r = 0; r < layer.mu.rows(); ++r) {
                for (long c = 0; c < layer.mu.cols(); ++c) {
                    const double s = sig(r, c);
                    const double dsig_drho = 1.0 / (1.0 + std::exp(-layer.rho(r, c)));
                    g.d_mu(r, c) += beta * layer.mu(r, c);
                    g.d_rho(r, c) = g.d_rho(r, c) * dsig_drho + beta * (s - 1.0 / s) * dsig_drho;
                }
            }
        };
        add_kl(net.layer1, sig1, grads->layer1);
        add_kl(net.layer2, sig2, grads->layer2);
    }
    return loss;
}

BaselineBnn train_baseline_bnn(const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                               int num_classes, int hidden_width, const TrainConfig& cfg) {
    const long n = inputs.rows();
    const long F = inputs.cols();
    if (n == 0) throw DataError("train_baseline_bnn: empty training set");

    BaselineBnn net;
    std::mt19937_64 rng(mix_seed(cfg.seed, 0xb11eULL));
    std::normal_distribution<double> gauss(0.0, 1.0);

    const double init_rho = std::log(std::expm1(0.05));  // sigma ~ 0.05
    const auto init_layer = [&](long rows, long cols, double scale) {
        VariationalPosterior layer;
        layer.mu.resize(rows, cols);
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c) layer.mu(r, c) = scale * gauss(rng);
        layer.rho = Eigen::MatrixXd::Constant(rows, cols, init_rho);
        return layer;
    };
    net.layer1 = init_layer(hidden_width, F + 1, 1.0 / std::sqrt(static_cast<double>(F)));
    net.layer2 = init_layer(num_classes, hidden_width + 1, 1.0 / std::sqrt(static_cast<double>(hidden_width)));

    const int num_batches = static_cast<int>((n + cfg.batch_size - 1) / cfg.batch_size);
    const double beta = cfg.beta.value_or(1.0 / static_cast<double>(num_batches));

    std::vector<long> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (int b = 0; b < num_batches; ++b) {
            const long begin = static_cast<long>(b) * cfg.batch_size;
            const long count = std::min<long>(cfg.batch_size, n - begin);
            Eigen::MatrixXd batch(count, F);
            std::vector<int> batch_labels(static_cast<std::size_t>(count));
            for (long i = 0; i < count; ++i) {
                batch.row(i) = inputs.row(order[static_cast<std::size_t>(begin + i)]);
                batch_labels[static_cast<std::size_t>(i)] =
                    labels[static_cast<std::size_t>(order[static_cast<std::size_t>(begin + i)])];
            }
            std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> eps(
                static_cast<std::size_t>(cfg.mc_train_samples));
            for (auto& [e1, e2] : eps) {
                e1.resize(net.layer1.mu.rows(), net.layer1.mu.cols());
                e2.resize(net.layer2.mu.rows(), net.layer2.mu.cols());
                for (long r = 0; r < e1.rows(); ++r)
                    for (long c = 0; c < e1.cols(); ++c) e1(r, c) = gauss(rng);
                for (long r = 0; r < e2.rows(); ++r)
                    for (long c = 0; c < e2.cols(); ++c) e2(r, c) = gauss(rng);
            }
            BaselineGrads grads;
            const double loss = baseline_elbo_loss(batch, batch_labels, net, beta, eps, &grads);
            epoch_loss += loss;
            if (loss > 1e6) throw NumericalError("baseline BNN training diverged");
            net.layer1.mu -= cfg.learning_rate * grads.layer1.d_mu;
            net.layer1.rho -= cfg.learning_rate * grads.layer1.d_rho;
            net.layer2.mu -= cfg.learning_rate * grads.layer2.d_mu;
            net.layer2.rho -= cfg.learning_rate * grads.layer2.d_rho;
        }
        net.loss_trace.push_back(epoch_loss / num_batches);
    }
    return net;
}

Eigen::VectorXd baseline_predict_probs(const BaselineBnn& net, const Eigen::VectorXd& input,
                                       int mc_samples, std::uint64_t seed) {
    const long F = input.size();
    const long H = net.layer1.mu.rows();
    const long K = net.layer2.mu.rows();
    const Eigen::MatrixXd sig1 = net.layer1.sigma();
    const Eigen::MatrixXd sig2 = net.layer2.sigma();

    Eigen::VectorXd aug_in(F + 1);
    aug_in.head(F) = input;
    aug_in[F] = 1.0;

    std::mt19937_64 rng(mix_seed(seed, 0xb9edULL));
    std::normal_distribution<double> gauss(0.0, 1.0);

    Eigen::VectorXd probs = Eigen::VectorXd::Zero(K);
    for (int m = 0; m < mc_samples; ++m) {
        Eigen::VectorXd pre(H);
        for (long h = 0; h < H; ++h) {
            double z = 0.0;
            for (long c = 0; c <= F; ++c) {
                z += (net.layer1.mu(h, c) + sig1(h, c) * gauss(rng)) * aug_in[c];
            }
            pre[h] = std::tanh(z);
        }
        Eigen::VectorXd logits(K);
        for (long k = 0; k < K; ++k) {
            double z = 0.0;
            for (long h = 0; h < H; ++h) {
                z += (net.layer2.mu(k, h) + sig2(k, h) * gauss(rng)) * pre[h];
            }
            z += net.layer2.mu(k, H) + sig2(k, H) * gauss(rng);
            logits[k] = z;
        }
        probs += stable_softmax(logits);
    }
    return probs / static_cast<double>(mc_samples);
}

CompareReport baseline_bnn_compare(const std::vector<Window>& windows, const PipelineConfig& cfg) {
    const FeatureMatrix all = extract_features(windows);
    const SplitIndices split =
        stratified_split(all.labels, cfg.test_fraction, mix_seed(cfg.seed, 0x517ULL));
    const FeatureMatrix train_rows = select_rows(all, split.train);
    const FeatureMatrix test_rows = select_rows(all, split.test);

    CompareReport report;

    // proposed arm: one training pass (no SHAP pre-pass) for a like-for-like
    // training-effort comparison
    PipelineConfig proposed_cfg = cfg;
    proposed_cfg.use_shap = false;
    auto start = Clock::now();
    const TrainedModel model = train_pipeline(train_rows, proposed_cfg);
    report.proposed_seconds = seconds_since(start);
    report.proposed_params = model.trainable_params();

    const FeatureMatrix test_std = standardize_with(model, test_rows);
    const auto preds = predict_batch(model, test_std, cfg.predict_mc_samples,
                                     mix_seed(cfg.seed, 0xc0deULL), cfg.workers);
    report.proposed_accuracy = evaluate_predictions(model, test_std, preds).overall_accuracy;

    // baseline arm: dense two-layer variational network on the same features
    const GlobalStats stats = fit_global_stats(train_rows);
    const FeatureMatrix train_std = standardize(train_rows, stats);
    const FeatureMatrix test_std_b = standardize(test_rows, stats);

    std::vector<FaultLabel> class_labels = train_std.labels;
    std::sort(class_labels.begin(), class_labels.end());
    class_labels.erase(std::unique(class_labels.begin(), class_labels.end()), class_labels.end());
    const auto index_of = [&](FaultLabel l) {
        return static_cast<int>(std::find(class_labels.begin(), class_labels.end(), l) -
                                class_labels.begin());
    };
    std::vector<int> train_idx, test_idx;
    for (const FaultLabel l : train_std.labels) train_idx.push_back(index_of(l));
    for (const FaultLabel l : test_std_b.labels) test_idx.push_back(index_of(l));

    TrainConfig tc = cfg.train;
    tc.seed = mix_seed(cfg.seed, 0xba5eULL);
    constexpr int kHiddenWidth = 64;
    start = Clock::now();
    const BaselineBnn net = train_baseline_bnn(train_std.values, train_idx,
                                               static_cast<int>(class_labels.size()), kHiddenWidth, tc);
    report.baseline_seconds = seconds_since(start);
    report.baseline_params = net.trainable_params();

    long correct = 0;
    for (long r = 0; r < test_std_b.rows(); ++r) {
        const Eigen::VectorXd probs =
            baseline_predict_probs(net, test_std_b.values.row(r).transpose(), cfg.predict_mc_samples,
                                   mix_seed(cfg.seed, 0xd00d + static_cast<std::uint64_t>(r)));
        if (argmax(probs) == test_idx[static_cast<std::size_t>(r)]) ++correct;
    }
    report.baseline_accuracy =
        test_std_b.rows() > 0 ? static_cast<double>(correct) / static_cast<double>(test_std_b.rows()) : 0.0;
    return report;
}

}  // namespace physres
