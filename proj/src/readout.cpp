#include "physres/readout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "physres/common.hpp"

namespace physres {

namespace {

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
    // y > 0; inverse of log(1+exp(x))
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log softmax-likelihood of class y given logits; stable
double log_softmax_at(const Eigen::VectorXd& logits, int y) {
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    return logits[y] - lse;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double mx = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - mx).exp();
    return p / p.sum();
}

double entropy(const Eigen::VectorXd& probs) {
    double h = 0.0;
    for (long k = 0; k < probs.size(); ++k) {
        if (probs[k] > 0.0) h -= probs[k] * std::log(probs[k]);
    }
    return h;
}

}  // namespace

Eigen::MatrixXd VariationalPosterior::sigma() const {
    return rho.unaryExpr([](double r) { return softplus(r); });
}

ReadoutInit init_readout_from_priors(const WeightPrior& prior, const std::vector<int>& node_to_feature) {
    const long K = prior.mean.rows();
    const long N = static_cast<long>(node_to_feature.size());
    if (N == 0) throw DataError("init_readout_from_priors: empty node assignment");
    for (const int f : node_to_feature) {
        if (f < 0 || f >= prior.mean.cols()) {
            throw DataError("node assignment references feature " + std::to_string(f) +
                            " outside prior with " + std::to_string(prior.mean.cols()) + " features");
        }
    }

    ReadoutInit init;
    init.prior.mean.resize(K, N + 1);
    init.prior.var.resize(K, N + 1);
    for (long k = 0; k < K; ++k) {
        for (long n = 0; n < N; ++n) {
            const int f = node_to_feature[static_cast<std::size_t>(n)];
            init.prior.mean(k, n) = prior.mean(k, f);
            init.prior.var(k, n) = prior.var(k, f);
            if (init.prior.var(k, n) <= 0.0) {
                throw DataError("prior variance must be positive; set tau > 0");
            }
        }
        init.prior.mean(k, N) = 0.0;  // bias
        init.prior.var(k, N) = 1.0;
    }

    init.posterior.mu = init.prior.mean;
    init.posterior.rho = init.prior.var.unaryExpr(
        [](double v) { return softplus_inverse(std::sqrt(v)); });
    return init;
}

double elbo_loss(const Eigen::MatrixXd& states, const std::vector<int>& labels,
                 const VariationalPosterior& q, const NodePrior& prior, double beta,
                 const std::vector<Eigen::MatrixXd>& eps_draws, ElboGrads* grads) {
    const long B = states.rows();
    const long K = q.mu.rows();
    const long D = q.mu.cols();
    if (B == 0) throw DataError("elbo_loss: empty batch");
    if (states.cols() + 1 != D) throw DataError("elbo_loss: state dimension mismatch");
    if (static_cast<long>(labels.size()) != B) throw DataError("elbo_loss: label count mismatch");
    if (eps_draws.empty()) throw DataError("elbo_loss: need at least one noise draw");

    const Eigen::MatrixXd sig = q.sigma();

    Eigen::MatrixXd aug(B, D);
    aug.leftCols(D - 1) = states;
    aug.col(D - 1).setOnes();

    if (grads != nullptr) {
        grads->d_mu = Eigen::MatrixXd::Zero(K, D);
        grads->d_rho = Eigen::MatrixXd::Zero(K, D);
    }

    const double inv_m = 1.0 / static_cast<double>(eps_draws.size());
    double nll_mean = 0.0;
    for (const auto& eps : eps_draws) {
        if (eps.rows() != K || eps.cols() != D) throw DataError("elbo_loss: noise draw shape mismatch");
        const Eigen::MatrixXd w = q.mu + sig.cwiseProduct(eps);
        const Eigen::MatrixXd logits = aug * w.transpose();  // [B x K]

        Eigen::MatrixXd dlogits(B, K);
        double nll = 0.0;
        for (long i = 0; i < B; ++i) {
            const int y = labels[static_cast<std::size_t>(i)];
            if (y < 0 || y >= K) throw DataError("elbo_loss: label out of range");
            const Eigen::VectorXd row = logits.row(i).transpose();
            nll -= log_softmax_at(row, y);
            if (grads != nullptr) {
                Eigen::VectorXd p = softmax(row);
                p[y] -= 1.0;
                dlogits.row(i) = p.transpose();
            }
        }
        nll_mean += inv_m * nll;
        if (grads != nullptr) {
            const Eigen::MatrixXd dw = dlogits.transpose() * aug;  // [K x D]
            grads->d_mu += inv_m * dw;
            grads->d_rho += inv_m * dw.cwiseProduct(eps);
        }
    }

    double kl_total = 0.0;
    for (long k = 0; k < K; ++k) {
        for (long d = 0; d < D; ++d) {
            kl_total += kl_gaussian(q.mu(k, d), sig(k, d) * sig(k, d), prior.mean(k, d), prior.var(k, d));
        }
    }

    const double loss = nll_mean + beta * kl_total;
    if (!std::isfinite(loss)) {
        throw NumericalError("elbo_loss: non-finite loss (nll=" + std::to_string(nll_mean) +
                             ", kl=" + std::to_string(kl_total) + ")");
    }

    if (grads != nullptr) {
        for (long k = 0; k < K; ++k) {
            for (long d = 0; d < D; ++d) {
                const double s = sig(k, d);
                const double dkl_dmu = (q.mu(k, d) - prior.mean(k, d)) / prior.var(k, d);
                const double dkl_dsig = -1.0 / s + s / prior.var(k, d);
                const double dsig_drho = sigmoid(q.rho(k, d));
                grads->d_mu(k, d) += beta * dkl_dmu;
                grads->d_rho(k, d) = grads->d_rho(k, d) * dsig_drho + beta * dkl_dsig * dsig_drho;
            }
        }
    }
    return loss;
}

TrainResult train_bbb(const Eigen::MatrixXd& states, const std::vector<int>& labels,
                      const VariationalPosterior& q0, const NodePrior& prior, const TrainConfig& cfg) {
    const long n = states.rows();
    if (n == 0) throw DataError("train_bbb: empty training set");
    std::vector<int> distinct = labels;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw DataError("train_bbb: need at least 2 classes in labels");
    if (cfg.learning_rate <= 0.0 || cfg.epochs < 0 || cfg.mc_train_samples < 1 || cfg.batch_size < 1) {
        throw DataError("train_bbb: invalid training configuration");
    }

    const long K = q0.mu.rows();
    const long D = q0.mu.cols();
    const int num_batches = static_cast<int>((n + cfg.batch_size - 1) / cfg.batch_size);
    const double beta = cfg.beta.value_or(1.0 / static_cast<double>(num_batches));

    TrainResult result;
    result.posterior = q0;
    if (cfg.epochs == 0) return result;

    std::mt19937_64 rng(mix_seed(cfg.seed, 0xBBBULL));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<long> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (int b = 0; b < num_batches; ++b) {
            const long begin = static_cast<long>(b) * cfg.batch_size;
            const long count = std::min<long>(cfg.batch_size, n - begin);
            Eigen::MatrixXd batch(count, states.cols());
            std::vector<int> batch_labels(static_cast<std::size_t>(count));
            for (long i = 0; i < count; ++i) {
                batch.row(i) = states.row(order[static_cast<std::size_t>(begin + i)]);
                batch_labels[static_cast<std::size_t>(i)] =
                    labels[static_cast<std::size_t>(order[static_cast<std::size_t>(begin + i)])];
            }
            std::vector<Eigen::MatrixXd> eps(static_cast<std::size_t>(cfg.mc_train_samples));
            for (auto& e : eps) {
                e.resize(K, D);
                for (long k = 0; k < K; ++k)
                    for (long d = 0; d < D; ++d) e(k, d) = gauss(rng);
            }
            ElboGrads grads;
            const double loss = elbo_loss(batch, batch_labels, result.posterior, prior, beta, eps, &grads);
            epoch_loss += loss;
            if (loss > 1e6) {
                throw TrainingDiverged("train_bbb diverged at epoch " + std::to_string(epoch) +
                                           " (loss " + std::to_string(loss) + ")",
                                       result.loss_trace);
            }
            result.posterior.mu -= cfg.learning_rate * grads.d_mu;
            result.posterior.rho -= cfg.learning_rate * grads.d_rho;
        }
        result.loss_trace.push_back(epoch_loss / num_batches);
    }
    return result;
}

PredictiveResult predict(const VariationalPosterior& q, const Eigen::VectorXd& state, int mc_samples,
                         std::uint64_t seed) {
    if (mc_samples < 1) throw DataError("predict: mc_samples must be >= 1");
    const long K = q.mu.rows();
    const long D = q.mu.cols();
    if (state.size() + 1 != D) throw DataError("predict: state dimension mismatch");

    Eigen::VectorXd aug(D);
    aug.head(D - 1) = state;
    aug[D - 1] = 1.0;

    const Eigen::MatrixXd sig = q.sigma();
    std::mt19937_64 rng(mix_seed(seed, 0x9ced1c7ULL));
    std::normal_distribution<double> gauss(0.0, 1.0);

    PredictiveResult result;
    result.probs = Eigen::VectorXd::Zero(K);
    double mean_draw_entropy = 0.0;
    for (int m = 0; m < mc_samples; ++m) {
        Eigen::VectorXd logits(K);
        for (long k = 0; k < K; ++k) {
            double z = 0.0;
            for (long d = 0; d < D; ++d) {
                z += (q.mu(k, d) + sig(k, d) * gauss(rng)) * aug[d];
            }
            logits[k] = z;
        }
        const Eigen::VectorXd p = softmax(logits);
        result.probs += p;
        mean_draw_entropy += entropy(p);
    }
    result.probs /= static_cast<double>(mc_samples);
    mean_draw_entropy /= static_cast<double>(mc_samples);

    result.total = entropy(result.probs);
    result.aleatoric = mean_draw_entropy;
    result.epistemic = result.total - result.aleatoric;
    return result;
}

McmcResult mh_sample(const std::function<double(const Eigen::VectorXd&)>& log_target,
                     const Eigen::VectorXd& x0, int steps, double proposal_std, std::uint64_t seed) {
    if (steps < 1) throw DataError("mh_sample: steps must be >= 1");
    if (proposal_std < 0.0) throw DataError("mh_sample: proposal_std must be nonnegative");

    std::mt19937_64 rng(mix_seed(seed, 0x3c4a1ULL));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    McmcResult result;
    Eigen::VectorXd x = x0;
    double lp = log_target(x);
    long accepted = 0;
    for (int step = 1; step <= steps; ++step) {
        Eigen::VectorXd proposal = x;
        for (long i = 0; i < proposal.size(); ++i) proposal[i] += proposal_std * gauss(rng);
        const double lp_new = log_target(proposal);
        if (std::log(unit(rng)) < lp_new - lp) {
            x = std::move(proposal);
            lp = lp_new;
            ++accepted;
        }
        if (step % 10 == 0) result.chain.push_back(x);
    }
    result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(steps);
    return result;
}

McmcResult mh_refine(const VariationalPosterior& q, const Eigen::MatrixXd& states,
                     const std::vector<int>& labels, const NodePrior& prior, int steps,
                     double proposal_std, std::uint64_t seed) {
    const long K = q.mu.rows();
    const long D = q.mu.cols();
    const long B = states.rows();
    if (static_cast<long>(labels.size()) != B) throw DataError("mh_refine: label count mismatch");

    Eigen::MatrixXd aug(B, D);
    if (B > 0) {
        aug.leftCols(D - 1) = states;
        aug.col(D - 1).setOnes();
    }

    const auto log_posterior = [&](const Eigen::VectorXd& flat) {
        const Eigen::MatrixXd w = unflatten_weights(flat, K, D);
        double lp = 0.0;
        for (long i = 0; i < B; ++i) {
            const Eigen::VectorXd logits = w * aug.row(i).transpose();
            lp += log_softmax_at(logits, labels[static_cast<std::size_t>(i)]);
        }
        for (long k = 0; k < K; ++k) {
            for (long d = 0; d < D; ++d) {
                const double diff = w(k, d) - prior.mean(k, d);
                lp -= 0.5 * diff * diff / prior.var(k, d) +
                      0.5 * std::log(2.0 * 3.14159265358979323846 * prior.var(k, d));
            }
        }
        return lp;
    };

    return mh_sample(log_posterior, flatten_weights(q.mu), steps, proposal_std, seed);
}

Eigen::VectorXd flatten_weights(const Eigen::MatrixXd& w) {
    Eigen::VectorXd flat(w.size());
    long idx = 0;
    for (long k = 0; k < w.rows(); ++k)
        for (long d = 0; d < w.cols(); ++d) flat[idx++] = w(k, d);
    return flat;
}

Eigen::MatrixXd unflatten_weights(const Eigen::VectorXd& v, long rows, long cols) {
    if (v.size() != rows * cols) throw DataError("unflatten_weights: size mismatch");
    Eigen::MatrixXd w(rows, cols);
    long idx = 0;
    for (long k = 0; k < rows; ++k)
        for (long d = 0; d < cols; ++d) w(k, d) = v[idx++];
    return w;
}

}  // namespace physres
