#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "physres/common.hpp"
#include "physres/priors.hpp"
#include "physres/reservoir.hpp"

namespace physres {

// Variational Gaussian over the readout weights. Column layout is
// [node states..., bias]; sigma = softplus(rho) keeps scales positive.
struct VariationalPosterior {
    Eigen::MatrixXd mu;   // [K x (N+1)]
    Eigen::MatrixXd rho;  // raw scale parameters

    Eigen::MatrixXd sigma() const;
};

struct NodePrior {
    Eigen::MatrixXd mean;  // [K x (N+1)]
    Eigen::MatrixXd var;
};

struct ReadoutInit {
    VariationalPosterior posterior;  // initialized equal to the prior
    NodePrior prior;
};

// Broadcasts the per-(class, feature) prior onto nodes via node_to_feature;
// the bias column gets N(0,1). Posterior starts at the prior, so KL = 0.
ReadoutInit init_readout_from_priors(const WeightPrior& prior, const std::vector<int>& node_to_feature);

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 200;
    int mc_train_samples = 2;
    int batch_size = 32;
    std::optional<double> beta;  // KL weight; defaults to 1/num_batches
    std::uint64_t seed = 0;
};

struct ElboGrads {
    Eigen::MatrixXd d_mu;
    Eigen::MatrixXd d_rho;
};

// Free energy of one batch: mean over noise draws of the summed negative
// log-likelihood at w = mu + sigma*eps, plus beta times the closed-form
// Gaussian KL to the prior (counted once). States rows are raw node states;
// the bias input is appended internally.
double elbo_loss(const Eigen::MatrixXd& states, const std::vector<int>& labels,
                 const VariationalPosterior& q, const NodePrior& prior, double beta,
                 const std::vector<Eigen::MatrixXd>& eps_draws, ElboGrads* grads = nullptr);

struct TrainResult {
    VariationalPosterior posterior;
    std::vector<double> loss_trace;  // per epoch, mean batch loss
};

struct TrainingDiverged : NumericalError {
    std::vector<double> loss_trace;
    explicit TrainingDiverged(const std::string& msg, std::vector<double> trace)
        : NumericalError(msg), loss_trace(std::move(trace)) {}
};

// Plain reparameterized SGD on elbo_loss; deterministic given cfg.seed.
TrainResult train_bbb(const Eigen::MatrixXd& states, const std::vector<int>& labels,
                      const VariationalPosterior& q0, const NodePrior& prior, const TrainConfig& cfg);

struct PredictiveResult {
    Eigen::VectorXd probs;      // simplex over classes
    double total = 0.0;         // entropy of the mean, nats
    double aleatoric = 0.0;     // mean entropy of the draws
    double epistemic = 0.0;     // total - aleatoric
};

PredictiveResult predict(const VariationalPosterior& q, const Eigen::VectorXd& state, int mc_samples,
                         std::uint64_t seed);

struct McmcResult {
    std::vector<Eigen::VectorXd> chain;  // kept samples (every 10th step)
    double acceptance_rate = 0.0;
};

// Random-walk Metropolis-Hastings over a log-density.
McmcResult mh_sample(const std::function<double(const Eigen::VectorXd&)>& log_target,
                     const Eigen::VectorXd& x0, int steps, double proposal_std, std::uint64_t seed);

// Posterior refinement over flattened readout weights; target is softmax
// log-likelihood plus the Gaussian prior log-density.
McmcResult mh_refine(const VariationalPosterior& q, const Eigen::MatrixXd& states,
                     const std::vector<int>& labels, const NodePrior& prior, int steps,
                     double proposal_std, std::uint64_t seed);

Eigen::VectorXd flatten_weights(const Eigen::MatrixXd& w);
Eigen::MatrixXd unflatten_weights(const Eigen::VectorXd& v, long rows, long cols);

}  // namespace physres
