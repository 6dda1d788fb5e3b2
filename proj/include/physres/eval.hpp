#pragma once

#include <Eigen/Dense>
#include <vector>

#include "physres/pipeline.hpp"

namespace physres {

struct EvalReport {
    std::vector<FaultLabel> class_labels;
    double overall_accuracy = 0.0;
    Eigen::VectorXd per_class_accuracy;
    Eigen::MatrixXi confusion;  // [K x K], rows = true class
    Eigen::VectorXd mean_total;      // per class, nats
    Eigen::VectorXd mean_aleatoric;
    Eigen::VectorXd mean_epistemic;
    double wall_seconds = 0.0;        // excluded from deterministic outputs
    long trainable_params = 0;
    long num_samples = 0;
};

EvalReport evaluate_predictions(const TrainedModel& model, const FeatureMatrix& standardized_test,
                                const std::vector<PredictiveResult>& predictions);

struct UncertaintySummary {
    double mean_total = 0.0;
    double mean_aleatoric = 0.0;
    double mean_epistemic = 0.0;
    long num_samples = 0;
};

UncertaintySummary summarize_uncertainty(const std::vector<PredictiveResult>& predictions);

struct UnseenFaultReport {
    TrainedModel model;
    EvalReport seen;
    UncertaintySummary seen_uncertainty;
    UncertaintySummary unseen_uncertainty;
    std::vector<PredictiveResult> seen_predictions;
    std::vector<PredictiveResult> unseen_predictions;
    double epistemic_ratio = 0.0;  // unseen mean epistemic / seen mean epistemic
};

// Train on every class except held_out; evaluate on a stratified test split
// of the seen classes plus all held-out windows.
UnseenFaultReport unseen_fault_protocol(const std::vector<Window>& windows, FaultLabel held_out,
                                        const PipelineConfig& cfg);

struct AblationReport {
    EvalReport untrained;  // prior-initialized readout, epochs = 0
    EvalReport trained;
    double accuracy_gain = 0.0;
};

AblationReport readout_ablation(const std::vector<Window>& windows, const PipelineConfig& cfg);

// x' = x + level*0.5*std + (x - mean)*0.3*level, i.e. z' = z(1+0.3L) + 0.5L
// in standardized space. Level 0 is the identity.
Eigen::MatrixXd apply_shift(const Eigen::MatrixXd& standardized_values, double level);

struct ShiftPoint {
    double level = 0.0;
    double accuracy = 0.0;
    double mean_total_uncertainty = 0.0;
};

std::vector<ShiftPoint> shift_sweep(const std::vector<Window>& windows,
                                    const std::vector<double>& levels, const PipelineConfig& cfg);

// Dense fully-variational MLP trained by the same BBB scheme on all layers;
// standard-normal priors on every weight.
struct BaselineBnn {
    VariationalPosterior layer1;  // [H x (F+1)]
    VariationalPosterior layer2;  // [K x (H+1)]
    std::vector<double> loss_trace;

    long trainable_params() const { return 2 * (layer1.mu.size() + layer2.mu.size()); }
};

struct BaselineGrads {
    ElboGrads layer1;
    ElboGrads layer2;
};

double baseline_elbo_loss(const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                          const BaselineBnn& net, double beta,
                          const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& eps_draws,
                          BaselineGrads* grads = nullptr);

BaselineBnn train_baseline_bnn(const Eigen::MatrixXd& inputs, const std::vector<int>& labels,
                               int num_classes, int hidden_width, const TrainConfig& cfg);

Eigen::VectorXd baseline_predict_probs(const BaselineBnn& net, const Eigen::VectorXd& input,
                                       int mc_samples, std::uint64_t seed);

struct CompareReport {
    long proposed_params = 0;
    long baseline_params = 0;
    double proposed_seconds = 0.0;
    double baseline_seconds = 0.0;
    double proposed_accuracy = 0.0;
    double baseline_accuracy = 0.0;
};

// Same epochs/batch settings in both arms; the proposed arm runs without the
// SHAP pre-pass so the training-effort comparison is one training pass each.
CompareReport baseline_bnn_compare(const std::vector<Window>& windows, const PipelineConfig& cfg);

}  // namespace physres
