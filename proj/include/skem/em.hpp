#pragma once

#include "skem/model.hpp"

#include <cstdint>
#include <vector>

namespace skem {

/// Settings for one supervised EM run.
struct TrainConfig {
    int num_components = 2;
    int passes = 30;
    std::uint64_t seed = 0;
    // Sub-stream of seed feeding the initialization draws. Single-model
    // training keeps 0; partitioned training assigns block r stream r, so
    // a one-block partition reproduces the single model exactly.
    std::uint64_t seed_stream = 0;

    // Initialization: means i.i.d. U[init_low, init_high]^M, covariances
    // sigma^2 I, uniform mixing weights 1/K for every class.
    double init_low = -2.0;
    double init_high = 2.0;
    double init_sigma = 2.0;

    // Replace per-component covariances with the single pooled estimate
    // after every pass (the discriminant-analysis flavour).
    bool pooled_covariance = false;

    // Post-update floor on mixing weights (rows re-normalized after
    // clamping). 0 disables it.
    double min_weight = 0.0;

    // Stop early once the per-pass log-likelihood gain drops below this
    // relative threshold. 0 disables it; the paper-style fixed pass count
    // is the default behaviour. Only single-model training honours it —
    // partitioned blocks advance in lockstep and ignore it.
    double early_stop_rel_improvement = 0.0;
};

/// State after one EM pass.
struct PassRecord {
    int pass = 0;                 // 1-based
    double log_likelihood = 0.0;  // supervised data log-likelihood after the pass
    double validation_accuracy = -1.0;  // -1 when no validation set is tracked
};

struct TrainHistory {
    std::vector<PassRecord> passes;
};

struct TrainResult {
    SharedKernelModel model;       // parameters after the final pass
    SharedKernelModel best_model;  // highest validation accuracy (earliest on ties);
                                   // same as model when nothing was tracked
    int best_pass = 0;             // 1-based; 0 when nothing was tracked
    TrainHistory history;
};

/// K initial means with entries drawn i.i.d. uniform on [low, high).
/// The draw sequence is fixed across platforms: raw mt19937_64 output
/// mapped to doubles directly, no library distribution objects.
Matrix draw_initial_means(int num_components, int dim, double low, double high,
                          std::uint64_t seed);

/// Components with the given means (one row each) and sigma^2 I covariance.
std::vector<GaussianComponent> components_from_means(const Matrix& means, double sigma);

/// Freshly initialized model for the dataset per the config; the means
/// come from derive_seed(config.seed, config.seed_stream).
SharedKernelModel initial_model(const LabeledDataset& data, const TrainConfig& config);

/// Posterior responsibilities under the sample's own class:
/// w_nk = pi_{c_n,k} N{x_n; mu_k, P_k} / sum_k' pi_{c_n,k'} N{x_n; mu_k', P_k'}.
/// Throws SkemError if any sample has vanishing density under every component.
ResponsibilityMatrix e_step(const SharedKernelModel& model, const LabeledDataset& data);

/// Re-estimated class-conditional weights: pi_jk = (1/l_j) sum_{n in Gamma_j} w_nk.
Matrix update_weights(const ResponsibilityMatrix& resp, const LabeledDataset& data);

/// Re-estimated kernel means (row k = mu_k), weighted over all samples
/// regardless of class. Throws SkemError when a component's total
/// responsibility falls below 1e-10 * N (a dead component).
Matrix update_means(const ResponsibilityMatrix& resp, const Matrix& features);

/// Re-estimated kernel covariances about the given (current-pass) means.
std::vector<Matrix> update_covariances(const ResponsibilityMatrix& resp,
                                       const Matrix& features, const Matrix& means);

/// Single pooled covariance (1/N) sum_k sum_n w_nk (x_n - mu_k)(x_n - mu_k)^T,
/// shared by every component in the discriminant-analysis variant.
Matrix pooled_covariance(const ResponsibilityMatrix& resp, const Matrix& features,
                         const Matrix& means);

/// Supervised data log-likelihood sum_n log p(x_n | c_n, Theta).
double incomplete_log_likelihood(const SharedKernelModel& model, const LabeledDataset& data);

/// Unsupervised counterpart for a plain mixture.
double incomplete_log_likelihood(const MixtureModel& model, const Matrix& features);

/// Expected complete-data log-likelihood Q(Theta; Theta_ref) in simplified
/// form: responsibilities from Theta_ref, then
/// sum_j sum_{n in Gamma_j} sum_k w_nk (log pi_jk + log N{x_n; mu_k, P_k}).
double q_function(const SharedKernelModel& model, const SharedKernelModel& ref_model,
                  const LabeledDataset& data);

/// The same expectation evaluated from its definition: full enumeration of
/// all K^N component assignments, sum_Z Pr(Z | X, C, Theta_ref) log p(X, Z | C, Theta).
/// Compensated (Kahan) summation; densities via explicit inverse and
/// determinant rather than the cached factorizations. Throws SkemError
/// when K^N exceeds 10^6.
double q_bruteforce(const SharedKernelModel& model, const SharedKernelModel& ref_model,
                    const LabeledDataset& data);

/// Steppable supervised EM, so callers can watch per-pass trajectories.
class SkemTrainer {
public:
    SkemTrainer(LabeledDataset data, TrainConfig config);

    const SharedKernelModel& model() const { return model_; }
    const TrainConfig& config() const { return config_; }
    int passes_done() const { return pass_; }

    /// One full EM pass (E-step + weight/mean/covariance updates).
    /// Records the data log-likelihood, and validation accuracy when a
    /// validation set is supplied.
    PassRecord step(const LabeledDataset* validation = nullptr);

    /// Runs the configured number of passes and packages the result.
    TrainResult run(const LabeledDataset* validation = nullptr);

private:
    LabeledDataset data_;
    TrainConfig config_;
    SharedKernelModel model_;
    int pass_ = 0;
};

/// One-call wrapper around SkemTrainer::run.
TrainResult train_skem(const LabeledDataset& data, const TrainConfig& config,
                       const LabeledDataset* validation = nullptr);

/// Classic unsupervised EM on a plain Gaussian mixture, written as
/// straightforward per-sample loops. Serves as the reference point the
/// shared-kernel trainer must reproduce when there is only one class.
class StandardEmTrainer {
public:
    StandardEmTrainer(Matrix features, TrainConfig config);

    const MixtureModel& model() const { return model_; }
    int passes_done() const { return pass_; }

    /// One EM pass; returns the data log-likelihood after it.
    double step();

private:
    Matrix features_;
    TrainConfig config_;
    MixtureModel model_;
    int pass_ = 0;
};

/// Runs standard EM for the configured passes; returns the final mixture
/// and the per-pass log-likelihood trace.
std::pair<MixtureModel, std::vector<double>> train_standard_em(const Matrix& features,
                                                               const TrainConfig& config);

}  // namespace skem
