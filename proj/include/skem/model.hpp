#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace skem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Domain failure (degenerate data, enumeration caps, bad files, ...).
/// Dimension/precondition violations throw std::invalid_argument instead.
class SkemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerically stable log(sum(exp(v))) with max-subtraction.
/// Returns -inf for an all -inf input.
double log_sum_exp(const Eigen::Ref<const Vector>& v);

/// splitmix64 finalizer; the basis of all sub-seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent seed for a sub-stream of a master seed.
/// Stream assignment is part of the reproducibility contract:
/// single-model training draws from stream 0, partitioned block r from
/// stream r, cross-validation from documented per-(trial, fold) tags.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Single Gaussian kernel: mean, covariance and a cached Cholesky factor.
///
/// Construction symmetrizes the covariance and factorizes it. If the
/// factorization fails, jitter eps*trace(P)/M * I is added with
/// eps = 1e-8, escalating tenfold up to 3 retries before giving up.
/// Instances are immutable afterwards, so the cache never goes stale.
class GaussianComponent {
public:
    GaussianComponent(Vector mean, Matrix covariance);

    /// Builds a component without repair or factorization checks.
    /// For loaders and diagnostics; pair with validate().
    static GaussianComponent unvalidated(Vector mean, Matrix covariance);

    int dim() const { return static_cast<int>(mean_.size()); }
    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }

    bool factorized() const { return factorized_; }
    /// Lower-triangular Cholesky factor of the covariance.
    const Matrix& chol_lower() const;
    /// log det(covariance), from the cached factor.
    double log_det() const;

private:
    GaussianComponent() = default;

    Vector mean_;
    Matrix covariance_;
    Matrix chol_lower_;
    double log_det_ = 0.0;
    bool factorized_ = false;
};

/// log N{x; mu, P} = -1/2 (M ln 2pi + log det P + |L^-1 (x - mu)|^2).
/// Evaluated through the cached factor; never forms the density itself.
double gaussian_log_density(const Vector& x, const GaussianComponent& comp);

/// K Gaussian kernels shared across L classes, with class-conditioned
/// mixing weights. weights(j, k) = Pr(component k | class j); each row
/// of the L x K weight matrix is a probability vector.
class SharedKernelModel {
public:
    SharedKernelModel(std::vector<GaussianComponent> components, Matrix weights);

    int dim() const { return dim_; }
    int num_components() const { return static_cast<int>(components_.size()); }
    int num_classes() const { return static_cast<int>(weights_.rows()); }

    const std::vector<GaussianComponent>& components() const { return components_; }
    const GaussianComponent& component(int k) const { return components_.at(k); }
    const Matrix& weights() const { return weights_; }

private:
    std::vector<GaussianComponent> components_;
    Matrix weights_;  // L x K
    int dim_ = 0;
};

/// log p(x | class j) = log sum_k pi_jk N{x; mu_k, P_k}, class_index 0-based.
double class_conditional_log_density(const Vector& x, const SharedKernelModel& model,
                                     int class_index);

/// N x K matrix of log N{x_n; mu_k, P_k} for all samples at once.
Matrix component_log_densities(const SharedKernelModel& model, const Matrix& features);

/// Checks the model invariants (weight rows normalized and non-negative,
/// components positive definite, consistent dimensions). Returns the
/// first violation as a message, or nullopt when the model is sound.
std::optional<std::string> validate(const SharedKernelModel& model);

/// Labeled training/test data: N feature vectors in R^M with class
/// labels in 0..L-1 (0-based internally; 1-based only at I/O surfaces).
/// Per-class index sets are precomputed at construction.
class LabeledDataset {
public:
    /// num_classes = 0 infers L = max label + 1. Pass it explicitly for
    /// subsets that may be missing a class.
    LabeledDataset(Matrix features, std::vector<int> labels, int num_classes = 0,
                   std::vector<std::string> label_names = {});

    int size() const { return static_cast<int>(features_.rows()); }
    int dim() const { return static_cast<int>(features_.cols()); }
    int num_classes() const { return num_classes_; }

    const Matrix& features() const { return features_; }
    const std::vector<int>& labels() const { return labels_; }
    int label(int n) const { return labels_.at(n); }

    /// Index set of class j (the samples carrying that label).
    const std::vector<int>& class_index_set(int j) const { return class_index_sets_.at(j); }
    const std::vector<std::vector<int>>& class_index_sets() const { return class_index_sets_; }
    int class_count(int j) const { return static_cast<int>(class_index_sets_.at(j).size()); }

    /// Original label strings, when the data came from a labeled file.
    const std::vector<std::string>& label_names() const { return label_names_; }

    /// New dataset restricted to the given feature columns (0-based).
    LabeledDataset slice_columns(const std::vector<int>& columns) const;
    /// New dataset restricted to the given sample rows; L is preserved.
    LabeledDataset subset(const std::vector<int>& rows) const;

    /// Throws if any class has no samples (training precondition).
    void require_all_classes_nonempty() const;

private:
    Matrix features_;
    std::vector<int> labels_;
    int num_classes_ = 0;
    std::vector<std::vector<int>> class_index_sets_;
    std::vector<std::string> label_names_;
};

/// Posterior component responsibilities, one row per sample.
/// Rows sum to 1 (1e-10) and entries lie in [0, 1]; enforced here.
class ResponsibilityMatrix {
public:
    explicit ResponsibilityMatrix(Matrix values);

    int num_samples() const { return static_cast<int>(values_.rows()); }
    int num_components() const { return static_cast<int>(values_.cols()); }
    const Matrix& values() const { return values_; }

private:
    Matrix values_;
};

/// Plain unsupervised mixture, the baseline for the standard EM routine.
struct MixtureModel {
    std::vector<GaussianComponent> components;
    Vector weights;  // length K, sums to 1

    int dim() const { return components.empty() ? 0 : components.front().dim(); }
    int num_components() const { return static_cast<int>(components.size()); }
};

/// log sum_k pi_k N{x; mu_k, P_k} for the unsupervised mixture.
double mixture_log_density(const Vector& x, const MixtureModel& model);

}  // namespace skem
