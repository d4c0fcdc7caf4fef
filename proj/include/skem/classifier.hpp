#pragma once

#include "skem/model.hpp"
#include "skem/partition.hpp"

#include <utility>
#include <vector>

namespace skem {

/// Row = true class, column = predicted class.
struct ConfusionMatrix {
    Eigen::MatrixXi counts;

    int num_classes() const { return static_cast<int>(counts.rows()); }
    long total() const { return counts.sum(); }
    double accuracy() const;  // trace / total
};

/// Per-class log-likelihoods log p(x | class j). Classes share a uniform
/// prior, so these are the full decision scores. The partitioned overload
/// sums the blocks' log-densities (blocks independent given the class).
Vector class_scores(const SharedKernelModel& model, const Vector& x);
Vector class_scores(const PartitionedModel& model, const Vector& x);

/// argmax of class_scores; ties go to the smallest class index.
/// Throws SkemError on NaN scores.
int classify(const SharedKernelModel& model, const Vector& x);
int classify(const PartitionedModel& model, const Vector& x);

/// Confusion matrix and mean accuracy over a labeled test set.
std::pair<ConfusionMatrix, double> evaluate(const SharedKernelModel& model,
                                            const LabeledDataset& test);
std::pair<ConfusionMatrix, double> evaluate(const PartitionedModel& model,
                                            const LabeledDataset& test);

/// Cross-validation settings. train.seed acts as the master seed; each
/// (trial, fold) run derives its own stream, and randomized fold
/// assignment derives a per-trial shuffle stream, so no run shares RNG
/// state with any other or with plain single-model training.
struct CvConfig {
    TrainConfig train;
    int folds = 10;
    bool randomize = false;  // contiguous chunks when false, seeded shuffle when true
    int trials = 1;
    int jobs = 1;
    bool standardize = false;  // per fold: fit z-scoring on the training split,
                               // apply to both splits
    int num_blocks = 1;        // >1 trains the partitioned variant
    PartitionScheme scheme = PartitionScheme::sequential;
};

/// Seed stream tags for cross-validation (see CvConfig).
inline constexpr std::uint64_t kCvRunStream = std::uint64_t{1} << 33;
inline constexpr std::uint64_t kCvShuffleStream = std::uint64_t{1} << 34;

struct CvFoldResult {
    int trial = 0;  // 0-based
    int fold = 0;   // 0-based
    int best_pass = 0;
    double accuracy = 0.0;  // held-out accuracy of the retained (best) pass
};

/// Aggregates over folds x trials. std_accuracy is the sample (n-1)
/// standard deviation of the per-fold accuracies.
struct CvReport {
    std::vector<CvFoldResult> folds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

/// F-fold cross-validation, optionally repeated over trials. Each fold
/// trains on the remaining folds with the held-out fold as validation and
/// keeps the pass with the best held-out accuracy. Folds are contiguous
/// equal-size chunks (remainder spread over the leading folds) or a
/// seeded permutation of the samples when randomize is set. Throws
/// SkemError when a fold's training split loses a class entirely.
CvReport cross_validate(const LabeledDataset& data, const CvConfig& config);

/// Fold assignment used by cross_validate, exposed for inspection:
/// fold_of[n] = fold index of sample n for the given trial.
std::vector<int> fold_assignment(int num_samples, int folds, bool randomize,
                                 std::uint64_t seed, int trial);

/// Proportion of supra-threshold (class, component) weight entries that
/// belong to components claimed by more than one class. A = (pi_jk >= tau);
/// a_k = number of classes using component k; N_T = sum_k a_k;
/// N_S = sum over shared components (a_k > 1) of a_k; result N_S / N_T.
/// Throws SkemError("degenerate weight matrix") when N_T = 0.
double shared_proportion(const Matrix& weights, double threshold = 0.01);
double shared_proportion(const SharedKernelModel& model, double threshold = 0.01);
/// Partitioned form: N_S and N_T are summed across blocks before dividing.
double shared_proportion(const PartitionedModel& model, double threshold = 0.01);

}  // namespace skem
