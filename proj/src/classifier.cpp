#include "skem/classifier.hpp"

#include "skem/preprocess.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <utility>

namespace skem {

namespace {

// N x L matrix of log p(x_n | class j), shared by the evaluate overloads.
Matrix score_matrix(const SharedKernelModel& model, const Matrix& features) {
    const Matrix dens = component_log_densities(model, features);
    const Matrix log_weights = model.weights().array().log();
    Matrix scores(features.rows(), model.num_classes());
    Vector terms(model.num_components());
    for (Eigen::Index n = 0; n < features.rows(); ++n) {
        for (int j = 0; j < model.num_classes(); ++j) {
            terms = (dens.row(n) + log_weights.row(j)).transpose();
            scores(n, j) = log_sum_exp(terms);
        }
    }
    return scores;
}

Matrix sliced_columns(const Matrix& features, const std::vector<int>& columns) {
    Matrix out(features.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out.col(static_cast<Eigen::Index>(i)) = features.col(columns[i]);
    }
    return out;
}

Matrix score_matrix(const PartitionedModel& model, const Matrix& features) {
    Matrix scores = Matrix::Zero(features.rows(), model.num_classes());
    for (int r = 0; r < model.num_blocks(); ++r) {
        const auto& cols = model.partition().blocks[static_cast<std::size_t>(r)];
        scores += score_matrix(model.block(r), sliced_columns(features, cols));
    }
    return scores;
}

int argmax_class(const Eigen::Ref<const Vector>& scores) {
    int best = 0;
    for (int j = 0; j < scores.size(); ++j) {
        if (std::isnan(scores[j])) {
            throw SkemError("classify: NaN class score");
        }
        if (scores[j] > scores[best]) {
            best = j;
        }
    }
    return best;
}

std::pair<ConfusionMatrix, double> evaluate_scores(const Matrix& scores,
                                                   const LabeledDataset& test) {
    const int l = test.num_classes();
    if (scores.cols() < l) {
        throw std::invalid_argument("evaluate: test labels outside the model's classes");
    }
    ConfusionMatrix confusion;
    confusion.counts = Eigen::MatrixXi::Zero(scores.cols(), scores.cols());
    for (int n = 0; n < test.size(); ++n) {
        const int predicted = argmax_class(scores.row(n).transpose());
        confusion.counts(test.label(n), predicted) += 1;
    }
    const double accuracy = confusion.accuracy();
    return {std::move(confusion), accuracy};
}

}  // namespace

double ConfusionMatrix::accuracy() const {
    const long n = total();
    if (n == 0) {
        return 0.0;
    }
    return static_cast<double>(counts.diagonal().sum()) / static_cast<double>(n);
}

Vector class_scores(const SharedKernelModel& model, const Vector& x) {
    Vector dens(model.num_components());
    for (int i = 0; i < model.num_components(); ++i) {
        dens[i] = gaussian_log_density(x, model.component(i));
    }
    const Matrix log_weights = model.weights().array().log();
    Vector scores(model.num_classes());
    for (int j = 0; j < model.num_classes(); ++j) {
        scores[j] = log_sum_exp((dens + log_weights.row(j).transpose()).eval());
    }
    return scores;
}

Vector class_scores(const PartitionedModel& model, const Vector& x) {
    if (x.size() != model.dim()) {
        throw std::invalid_argument("class_scores: dimension mismatch");
    }
    Vector scores = Vector::Zero(model.num_classes());
    for (int r = 0; r < model.num_blocks(); ++r) {
        const auto& cols = model.partition().blocks[static_cast<std::size_t>(r)];
        Vector slice(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i) {
            slice[static_cast<Eigen::Index>(i)] = x[cols[i]];
        }
        scores += class_scores(model.block(r), slice);
    }
    return scores;
}

int classify(const SharedKernelModel& model, const Vector& x) {
    return argmax_class(class_scores(model, x));
}

int classify(const PartitionedModel& model, const Vector& x) {
    return argmax_class(class_scores(model, x));
}

std::pair<ConfusionMatrix, double> evaluate(const SharedKernelModel& model,
                                            const LabeledDataset& test) {
    if (test.size() == 0) {
        throw std::invalid_argument("evaluate: empty test set");
    }
    return evaluate_scores(score_matrix(model, test.features()), test);
}

std::pair<ConfusionMatrix, double> evaluate(const PartitionedModel& model,
                                            const LabeledDataset& test) {
    if (test.size() == 0) {
        throw std::invalid_argument("evaluate: empty test set");
    }
    if (test.dim() != model.dim()) {
        throw std::invalid_argument("evaluate: dimension mismatch");
    }
    return evaluate_scores(score_matrix(model, test.features()), test);
}

std::vector<int> fold_assignment(int num_samples, int folds, bool randomize,
                                 std::uint64_t seed, int trial) {
    if (folds < 2 || num_samples < folds) {
        throw std::invalid_argument("fold_assignment: need 2 <= folds <= samples");
    }
    std::vector<int> order(static_cast<std::size_t>(num_samples));
    std::iota(order.begin(), order.end(), 0);
    if (randomize) {
        std::mt19937_64 rng(
            derive_seed(seed, kCvShuffleStream + static_cast<std::uint64_t>(trial)));
        for (int i = num_samples - 1; i > 0; --i) {
            const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(j)]);
        }
    }
    const int base = num_samples / folds;
    const int extra = num_samples % folds;
    std::vector<int> fold_of(static_cast<std::size_t>(num_samples), 0);
    int pos = 0;
    for (int f = 0; f < folds; ++f) {
        const int size = base + (f < extra ? 1 : 0);
        for (int i = 0; i < size; ++i) {
            fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos++)])] = f;
        }
    }
    return fold_of;
}

namespace {

CvFoldResult run_cv_cell(const LabeledDataset& data, const CvConfig& config, int trial,
                         int fold) {
    const std::vector<int> fold_of = fold_assignment(
        data.size(), config.folds, config.randomize, config.train.seed, trial);
    std::vector<int> train_rows;
    std::vector<int> test_rows;
    for (int n = 0; n < data.size(); ++n) {
        (fold_of[static_cast<std::size_t>(n)] == fold ? test_rows : train_rows)
            .push_back(n);
    }
    LabeledDataset train = data.subset(train_rows);
    LabeledDataset test = data.subset(test_rows);
    for (int j = 0; j < train.num_classes(); ++j) {
        if (train.class_count(j) == 0) {
            throw SkemError("fold " + std::to_string(fold) + " of trial " +
                            std::to_string(trial) + " leaves class " + std::to_string(j) +
                            " without training samples");
        }
    }
    if (config.standardize) {
        const StandardizeTransform transform = StandardizeTransform::fit(train.features());
        train = LabeledDataset(transform.apply(train.features()), train.labels(),
                               train.num_classes(), train.label_names());
        test = LabeledDataset(transform.apply(test.features()), test.labels(),
                              test.num_classes(), test.label_names());
    }

    TrainConfig cell_config = config.train;
    cell_config.seed = derive_seed(
        config.train.seed,
        kCvRunStream + static_cast<std::uint64_t>(trial) *
                           static_cast<std::uint64_t>(config.folds) +
            static_cast<std::uint64_t>(fold));

    CvFoldResult result;
    result.trial = trial;
    result.fold = fold;
    if (config.num_blocks > 1) {
        PartitionTrainConfig pconfig{cell_config, config.num_blocks, config.scheme};
        const PartitionedTrainResult trained = train_pskem(train, pconfig, &test);
        result.best_pass = trained.best_pass;
        result.accuracy =
            trained.validation_accuracy[static_cast<std::size_t>(trained.best_pass - 1)];
    } else {
        const TrainResult trained = train_skem(train, cell_config, &test);
        result.best_pass = trained.best_pass;
        result.accuracy = trained.history.passes[static_cast<std::size_t>(trained.best_pass - 1)]
                              .validation_accuracy;
    }
    return result;
}

}  // namespace

CvReport cross_validate(const LabeledDataset& data, const CvConfig& config) {
    if (config.trials < 1) {
        throw std::invalid_argument("cross_validate: trials must be positive");
    }
    fold_assignment(data.size(), config.folds, false, 0, 0);  // validates sizes up front

    const int cells = config.trials * config.folds;
    std::vector<CvFoldResult> results(static_cast<std::size_t>(cells));
    const int jobs = std::max(1, std::min(config.jobs, cells));

    if (jobs == 1) {
        for (int c = 0; c < cells; ++c) {
            results[static_cast<std::size_t>(c)] =
                run_cv_cell(data, config, c / config.folds, c % config.folds);
        }
    } else {
        // Workers pull cell indices; each result lands in its own slot, so
        // the report is identical no matter how the work interleaves.
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&]() {
            while (true) {
                const int c = next.fetch_add(1);
                if (c >= cells) {
                    return;
                }
                try {
                    results[static_cast<std::size_t>(c)] =
                        run_cv_cell(data, config, c / config.folds, c % config.folds);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next.store(cells);
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    CvReport report;
    report.folds = std::move(results);
    double sum = 0.0;
    for (const auto& r : report.folds) {
        sum += r.accuracy;
    }
    report.mean_accuracy = sum / static_cast<double>(cells);
    double ss = 0.0;
    for (const auto& r : report.folds) {
        const double d = r.accuracy - report.mean_accuracy;
        ss += d * d;
    }
    report.std_accuracy = (cells > 1) ? std::sqrt(ss / static_cast<double>(cells - 1)) : 0.0;
    return report;
}

namespace {

// Counts for one weight matrix: how many supra-threshold entries there
// are in total (N_T) and how many sit in components claimed by more than
// one class (N_S).
std::pair<long, long> sharing_counts(const Matrix& weights, double threshold) {
    long n_t = 0;
    long n_s = 0;
    for (Eigen::Index k = 0; k < weights.cols(); ++k) {
        long classes_using = 0;
        for (Eigen::Index j = 0; j < weights.rows(); ++j) {
            if (weights(j, k) >= threshold) {
                ++classes_using;
            }
        }
        n_t += classes_using;
        if (classes_using > 1) {
            n_s += classes_using;
        }
    }
    return {n_s, n_t};
}

}  // namespace

double shared_proportion(const Matrix& weights, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("shared_proportion: threshold must be in (0,1]");
    }
    const auto [n_s, n_t] = sharing_counts(weights, threshold);
    if (n_t == 0) {
        throw SkemError("degenerate weight matrix: no component above threshold");
    }
    return static_cast<double>(n_s) / static_cast<double>(n_t);
}

double shared_proportion(const SharedKernelModel& model, double threshold) {
    return shared_proportion(model.weights(), threshold);
}

double shared_proportion(const PartitionedModel& model, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("shared_proportion: threshold must be in (0,1]");
    }
    long n_s = 0;
    long n_t = 0;
    for (int r = 0; r < model.num_blocks(); ++r) {
        const auto [s, t] = sharing_counts(model.block(r).weights(), threshold);
        n_s += s;
        n_t += t;
    }
    if (n_t == 0) {
        throw SkemError("degenerate weight matrix: no component above threshold");
    }
    return static_cast<double>(n_s) / static_cast<double>(n_t);
}

}  // namespace skem
