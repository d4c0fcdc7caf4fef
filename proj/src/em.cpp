#include "skem/em.hpp"

#include "skem/classifier.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <random>
#include <utility>

namespace skem {

namespace {

constexpr double kLn2Pi = 1.8378770664093453;

// Raw engine output mapped to [0,1) directly; no library distribution
// objects, so the draw sequence is identical on every platform.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Kahan compensated accumulator for the long enumeration sums.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

// N x K matrix of log pi_{c_n,k} + log N{x_n; mu_k, P_k}: each sample's
// unnormalized log-responsibilities under its own class.
Matrix labeled_scores(const SharedKernelModel& model, const LabeledDataset& data) {
    Matrix scores = component_log_densities(model, data.features());
    const Matrix log_weights = model.weights().array().log();
    for (int n = 0; n < data.size(); ++n) {
        scores.row(n) += log_weights.row(data.label(n));
    }
    return scores;
}

// Total responsibility mass per component, with the dead-component check.
Vector responsibility_mass(const ResponsibilityMatrix& resp) {
    Vector mass = resp.values().colwise().sum();
    const double floor = 1e-10 * static_cast<double>(resp.num_samples());
    for (Eigen::Index k = 0; k < mass.size(); ++k) {
        if (mass[k] < floor) {
            throw SkemError("component " + std::to_string(k) +
                            " starved of responsibility (mass " +
                            std::to_string(mass[k]) + "); reseed or lower K");
        }
    }
    return mass;
}

// Log-density via explicit inverse and determinant; the deliberately
// independent evaluation path used by the enumeration check.
double dense_log_density(const Vector& x, const Vector& mean, const Matrix& cov) {
    const Matrix inv = cov.inverse();
    const double det = cov.determinant();
    const Vector d = x - mean;
    return -0.5 * (static_cast<double>(x.size()) * kLn2Pi + std::log(det) +
                   d.dot(inv * d));
}

}  // namespace

Matrix draw_initial_means(int num_components, int dim, double low, double high,
                          std::uint64_t seed) {
    if (num_components < 1 || dim < 1) {
        throw std::invalid_argument("draw_initial_means: need K >= 1 and M >= 1");
    }
    if (!(low < high)) {
        throw std::invalid_argument("draw_initial_means: need low < high");
    }
    std::mt19937_64 rng(seed);
    Matrix means(num_components, dim);
    for (int k = 0; k < num_components; ++k) {
        for (int d = 0; d < dim; ++d) {
            means(k, d) = low + uniform01(rng) * (high - low);
        }
    }
    return means;
}

std::vector<GaussianComponent> components_from_means(const Matrix& means, double sigma) {
    if (sigma <= 0.0) {
        throw std::invalid_argument("components_from_means: sigma must be positive");
    }
    std::vector<GaussianComponent> components;
    components.reserve(static_cast<std::size_t>(means.rows()));
    const Matrix cov = sigma * sigma * Matrix::Identity(means.cols(), means.cols());
    for (Eigen::Index k = 0; k < means.rows(); ++k) {
        components.emplace_back(means.row(k).transpose(), cov);
    }
    return components;
}

SharedKernelModel initial_model(const LabeledDataset& data, const TrainConfig& config) {
    if (config.num_components < 1) {
        throw std::invalid_argument("initial_model: need at least one component");
    }
    data.require_all_classes_nonempty();
    const Matrix means =
        draw_initial_means(config.num_components, data.dim(), config.init_low,
                           config.init_high, derive_seed(config.seed, config.seed_stream));
    Matrix weights = Matrix::Constant(data.num_classes(), config.num_components,
                                      1.0 / config.num_components);
    return SharedKernelModel(components_from_means(means, config.init_sigma),
                             std::move(weights));
}

ResponsibilityMatrix e_step(const SharedKernelModel& model, const LabeledDataset& data) {
    Matrix scores = labeled_scores(model, data);
    for (int n = 0; n < data.size(); ++n) {
        const double lse = log_sum_exp(scores.row(n).transpose());
        if (!std::isfinite(lse)) {
            throw SkemError("sample " + std::to_string(n) +
                            " has vanishing density under every component");
        }
        scores.row(n) = (scores.row(n).array() - lse).exp().matrix();
    }
    return ResponsibilityMatrix(std::move(scores));
}

Matrix update_weights(const ResponsibilityMatrix& resp, const LabeledDataset& data) {
    if (resp.num_samples() != data.size()) {
        throw std::invalid_argument("update_weights: responsibility/sample count mismatch");
    }
    data.require_all_classes_nonempty();
    Matrix weights(data.num_classes(), resp.num_components());
    for (int j = 0; j < data.num_classes(); ++j) {
        const auto& members = data.class_index_set(j);
        Vector sum = Vector::Zero(resp.num_components());
        for (int n : members) {
            sum += resp.values().row(n).transpose();
        }
        weights.row(j) = sum.transpose() / static_cast<double>(members.size());
    }
    return weights;
}

Matrix update_means(const ResponsibilityMatrix& resp, const Matrix& features) {
    if (resp.num_samples() != features.rows()) {
        throw std::invalid_argument("update_means: responsibility/sample count mismatch");
    }
    const Vector mass = responsibility_mass(resp);
    Matrix means = resp.values().transpose() * features;  // K x M
    means.array().colwise() /= mass.array();
    return means;
}

std::vector<Matrix> update_covariances(const ResponsibilityMatrix& resp,
                                       const Matrix& features, const Matrix& means) {
    if (means.rows() != resp.num_components() || means.cols() != features.cols()) {
        throw std::invalid_argument("update_covariances: means shape mismatch");
    }
    const Vector mass = responsibility_mass(resp);
    std::vector<Matrix> covs;
    covs.reserve(static_cast<std::size_t>(resp.num_components()));
    for (int k = 0; k < resp.num_components(); ++k) {
        Matrix centered = features.rowwise() - means.row(k);
        Matrix weighted =
            (centered.array().colwise() * resp.values().col(k).array()).matrix();
        Matrix p = (centered.transpose() * weighted) / mass[k];
        covs.push_back(((p + p.transpose()) * 0.5).eval());
    }
    return covs;
}

Matrix pooled_covariance(const ResponsibilityMatrix& resp, const Matrix& features,
                         const Matrix& means) {
    if (means.rows() != resp.num_components() || means.cols() != features.cols()) {
        throw std::invalid_argument("pooled_covariance: means shape mismatch");
    }
    responsibility_mass(resp);  // same starvation guard as the per-component path
    Matrix pooled = Matrix::Zero(features.cols(), features.cols());
    for (int k = 0; k < resp.num_components(); ++k) {
        Matrix centered = features.rowwise() - means.row(k);
        Matrix weighted =
            (centered.array().colwise() * resp.values().col(k).array()).matrix();
        pooled += centered.transpose() * weighted;
    }
    pooled /= static_cast<double>(resp.num_samples());
    return ((pooled + pooled.transpose()) * 0.5).eval();
}

double incomplete_log_likelihood(const SharedKernelModel& model,
                                 const LabeledDataset& data) {
    const Matrix scores = labeled_scores(model, data);
    double total = 0.0;
    for (int n = 0; n < data.size(); ++n) {
        total += log_sum_exp(scores.row(n).transpose());
    }
    return total;
}

double incomplete_log_likelihood(const MixtureModel& model, const Matrix& features) {
    double total = 0.0;
    for (Eigen::Index n = 0; n < features.rows(); ++n) {
        total += mixture_log_density(features.row(n).transpose(), model);
    }
    return total;
}

double q_function(const SharedKernelModel& model, const SharedKernelModel& ref_model,
                  const LabeledDataset& data) {
    const ResponsibilityMatrix resp = e_step(ref_model, data);
    const Matrix log_dens = component_log_densities(model, data.features());
    const Matrix log_weights = model.weights().array().log();
    double total = 0.0;
    for (int n = 0; n < data.size(); ++n) {
        const int j = data.label(n);
        for (int k = 0; k < model.num_components(); ++k) {
            const double w = resp.values()(n, k);
            if (w <= 0.0) {
                continue;  // 0 * log 0 contributes nothing
            }
            total += w * (log_weights(j, k) + log_dens(n, k));
        }
    }
    return total;
}

double q_bruteforce(const SharedKernelModel& model, const SharedKernelModel& ref_model,
                    const LabeledDataset& data) {
    const int n_samples = data.size();
    const int k = model.num_components();
    if (ref_model.num_components() != k || ref_model.dim() != model.dim() ||
        ref_model.num_classes() != model.num_classes()) {
        throw std::invalid_argument("q_bruteforce: model shapes differ");
    }
    double combos = 1.0;
    for (int n = 0; n < n_samples; ++n) {
        combos *= k;
        if (combos > 1e6) {
            throw SkemError("q_bruteforce: K^N exceeds 1e6 assignments");
        }
    }

    // Per-sample, per-component terms under both parameter sets, all through
    // the dense inverse/determinant path.
    Matrix ref_scores(n_samples, k);  // log pi0 + log N0
    Matrix new_scores(n_samples, k);  // log pi  + log N
    for (int n = 0; n < n_samples; ++n) {
        const Vector x = data.features().row(n).transpose();
        const int j = data.label(n);
        for (int i = 0; i < k; ++i) {
            ref_scores(n, i) =
                std::log(ref_model.weights()(j, i)) +
                dense_log_density(x, ref_model.component(i).mean(),
                                  ref_model.component(i).covariance());
            new_scores(n, i) = std::log(model.weights()(j, i)) +
                               dense_log_density(x, model.component(i).mean(),
                                                 model.component(i).covariance());
        }
    }
    // Posterior over a sample's own assignment factorizes, so the posterior
    // of a full assignment vector is the product of per-sample terms.
    Matrix ref_post(n_samples, k);
    for (int n = 0; n < n_samples; ++n) {
        const double lse = log_sum_exp(ref_scores.row(n).transpose());
        ref_post.row(n) = (ref_scores.row(n).array() - lse).exp().matrix();
    }

    std::vector<int> assign(static_cast<std::size_t>(n_samples), 0);
    KahanSum total;
    while (true) {
        double prob = 1.0;
        double log_joint = 0.0;
        for (int n = 0; n < n_samples; ++n) {
            prob *= ref_post(n, assign[n]);
            log_joint += new_scores(n, assign[n]);
        }
        if (prob > 0.0) {
            total.add(prob * log_joint);
        }
        // Odometer over assignments, last sample fastest.
        int pos = n_samples - 1;
        while (pos >= 0 && ++assign[pos] == k) {
            assign[pos] = 0;
            --pos;
        }
        if (pos < 0) {
            break;
        }
    }
    return total.sum;
}

SkemTrainer::SkemTrainer(LabeledDataset data, TrainConfig config)
    : data_(std::move(data)),
      config_(std::move(config)),
      model_(initial_model(data_, config_)) {}

PassRecord SkemTrainer::step(const LabeledDataset* validation) {
    try {
        const ResponsibilityMatrix resp = e_step(model_, data_);
        Matrix weights = update_weights(resp, data_);
        if (config_.min_weight > 0.0) {
            weights = weights.cwiseMax(config_.min_weight);
            const Vector row_sums = weights.rowwise().sum();
            weights.array().colwise() /= row_sums.array();
        }
        const Matrix means = update_means(resp, data_.features());

        std::vector<GaussianComponent> components;
        components.reserve(static_cast<std::size_t>(config_.num_components));
        if (config_.pooled_covariance) {
            const Matrix pooled = pooled_covariance(resp, data_.features(), means);
            for (Eigen::Index i = 0; i < means.rows(); ++i) {
                components.emplace_back(means.row(i).transpose(), pooled);
            }
        } else {
            auto covs = update_covariances(resp, data_.features(), means);
            for (Eigen::Index i = 0; i < means.rows(); ++i) {
                components.emplace_back(means.row(i).transpose(), std::move(covs[i]));
            }
        }
        model_ = SharedKernelModel(std::move(components), std::move(weights));
    } catch (const SkemError& e) {
        throw SkemError("pass " + std::to_string(pass_ + 1) + ": " + e.what());
    }

    PassRecord record;
    record.pass = ++pass_;
    record.log_likelihood = incomplete_log_likelihood(model_, data_);
    if (validation != nullptr) {
        record.validation_accuracy = evaluate(model_, *validation).second;
    }
    return record;
}

TrainResult SkemTrainer::run(const LabeledDataset* validation) {
    TrainHistory history;
    history.passes.reserve(static_cast<std::size_t>(config_.passes));
    SharedKernelModel best = model_;
    int best_pass = 0;
    double best_accuracy = -1.0;
    double previous_ll = 0.0;
    for (int p = 0; p < config_.passes; ++p) {
        const PassRecord record = step(validation);
        history.passes.push_back(record);
        if (validation != nullptr && record.validation_accuracy > best_accuracy) {
            best_accuracy = record.validation_accuracy;
            best_pass = record.pass;
            best = model_;
        }
        if (config_.early_stop_rel_improvement > 0.0 && p > 0) {
            const double gain = record.log_likelihood - previous_ll;
            if (gain <= config_.early_stop_rel_improvement * std::abs(previous_ll)) {
                break;
            }
        }
        previous_ll = record.log_likelihood;
    }
    if (validation == nullptr) {
        return TrainResult{model_, model_, 0, std::move(history)};
    }
    return TrainResult{model_, std::move(best), best_pass, std::move(history)};
}

TrainResult train_skem(const LabeledDataset& data, const TrainConfig& config,
                       const LabeledDataset* validation) {
    SkemTrainer trainer(data, config);
    return trainer.run(validation);
}

StandardEmTrainer::StandardEmTrainer(Matrix features, TrainConfig config)
    : features_(std::move(features)), config_(std::move(config)) {
    if (features_.rows() == 0) {
        throw std::invalid_argument("StandardEmTrainer: empty data");
    }
    const Matrix means = draw_initial_means(
        config_.num_components, static_cast<int>(features_.cols()), config_.init_low,
        config_.init_high, derive_seed(config_.seed, config_.seed_stream));
    model_.components = components_from_means(means, config_.init_sigma);
    model_.weights =
        Vector::Constant(config_.num_components, 1.0 / config_.num_components);
}

double StandardEmTrainer::step() {
    const int n_samples = static_cast<int>(features_.rows());
    const int k = config_.num_components;
    const int m = static_cast<int>(features_.cols());

    // Responsibilities, one sample at a time.
    Matrix resp(n_samples, k);
    for (int n = 0; n < n_samples; ++n) {
        const Vector x = features_.row(n).transpose();
        Vector scores(k);
        for (int i = 0; i < k; ++i) {
            scores[i] =
                std::log(model_.weights[i]) + gaussian_log_density(x, model_.components[i]);
        }
        const double lse = log_sum_exp(scores);
        if (!std::isfinite(lse)) {
            throw SkemError("sample " + std::to_string(n) +
                            " has vanishing density under every component");
        }
        resp.row(n) = (scores.array() - lse).exp().matrix().transpose();
    }

    Vector mass = Vector::Zero(k);
    for (int n = 0; n < n_samples; ++n) {
        mass += resp.row(n).transpose();
    }
    const double floor = 1e-10 * n_samples;
    for (int i = 0; i < k; ++i) {
        if (mass[i] < floor) {
            throw SkemError("component " + std::to_string(i) + " starved of responsibility");
        }
    }

    Matrix means = Matrix::Zero(k, m);
    for (int n = 0; n < n_samples; ++n) {
        for (int i = 0; i < k; ++i) {
            means.row(i) += resp(n, i) * features_.row(n);
        }
    }
    means.array().colwise() /= mass.array();

    std::vector<Matrix> covs(static_cast<std::size_t>(k), Matrix::Zero(m, m));
    for (int n = 0; n < n_samples; ++n) {
        for (int i = 0; i < k; ++i) {
            const Vector d = features_.row(n).transpose() - means.row(i).transpose();
            covs[static_cast<std::size_t>(i)] += resp(n, i) * (d * d.transpose());
        }
    }

    std::vector<GaussianComponent> components;
    components.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        components.emplace_back(means.row(i).transpose(),
                                covs[static_cast<std::size_t>(i)] / mass[i]);
    }
    model_.components = std::move(components);
    model_.weights = mass / static_cast<double>(n_samples);
    ++pass_;

    return incomplete_log_likelihood(model_, features_);
}

std::pair<MixtureModel, std::vector<double>> train_standard_em(const Matrix& features,
                                                               const TrainConfig& config) {
    StandardEmTrainer trainer(features, config);
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(config.passes));
    for (int p = 0; p < config.passes; ++p) {
        trace.push_back(trainer.step());
    }
    return {trainer.model(), std::move(trace)};
}

}  // namespace skem
