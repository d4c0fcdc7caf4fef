#include "skem/model.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace skem {

namespace {

constexpr double kLn2Pi = 1.8378770664093453;  // ln(2*pi)

}  // namespace

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
    if (v.size() == 0) {
        throw std::invalid_argument("log_sum_exp: empty input");
    }
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) {
        // All -inf (empty support) stays -inf; a NaN or +inf propagates.
        return m;
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        sum += std::exp(v[i] - m);
    }
    return m + std::log(sum);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // seed + golden * (stream + 1) is injective in stream, and splitmix64
    // is a bijection, so distinct streams can never collide for a fixed seed.
    return splitmix64(seed + 0x9E3779B97F4A7C15ull * (stream + 1));
}

GaussianComponent::GaussianComponent(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    const auto m = mean_.size();
    if (m == 0) {
        throw std::invalid_argument("GaussianComponent: empty mean");
    }
    if (covariance_.rows() != m || covariance_.cols() != m) {
        throw std::invalid_argument("GaussianComponent: covariance must be " +
                                    std::to_string(m) + "x" + std::to_string(m));
    }
    covariance_ = ((covariance_ + covariance_.transpose()) * 0.5).eval();

    // Factorize, repairing a marginally indefinite matrix with escalating
    // diagonal jitter scaled to the mean eigenvalue.
    const double scale = covariance_.trace() / static_cast<double>(m);
    double eps = 0.0;
    for (int attempt = 0; attempt <= 3; ++attempt) {
        Matrix trial = covariance_;
        if (attempt > 0) {
            eps = (attempt == 1) ? 1e-8 : eps * 10.0;
            trial.diagonal().array() += eps * scale;
        }
        Eigen::LLT<Matrix> llt(trial);
        if (llt.info() == Eigen::Success) {
            Matrix lower = llt.matrixL();
            // An exactly singular PSD matrix can slip through with zero
            // pivots; only accept strictly positive, finite ones.
            if (lower.allFinite() && (lower.diagonal().array() > 0.0).all()) {
                covariance_ = trial;
                chol_lower_ = std::move(lower);
                log_det_ = 2.0 * chol_lower_.diagonal().array().log().sum();
                factorized_ = true;
                return;
            }
        }
    }
    throw SkemError("covariance not positive definite after jitter repair");
}

GaussianComponent GaussianComponent::unvalidated(Vector mean, Matrix covariance) {
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
        throw std::invalid_argument("GaussianComponent: covariance shape mismatch");
    }
    GaussianComponent comp;
    comp.mean_ = std::move(mean);
    comp.covariance_ = std::move(covariance);
    return comp;
}

const Matrix& GaussianComponent::chol_lower() const {
    if (!factorized_) {
        throw SkemError("component was built unvalidated; no Cholesky factor");
    }
    return chol_lower_;
}

double GaussianComponent::log_det() const {
    if (!factorized_) {
        throw SkemError("component was built unvalidated; no Cholesky factor");
    }
    return log_det_;
}

double gaussian_log_density(const Vector& x, const GaussianComponent& comp) {
    if (x.size() != comp.dim()) {
        throw std::invalid_argument("gaussian_log_density: dimension mismatch");
    }
    const Vector diff = x - comp.mean();
    const Vector y = comp.chol_lower().triangularView<Eigen::Lower>().solve(diff);
    return -0.5 * (comp.dim() * kLn2Pi + comp.log_det() + y.squaredNorm());
}

SharedKernelModel::SharedKernelModel(std::vector<GaussianComponent> components,
                                     Matrix weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
    if (components_.empty()) {
        throw std::invalid_argument("SharedKernelModel: no components");
    }
    dim_ = components_.front().dim();
    for (const auto& c : components_) {
        if (c.dim() != dim_) {
            throw std::invalid_argument("SharedKernelModel: mixed component dimensions");
        }
    }
    if (weights_.rows() < 1 ||
        weights_.cols() != static_cast<Eigen::Index>(components_.size())) {
        throw std::invalid_argument(
            "SharedKernelModel: weights must be num_classes x num_components");
    }
}

double class_conditional_log_density(const Vector& x, const SharedKernelModel& model,
                                     int class_index) {
    if (class_index < 0 || class_index >= model.num_classes()) {
        throw std::invalid_argument("class_conditional_log_density: bad class index");
    }
    const int k = model.num_components();
    Vector terms(k);
    for (int i = 0; i < k; ++i) {
        terms[i] = std::log(model.weights()(class_index, i)) +
                   gaussian_log_density(x, model.component(i));
    }
    return log_sum_exp(terms);
}

Matrix component_log_densities(const SharedKernelModel& model, const Matrix& features) {
    if (features.cols() != model.dim()) {
        throw std::invalid_argument("component_log_densities: dimension mismatch");
    }
    const auto n = features.rows();
    const int k = model.num_components();
    const int m = model.dim();
    Matrix out(n, k);
    for (int i = 0; i < k; ++i) {
        const auto& comp = model.component(i);
        Matrix centered = features.rowwise() - comp.mean().transpose();
        // One triangular solve for the whole batch: columns are samples.
        Matrix y = comp.chol_lower().triangularView<Eigen::Lower>().solve(
            centered.transpose());
        const double offset = -0.5 * (m * kLn2Pi + comp.log_det());
        out.col(i) = (-0.5 * y.colwise().squaredNorm().array() + offset).matrix().transpose();
    }
    return out;
}

std::optional<std::string> validate(const SharedKernelModel& model) {
    const auto& w = model.weights();
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
        if ((w.row(j).array() < -1e-12).any()) {
            return "negative mixing weight in class " + std::to_string(j);
        }
        const double s = w.row(j).sum();
        if (std::abs(s - 1.0) > 1e-8) {
            return "class " + std::to_string(j) + " weights sum to " + std::to_string(s);
        }
    }
    for (int i = 0; i < model.num_components(); ++i) {
        const auto& c = model.component(i);
        const Matrix& p = c.covariance();
        if (!p.allFinite() || !c.mean().allFinite()) {
            return "component " + std::to_string(i) + " has non-finite parameters";
        }
        if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
            return "component " + std::to_string(i) + " covariance not symmetric";
        }
        if (c.factorized()) {
            continue;
        }
        Eigen::LLT<Matrix> llt(p);
        if (llt.info() != Eigen::Success) {
            return "component " + std::to_string(i) + " covariance not positive definite";
        }
    }
    return std::nullopt;
}

LabeledDataset::LabeledDataset(Matrix features, std::vector<int> labels, int num_classes,
                               std::vector<std::string> label_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      label_names_(std::move(label_names)) {
    if (static_cast<Eigen::Index>(labels_.size()) != features_.rows()) {
        throw std::invalid_argument("LabeledDataset: one label per feature row required");
    }
    int max_label = -1;
    for (int y : labels_) {
        if (y < 0) {
            throw std::invalid_argument("LabeledDataset: negative label");
        }
        max_label = std::max(max_label, y);
    }
    num_classes_ = (num_classes > 0) ? num_classes : max_label + 1;
    if (max_label >= num_classes_) {
        throw std::invalid_argument("LabeledDataset: label outside 0..L-1");
    }
    if (num_classes_ <= 0) {
        throw std::invalid_argument("LabeledDataset: empty dataset needs explicit class count");
    }
    if (!label_names_.empty() &&
        static_cast<int>(label_names_.size()) != num_classes_) {
        throw std::invalid_argument("LabeledDataset: label_names size != class count");
    }
    class_index_sets_.resize(num_classes_);
    for (int n = 0; n < size(); ++n) {
        class_index_sets_[labels_[n]].push_back(n);
    }
}

LabeledDataset LabeledDataset::slice_columns(const std::vector<int>& columns) const {
    if (columns.empty()) {
        throw std::invalid_argument("slice_columns: empty column set");
    }
    Matrix sliced(features_.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] < 0 || columns[j] >= dim()) {
            throw std::invalid_argument("slice_columns: column out of range");
        }
        sliced.col(static_cast<Eigen::Index>(j)) = features_.col(columns[j]);
    }
    return LabeledDataset(std::move(sliced), labels_, num_classes_, label_names_);
}

LabeledDataset LabeledDataset::subset(const std::vector<int>& rows) const {
    Matrix picked(static_cast<Eigen::Index>(rows.size()), features_.cols());
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= size()) {
            throw std::invalid_argument("subset: row out of range");
        }
        picked.row(static_cast<Eigen::Index>(i)) = features_.row(rows[i]);
        labels.push_back(labels_[rows[i]]);
    }
    return LabeledDataset(std::move(picked), std::move(labels), num_classes_, label_names_);
}

void LabeledDataset::require_all_classes_nonempty() const {
    for (int j = 0; j < num_classes_; ++j) {
        if (class_index_sets_[j].empty()) {
            throw SkemError("class " + std::to_string(j) + " has no samples");
        }
    }
}

ResponsibilityMatrix::ResponsibilityMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() == 0 || values_.cols() == 0) {
        throw std::invalid_argument("ResponsibilityMatrix: empty");
    }
    if ((values_.array() < -1e-12).any() || (values_.array() > 1.0 + 1e-12).any()) {
        throw std::invalid_argument("ResponsibilityMatrix: entry outside [0,1]");
    }
    if (((values_.rowwise().sum().array() - 1.0).abs() > 1e-10).any()) {
        throw std::invalid_argument("ResponsibilityMatrix: rows must sum to 1");
    }
}

double mixture_log_density(const Vector& x, const MixtureModel& model) {
    if (model.components.empty()) {
        throw std::invalid_argument("mixture_log_density: empty mixture");
    }
    Vector terms(model.num_components());
    for (int i = 0; i < model.num_components(); ++i) {
        terms[i] = std::log(model.weights[i]) + gaussian_log_density(x, model.components[i]);
    }
    return log_sum_exp(terms);
}

}  // namespace skem
