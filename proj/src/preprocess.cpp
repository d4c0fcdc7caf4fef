#include "skem/preprocess.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace skem {

Matrix deskew(const Matrix& image) {
    const auto rows = image.rows();
    const auto cols = image.cols();
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("deskew: empty image");
    }
    const double total = image.sum();
    if (total <= 0.0) {
        throw SkemError("deskew: zero total intensity");
    }

    // Central moments up to order two; x runs along columns, y along rows.
    double xbar = 0.0;
    double ybar = 0.0;
    for (Eigen::Index y = 0; y < rows; ++y) {
        for (Eigen::Index x = 0; x < cols; ++x) {
            xbar += x * image(y, x);
            ybar += y * image(y, x);
        }
    }
    xbar /= total;
    ybar /= total;
    double mu11 = 0.0;
    double mu02 = 0.0;
    for (Eigen::Index y = 0; y < rows; ++y) {
        for (Eigen::Index x = 0; x < cols; ++x) {
            mu11 += (x - xbar) * (y - ybar) * image(y, x);
            mu02 += (y - ybar) * (y - ybar) * image(y, x);
        }
    }
    mu11 /= total;
    mu02 /= total;
    if (mu02 < 1e-12) {
        return image;  // no vertical spread, nothing to shear
    }
    const double alpha = mu11 / mu02;

    // Inverse-map each output pixel through x' = x - alpha (y - ybar):
    // the source column is x' + alpha (y - ybar), sampled linearly with
    // zero padding outside the frame.
    Matrix out = Matrix::Zero(rows, cols);
    for (Eigen::Index y = 0; y < rows; ++y) {
        const double shift = alpha * (static_cast<double>(y) - ybar);
        for (Eigen::Index x = 0; x < cols; ++x) {
            const double src = static_cast<double>(x) + shift;
            const double floor_src = std::floor(src);
            const auto x0 = static_cast<Eigen::Index>(floor_src);
            const double frac = src - floor_src;
            double value = 0.0;
            if (x0 >= 0 && x0 < cols) {
                value += (1.0 - frac) * image(y, x0);
            }
            if (x0 + 1 >= 0 && x0 + 1 < cols) {
                value += frac * image(y, x0 + 1);
            }
            out(y, x) = value;
        }
    }
    return out;
}

Matrix range_scale(const Matrix& image) {
    if (image.size() == 0) {
        throw std::invalid_argument("range_scale: empty image");
    }
    const double lo = image.minCoeff();
    const double hi = image.maxCoeff();
    if (hi == lo) {
        return Matrix::Zero(image.rows(), image.cols());
    }
    return (image.array() - lo).matrix() / (hi - lo);
}

Matrix average_pool(const Matrix& image, int factor) {
    if (factor < 1) {
        throw std::invalid_argument("average_pool: factor must be positive");
    }
    if (image.rows() % factor != 0 || image.cols() % factor != 0) {
        throw std::invalid_argument("average_pool: image dimensions must divide by factor");
    }
    const auto rows = image.rows() / factor;
    const auto cols = image.cols() / factor;
    Matrix out(rows, cols);
    for (Eigen::Index y = 0; y < rows; ++y) {
        for (Eigen::Index x = 0; x < cols; ++x) {
            out(y, x) = image.block(y * factor, x * factor, factor, factor).mean();
        }
    }
    return out;
}

StandardizeTransform StandardizeTransform::fit(const Matrix& train) {
    if (train.rows() == 0 || train.cols() == 0) {
        throw std::invalid_argument("StandardizeTransform::fit: empty data");
    }
    StandardizeTransform transform;
    transform.mean_ = train.colwise().mean().transpose();
    transform.std_ = Vector::Ones(train.cols());
    if (train.rows() > 1) {
        const Matrix centered = train.rowwise() - transform.mean_.transpose();
        const Vector variance =
            centered.colwise().squaredNorm().transpose() / static_cast<double>(train.rows() - 1);
        for (Eigen::Index j = 0; j < variance.size(); ++j) {
            // Zero-variance features stay at std 1 and become exact zeros.
            if (variance[j] > 0.0) {
                transform.std_[j] = std::sqrt(variance[j]);
            }
        }
    }
    return transform;
}

StandardizeTransform StandardizeTransform::from_parameters(Vector mean, Vector std) {
    if (mean.size() != std.size() || mean.size() == 0) {
        throw std::invalid_argument("StandardizeTransform: mean/std size mismatch");
    }
    if ((std.array() <= 0.0).any()) {
        throw std::invalid_argument("StandardizeTransform: stds must be positive");
    }
    StandardizeTransform transform;
    transform.mean_ = std::move(mean);
    transform.std_ = std::move(std);
    return transform;
}

Matrix StandardizeTransform::apply(const Matrix& features) const {
    if (features.cols() != mean_.size()) {
        throw std::invalid_argument("StandardizeTransform::apply: dimension mismatch");
    }
    Matrix out = features.rowwise() - mean_.transpose();
    out.array().rowwise() /= std_.transpose().array();
    return out;
}

PcaTransform PcaTransform::fit(const Matrix& train, int rank) {
    if (train.rows() == 0 || train.cols() == 0) {
        throw std::invalid_argument("PcaTransform::fit: empty data");
    }
    const auto max_rank = std::min(train.rows(), train.cols());
    if (rank < 1 || rank > max_rank) {
        throw std::invalid_argument("PcaTransform::fit: rank must lie in 1..min(N, M)");
    }
    PcaTransform transform;
    transform.mean_ = train.colwise().mean().transpose();
    const Matrix centered = train.rowwise() - transform.mean_.transpose();
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    transform.basis_ = svd.matrixV().leftCols(rank);
    transform.singular_values_ = svd.singularValues().head(rank);

    // Fix each axis's sign so its largest-magnitude entry is positive.
    for (Eigen::Index c = 0; c < transform.basis_.cols(); ++c) {
        Eigen::Index at = 0;
        transform.basis_.col(c).cwiseAbs().maxCoeff(&at);
        if (transform.basis_(at, c) < 0.0) {
            transform.basis_.col(c) = -transform.basis_.col(c);
        }
    }
    return transform;
}

PcaTransform PcaTransform::from_parameters(Vector mean, Matrix basis,
                                           Vector singular_values) {
    if (basis.rows() != mean.size() || basis.cols() == 0 ||
        basis.cols() != singular_values.size()) {
        throw std::invalid_argument("PcaTransform: parameter shape mismatch");
    }
    PcaTransform transform;
    transform.mean_ = std::move(mean);
    transform.basis_ = std::move(basis);
    transform.singular_values_ = std::move(singular_values);
    return transform;
}

Matrix PcaTransform::project(const Matrix& features) const {
    if (features.cols() != basis_.rows()) {
        throw std::invalid_argument("PcaTransform::project: dimension mismatch");
    }
    return (features.rowwise() - mean_.transpose()) * basis_;
}

}  // namespace skem
