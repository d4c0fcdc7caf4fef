#pragma once

#include "skem/model.hpp"

namespace skem {

/// Removes the dominant slant of a grayscale image by shearing each row
/// with x' = x - (mu11/mu02) * (y - ybar), where the moments are central
/// image moments up to order two and the shear pivots on the centroid.
/// Bilinear resampling, zero padding outside the frame, same shape out.
/// Throws SkemError on zero total intensity.
Matrix deskew(const Matrix& image);

/// Affine map of the pixel range onto [0, 1]. A constant image maps to
/// all zeros (degenerate range).
Matrix range_scale(const Matrix& image);

/// factor x factor block-average downscale; both dimensions must divide
/// evenly by factor.
Matrix average_pool(const Matrix& image, int factor);

/// Column-wise z-scoring parameters learned from training data.
/// Zero-variance columns keep std 1 so they map to exact zeros.
class StandardizeTransform {
public:
    static StandardizeTransform fit(const Matrix& train);
    /// Rebuilds a fitted transform from stored parameters (deserialization).
    static StandardizeTransform from_parameters(Vector mean, Vector std);

    Matrix apply(const Matrix& features) const;

    const Vector& mean() const { return mean_; }
    const Vector& std() const { return std_; }

private:
    Vector mean_;
    Vector std_;
};

/// Projection onto the leading principal axes of the training data,
/// from the SVD of the centered training matrix. Axes are ordered by
/// descending singular value; each axis is sign-fixed so its
/// largest-magnitude entry is positive.
class PcaTransform {
public:
    /// Throws std::invalid_argument when rank > min(N, M).
    static PcaTransform fit(const Matrix& train, int rank);
    /// Rebuilds a fitted transform from stored parameters (deserialization).
    static PcaTransform from_parameters(Vector mean, Matrix basis, Vector singular_values);

    /// Centers with the training mean, then projects: (X - mean) * basis.
    Matrix project(const Matrix& features) const;

    int input_dim() const { return static_cast<int>(basis_.rows()); }
    int rank() const { return static_cast<int>(basis_.cols()); }
    const Vector& mean() const { return mean_; }
    const Matrix& basis() const { return basis_; }  // input_dim x rank, orthonormal columns
    const Vector& singular_values() const { return singular_values_; }

private:
    Vector mean_;
    Matrix basis_;
    Vector singular_values_;
};

}  // namespace skem
