#include "skem/preprocess.hpp"

#include "synthetic.hpp"

#include <doctest.h>

#include <cmath>

using namespace skem;

namespace {

/// Central image moment m_pq about the intensity centroid, with x running
/// along columns and y along rows — the same convention deskew uses.
double central_moment(const Matrix& image, int p, int q) {
    const double mass = image.sum();
    double xbar = 0.0, ybar = 0.0;
    for (int y = 0; y < image.rows(); ++y) {
        for (int x = 0; x < image.cols(); ++x) {
            xbar += x * image(y, x);
            ybar += y * image(y, x);
        }
    }
    xbar /= mass;
    ybar /= mass;
    double m = 0.0;
    for (int y = 0; y < image.rows(); ++y) {
        for (int x = 0; x < image.cols(); ++x) {
            m += std::pow(x - xbar, p) * std::pow(y - ybar, q) * image(y, x);
        }
    }
    return m;
}

/// Isotropic Gaussian blob, optionally sheared along x per unit y.
Matrix blob(int size, double shear) {
    Matrix image(size, size);
    const double c = (size - 1) / 2.0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dy = y - c;
            const double dx = x - c - shear * dy;
            image(y, x) = std::exp(-(dx * dx + dy * dy) / (2.0 * 4.0));
        }
    }
    return image;
}

}  // namespace

TEST_CASE("deskew leaves symmetric images alone") {
    const Matrix round = blob(21, 0.0);
    const Matrix out = deskew(round);
    CHECK((out - round).cwiseAbs().maxCoeff() < 1e-9);

    const Matrix flat = Matrix::Constant(9, 9, 3.0);
    CHECK((deskew(flat) - flat).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("deskew removes most of a synthetic shear") {
    const Matrix sheared = blob(25, 0.6);
    const double before = std::abs(central_moment(sheared, 1, 1));
    REQUIRE(before > 1.0);  // the shear is actually visible in the moments
    const Matrix out = deskew(sheared);
    const double after = std::abs(central_moment(out, 1, 1));
    CHECK(after < before / 10.0);
    // Intensity is approximately conserved (only edge clipping losses).
    CHECK(out.sum() == doctest::Approx(sheared.sum()).epsilon(0.02));
}

TEST_CASE("deskew is nearly idempotent") {
    const Matrix sheared = blob(25, 0.45);
    const Matrix once = deskew(sheared);
    const Matrix twice = deskew(once);
    const double first_change = (once - sheared).cwiseAbs().maxCoeff();
    const double second_change = (twice - once).cwiseAbs().maxCoeff();
    CHECK(second_change < 0.1 * first_change);
}

TEST_CASE("deskew rejects an all-zero image") {
    CHECK_THROWS_AS(deskew(Matrix::Zero(5, 5)), SkemError);
}

TEST_CASE("range_scale maps the pixel range onto the unit interval") {
    Matrix image(2, 2);
    image << 0.0, 51.0, 102.0, 255.0;
    const Matrix out = range_scale(image);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(1, 1) == 1.0);
    CHECK(out(0, 1) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(out(1, 0) == doctest::Approx(0.4).epsilon(1e-15));

    // Already-shifted ranges still end exactly at 0 and 1.
    Matrix shifted(1, 3);
    shifted << -5.0, 0.0, 15.0;
    const Matrix out2 = range_scale(shifted);
    CHECK(out2(0, 0) == 0.0);
    CHECK(out2(0, 2) == 1.0);

    CHECK((range_scale(Matrix::Constant(3, 3, 7.0)).array() == 0.0).all());
}

TEST_CASE("average_pool shrinks by block means") {
    Matrix image(4, 4);
    image << 1, 3, 5, 7, 5, 7, 9, 11, 2, 4, 10, 12, 6, 8, 14, 16;
    const Matrix out = average_pool(image, 2);
    REQUIRE(out.rows() == 2);
    REQUIRE(out.cols() == 2);
    CHECK(out(0, 0) == 4.0);
    CHECK(out(0, 1) == 8.0);
    CHECK(out(1, 0) == 5.0);
    CHECK(out(1, 1) == 13.0);

    CHECK((average_pool(image, 1) - image).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(average_pool(image, 3), std::invalid_argument);
    CHECK_THROWS_AS(average_pool(image, 0), std::invalid_argument);
}

TEST_CASE("standardization zeroes means and normalizes spreads") {
    testing::Rng rng(2718);
    Matrix train(50, 3);
    for (int i = 0; i < 50; ++i) {
        train(i, 0) = 5.0 + 2.0 * rng.normal();
        train(i, 1) = -3.0 + 0.1 * rng.normal();
        train(i, 2) = 100.0 * rng.normal();
    }
    const StandardizeTransform transform = StandardizeTransform::fit(train);
    const Matrix out = transform.apply(train);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(out.col(c).mean()) < 1e-10);
        const double var = out.col(c).squaredNorm() / 49.0;  // mean already ~0
        CHECK(var == doctest::Approx(1.0).epsilon(1e-8));
    }
    // The parameters match the textbook estimates.
    CHECK(transform.mean()[0] == doctest::Approx(train.col(0).mean()).epsilon(1e-12));
    const double s0 = std::sqrt((train.col(0).array() - train.col(0).mean()).square().sum() / 49.0);
    CHECK(transform.std()[0] == doctest::Approx(s0).epsilon(1e-12));
}

TEST_CASE("constant columns standardize to exact zeros") {
    Matrix train(4, 2);
    train << 7, 1, 7, 2, 7, 3, 7, 4;
    const StandardizeTransform transform = StandardizeTransform::fit(train);
    CHECK(transform.std()[0] == 1.0);
    const Matrix out = transform.apply(train);
    CHECK((out.col(0).array() == 0.0).all());
}

TEST_CASE("standardizing standardized data is the identity") {
    testing::Rng rng(3141);
    Matrix train(40, 2);
    for (int i = 0; i < 40; ++i) {
        train(i, 0) = rng.normal();
        train(i, 1) = rng.uniform(-1.0, 1.0);
    }
    const Matrix once = StandardizeTransform::fit(train).apply(train);
    const Matrix twice = StandardizeTransform::fit(once).apply(once);
    CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("standardize parameters survive a save/load round trip") {
    Vector mean(2), std(2);
    mean << 1.5, -2.0;
    std << 3.0, 0.5;
    const StandardizeTransform transform = StandardizeTransform::from_parameters(mean, std);
    Matrix x(1, 2);
    x << 4.5, -2.5;
    const Matrix out = transform.apply(x);
    CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out(0, 1) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("PCA recovers an exact one-dimensional structure") {
    // Points on a line through an offset: one component explains everything.
    testing::Rng rng(1618);
    Vector direction(3);
    direction << 2.0, -1.0, 0.5;
    direction.normalize();
    Vector offset(3);
    offset << 4.0, 4.0, -2.0;
    Matrix train(30, 3);
    for (int i = 0; i < 30; ++i) {
        train.row(i) = (offset + rng.uniform(-5.0, 5.0) * direction).transpose();
    }
    const PcaTransform pca = PcaTransform::fit(train, 1);
    CHECK(pca.input_dim() == 3);
    CHECK(pca.rank() == 1);
    // Reconstruction from the single coordinate is exact.
    const Matrix projected = pca.project(train);
    const Matrix rebuilt =
        (projected * pca.basis().transpose()).rowwise() + pca.mean().transpose();
    CHECK((rebuilt - train).cwiseAbs().maxCoeff() < 1e-10);
    // Only the first singular value is non-negligible.
    CHECK(pca.singular_values()[0] > 1.0);
}

TEST_CASE("full-rank PCA is an isometry") {
    testing::Rng rng(2025);
    Matrix train(40, 4);
    for (int i = 0; i < 40; ++i) {
        for (int c = 0; c < 4; ++c) {
            train(i, c) = rng.normal();
        }
    }
    const PcaTransform pca = PcaTransform::fit(train, 4);
    const Matrix projected = pca.project(train);
    const Matrix centered = train.rowwise() - pca.mean().transpose();
    for (int i = 0; i < 40; ++i) {
        CHECK(projected.row(i).norm() ==
              doctest::Approx(centered.row(i).norm()).epsilon(1e-9));
    }
    // Pairwise inner products are preserved too (the basis is orthonormal).
    const Matrix gram_before = centered * centered.transpose();
    const Matrix gram_after = projected * projected.transpose();
    CHECK((gram_before - gram_after).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("projected training data has diagonal covariance in axis order") {
    testing::Rng rng(4242);
    // Anisotropic cloud: distinct variances along rotated axes.
    Matrix train(200, 3);
    for (int i = 0; i < 200; ++i) {
        const double a = 5.0 * rng.normal();
        const double b = 2.0 * rng.normal();
        const double c = 0.5 * rng.normal();
        train(i, 0) = a + b;
        train(i, 1) = a - b + c;
        train(i, 2) = c + 0.3 * a;
    }
    const PcaTransform pca = PcaTransform::fit(train, 3);
    const Matrix projected = pca.project(train);
    const Matrix centered = projected.rowwise() - projected.colwise().mean();
    const Matrix cov = centered.transpose() * centered / 199.0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            if (r != c) {
                CHECK(std::abs(cov(r, c)) < 1e-8 * cov(0, 0));
            }
        }
    }
    // Variances arrive in descending order.
    CHECK(cov(0, 0) >= cov(1, 1));
    CHECK(cov(1, 1) >= cov(2, 2));
    // Singular values match the variances: s_i^2 / (N-1) = var_i.
    for (int c = 0; c < 3; ++c) {
        CHECK(pca.singular_values()[c] * pca.singular_values()[c] / 199.0 ==
              doctest::Approx(cov(c, c)).epsilon(1e-9));
    }
}

TEST_CASE("PCA basis columns are orthonormal and deterministically signed") {
    testing::Rng rng(5555);
    Matrix train(60, 5);
    for (int i = 0; i < 60; ++i) {
        for (int c = 0; c < 5; ++c) {
            train(i, c) = rng.normal() + 0.5 * rng.uniform();
        }
    }
    const PcaTransform pca = PcaTransform::fit(train, 3);
    const Matrix gram = pca.basis().transpose() * pca.basis();
    CHECK((gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    for (int c = 0; c < 3; ++c) {
        Eigen::Index at = 0;
        pca.basis().col(c).cwiseAbs().maxCoeff(&at);
        CHECK(pca.basis()(at, c) > 0.0);
    }
    // Fitting twice gives bit-identical axes.
    const PcaTransform again = PcaTransform::fit(train, 3);
    CHECK((pca.basis() - again.basis()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("PCA rejects impossible ranks") {
    const Matrix train = Matrix::Random(10, 4);
    CHECK_THROWS_AS(PcaTransform::fit(train, 5), std::invalid_argument);
    CHECK_THROWS_AS(PcaTransform::fit(train, 0), std::invalid_argument);
    const Matrix tiny = Matrix::Random(3, 8);
    CHECK_THROWS_AS(PcaTransform::fit(tiny, 4), std::invalid_argument);
}

TEST_CASE("projection uses stored parameters, not the projected data") {
    Vector mean(2);
    mean << 10.0, 20.0;
    Matrix basis(2, 1);
    basis << 1.0, 0.0;
    Vector sv(1);
    sv << 1.0;
    const PcaTransform pca = PcaTransform::from_parameters(mean, basis, sv);
    Matrix x(2, 2);
    x << 11.0, 25.0, 9.0, 15.0;
    const Matrix out = pca.project(x);
    REQUIRE(out.cols() == 1);
    CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out(1, 0) == doctest::Approx(-1.0).epsilon(1e-15));
}
