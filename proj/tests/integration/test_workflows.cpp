// End-to-end workflows on synthetic stand-ins for the benchmark datasets:
// tabular cross-validation in raw units, partitioned CV from a diffuse
// start, and the full image pipeline through a saved model bundle.

#include "skem/classifier.hpp"
#include "skem/em.hpp"
#include "skem/io.hpp"
#include "skem/partition.hpp"
#include "skem/preprocess.hpp"

#include "synthetic.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <vector>

using namespace skem;

namespace {

// Two well-separated classes over two shared kernels each. offset shifts
// the first `shifted_dims` coordinates by +/- its value; sigma2 is the
// per-axis variance.
SharedKernelModel two_class_truth(int dim, int shifted_dims, double offset,
                                  double sigma2, std::uint64_t seed) {
    testing::Rng rng(seed);
    std::vector<GaussianComponent> components;
    for (int k = 0; k < 4; ++k) {
        Vector mean(dim);
        for (int c = 0; c < dim; ++c) {
            mean[c] = 0.2 * rng.normal();
        }
        const double shift = k < 2 ? offset : -offset;
        for (int c = 0; c < shifted_dims; ++c) {
            mean[c] += shift;
        }
        components.emplace_back(mean, sigma2 * Matrix::Identity(dim, dim));
    }
    Matrix weights(2, 4);
    weights << 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5;
    return SharedKernelModel(std::move(components), weights);
}

IdxImages to_idx(const std::vector<Matrix>& images) {
    IdxImages out;
    out.count = static_cast<int>(images.size());
    out.height = static_cast<int>(images.front().rows());
    out.width = static_cast<int>(images.front().cols());
    out.pixels.reserve(static_cast<std::size_t>(out.count) * out.height * out.width);
    for (const Matrix& image : images) {
        for (int y = 0; y < out.height; ++y) {
            for (int x = 0; x < out.width; ++x) {
                const double v = std::clamp(image(y, x), 0.0, 255.0);
                out.pixels.push_back(static_cast<std::uint8_t>(std::lround(v)));
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("cross-validation recovers a separable problem left in raw units") {
    const SharedKernelModel truth = two_class_truth(7, 3, 2.0, 0.5, 11);
    LabeledDataset raw = testing::sample_dataset(truth, 600, 12);

    // Columns in wildly different units, as a real tabular export would be.
    Matrix scaled = raw.features();
    const double scales[7] = {1e-3, 1.0, 5.0, 100.0, 1e4, 0.01, 1e3};
    for (int c = 0; c < 7; ++c) {
        scaled.col(c) *= scales[c];
    }
    const LabeledDataset data(std::move(scaled), raw.labels(), raw.num_classes());

    CvConfig config;
    config.train.num_components = 4;
    config.train.passes = 10;
    config.train.seed = 5;
    config.train.init_low = -1.0;
    config.train.init_high = 1.0;
    config.folds = 10;
    config.trials = 2;
    config.standardize = true;  // the init box only makes sense in z-units
    const CvReport report = cross_validate(data, config);

    CHECK(report.folds.size() == 20);
    CHECK(report.mean_accuracy > 0.95);
    CHECK(report.std_accuracy < 0.1);
    for (const CvFoldResult& fold : report.folds) {
        CHECK(fold.best_pass >= 1);
        CHECK(fold.best_pass <= config.train.passes);
    }
}

TEST_CASE("partitioned cross-validation trains through a diffuse start") {
    // Data already on a +/-1 scale; the huge initial sigma mimics starting
    // with near-uninformative kernels and letting the M-step collapse them.
    const SharedKernelModel truth = two_class_truth(32, 10, 0.4, 0.04, 21);
    const LabeledDataset data = testing::sample_dataset(truth, 400, 22);

    CvConfig config;
    config.train.num_components = 6;
    config.train.passes = 20;
    config.train.seed = 9;
    config.train.init_low = -1.0;
    config.train.init_high = 1.0;
    config.train.init_sigma = 1e5;
    config.folds = 5;
    config.randomize = true;
    config.trials = 2;
    config.num_blocks = 2;
    config.scheme = PartitionScheme::sequential;
    const CvReport report = cross_validate(data, config);

    CHECK(report.folds.size() == 10);
    CHECK(report.mean_accuracy > 0.9);
}

TEST_CASE("glyph images flow through the full pipeline and a saved bundle") {
    const testing::GlyphSet glyphs = testing::render_glyphs(4, 100, 20, 31);
    const IdxImages images = to_idx(glyphs.images);

    // Stratified split: 80 per class to train, the rest to test.
    std::vector<int> train_rows, test_rows;
    std::vector<int> seen(4, 0);
    for (int i = 0; i < images.count; ++i) {
        (seen[glyphs.labels[i]]++ < 80 ? train_rows : test_rows).push_back(i);
    }
    REQUIRE(train_rows.size() == 320);
    REQUIRE(test_rows.size() == 80);

    const bool use_deskew = true;
    const int pool = 2;
    const Matrix all_features = images_to_features(images, use_deskew, pool);
    REQUIRE(all_features.cols() == 100);

    auto take = [&](const std::vector<int>& rows) {
        Matrix features(static_cast<int>(rows.size()), all_features.cols());
        std::vector<int> labels;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            features.row(static_cast<int>(i)) = all_features.row(rows[i]);
            labels.push_back(glyphs.labels[rows[i]]);
        }
        return std::pair{features, labels};
    };
    const auto [train_raw, train_labels] = take(train_rows);
    const auto [test_raw, test_labels] = take(test_rows);

    const StandardizeTransform standardize = StandardizeTransform::fit(train_raw);
    const PcaTransform pca = PcaTransform::fit(standardize.apply(train_raw), 36);
    const LabeledDataset train(pca.project(standardize.apply(train_raw)), train_labels, 4);
    const LabeledDataset test(pca.project(standardize.apply(test_raw)), test_labels, 4);
    train.require_all_classes_nonempty();

    TrainConfig base;
    base.num_components = 8;
    base.passes = 15;
    base.seed = 3;

    // All three variants learn the task. 320 samples starve a full 36-D
    // covariance per component, so the partitioned model's smaller blocks
    // should win by a wide margin here.
    const TrainResult skem = train_skem(train, base, &test);
    const auto [skem_confusion, skem_accuracy] = evaluate(skem.best_model, test);
    CHECK(skem_accuracy >= 0.55);
    const double sharing = shared_proportion(skem.best_model);
    CHECK(sharing >= 0.0);
    CHECK(sharing <= 1.0);

    PartitionTrainConfig split;
    split.base = base;
    split.num_blocks = 3;
    const PartitionedTrainResult pskem = train_pskem(train, split, &test);
    const auto [pskem_confusion, pskem_accuracy] = evaluate(pskem.best_model, test);
    CHECK(pskem_accuracy >= 0.8);
    CHECK(pskem_accuracy > skem_accuracy);

    TrainConfig pooled = base;
    pooled.pooled_covariance = true;
    const TrainResult mda = train_skem(train, pooled, &test);
    const auto [mda_confusion, mda_accuracy] = evaluate(mda.best_model, test);
    CHECK(mda_accuracy >= 0.6);

    // The saved bundle must reproduce the in-memory decisions from raw
    // images alone: geometry flags, preprocessing chain and model.
    ModelBundle bundle;
    bundle.kind = "pskem";
    bundle.partitioned = pskem.best_model;
    bundle.label_names = {"a", "b", "c", "d"};
    bundle.standardize = standardize;
    bundle.pca = pca;
    bundle.deskew = use_deskew;
    bundle.pool = pool;
    bundle.train_config = base;
    bundle.num_blocks = split.num_blocks;
    bundle.histories = pskem.block_histories;

    const auto path =
        (std::filesystem::temp_directory_path() / "skem_workflow_bundle.json").string();
    save_model(bundle, path);
    const ModelBundle loaded = load_model(path);
    std::remove(path.c_str());

    REQUIRE(loaded.partitioned.has_value());
    CHECK(loaded.pool == pool);
    CHECK(loaded.deskew == use_deskew);

    IdxImages test_images;
    test_images.count = static_cast<int>(test_rows.size());
    test_images.height = images.height;
    test_images.width = images.width;
    for (int row : test_rows) {
        const auto begin = images.pixels.begin() +
                           static_cast<std::ptrdiff_t>(row) * images.height * images.width;
        test_images.pixels.insert(test_images.pixels.end(), begin,
                                  begin + images.height * images.width);
    }
    const Matrix replayed = loaded.preprocess(
        images_to_features(test_images, loaded.deskew, loaded.pool));
    REQUIRE(replayed.rows() == test.size());
    for (int i = 0; i < test.size(); ++i) {
        const Vector direct = test.features().row(i).transpose();
        const Vector via_bundle = replayed.row(i).transpose();
        CHECK(classify(*loaded.partitioned, via_bundle) ==
              classify(pskem.best_model, direct));
    }
}
