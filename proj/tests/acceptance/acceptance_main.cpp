// Acceptance gate: one checkable claim per criterion, run as
//   acceptance --criterion N --data-dir DIR
// Prints exactly one [PASS]/[FAIL]/[SKIP] line; exit code 0 unless FAIL.
// Criteria 5-9 depend on benchmark datasets (see data/README.md) and
// report [SKIP] when the files are absent.

#include "bench.hpp"
#include "skem/classifier.hpp"
#include "skem/em.hpp"
#include "skem/io.hpp"
#include "skem/partition.hpp"
#include "skem/preprocess.hpp"
#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace skem;

namespace {

struct Outcome {
    enum class Kind { pass, fail, skip };
    Kind kind = Kind::fail;
    std::string detail;

    static Outcome pass(std::string detail) { return {Kind::pass, std::move(detail)}; }
    static Outcome fail(std::string detail) { return {Kind::fail, std::move(detail)}; }
    static Outcome skip(std::string detail) { return {Kind::skip, std::move(detail)}; }
};

std::string fmt(double value) {
    std::ostringstream out;
    out.precision(6);
    out << value;
    return out.str();
}

double relative_gap(double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::abs(b));
}

LabeledDataset sample_populated(const SharedKernelModel& truth, int n, std::uint64_t seed) {
    LabeledDataset data = testing::sample_dataset(truth, n, seed);
    auto complete = [&] {
        for (int j = 0; j < data.num_classes(); ++j) {
            if (data.class_count(j) == 0) return false;
        }
        return true;
    };
    while (!complete()) {
        seed += 7919;
        data = testing::sample_dataset(truth, n, seed);
    }
    return data;
}

double mean_of(const std::vector<double>& values) {
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

// --- criterion 1: the simplified expectation equals full enumeration ----

Outcome criterion_q_oracle(const std::string&) {
    double worst = 0.0;
    int done = 0;
    for (std::uint64_t seed = 0; done < 50; ++seed) {
        testing::Rng rng(9000 + seed);
        const int l = 1 + rng.index(3);
        const int k = 1 + rng.index(3);
        const int m = 1 + rng.index(3);
        const int n = std::max(2, l) + rng.index(3);  // >= l so all classes can appear
        const SharedKernelModel ref = testing::random_model(l, k, m, 100 + seed);
        const SharedKernelModel moved = testing::random_model(l, k, m, 5000 + seed);
        const LabeledDataset data = sample_populated(ref, n, 300 + seed);

        worst = std::max(worst, relative_gap(q_function(ref, ref, data),
                                             q_bruteforce(ref, ref, data)));
        worst = std::max(worst, relative_gap(q_function(moved, ref, data),
                                             q_bruteforce(moved, ref, data)));
        ++done;
    }
    const std::string detail = "50 random instances (N<=6, K<=3, L<=3, M<=3), "
                               "max relative gap vs full enumeration " + fmt(worst);
    return worst <= 1e-9 ? Outcome::pass(detail) : Outcome::fail(detail);
}

// --- criterion 2: training likelihood never decreases -------------------

Outcome criterion_monotone(const std::string&) {
    double worst_drop = 0.0;  // most negative per-pass delta observed
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SharedKernelModel truth = testing::random_model(2, 3, 2, 40 + seed);
        const LabeledDataset data = sample_populated(truth, 500, 140 + seed);
        TrainConfig config;
        config.num_components = 3;
        config.passes = 30;
        config.seed = seed;
        const TrainResult result = train_skem(data, config);
        for (std::size_t p = 1; p < result.history.passes.size(); ++p) {
            const double delta = result.history.passes[p].log_likelihood -
                                 result.history.passes[p - 1].log_likelihood;
            worst_drop = std::min(worst_drop, delta);
        }
    }
    const std::string detail =
        "20 seeded runs (N=500, M=2, L=2, K=3, 30 passes), worst per-pass "
        "log-likelihood delta " + fmt(worst_drop);
    return worst_drop >= -1e-8 ? Outcome::pass(detail) : Outcome::fail(detail);
}

// --- criterion 3: one class reduces to standard EM ----------------------

Outcome criterion_single_class_reduction(const std::string&) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SharedKernelModel truth = testing::random_model(1, 2, 2, 60 + seed);
        const LabeledDataset data = sample_populated(truth, 60, 160 + seed);
        TrainConfig config;
        config.num_components = 2;
        config.passes = 8;
        config.seed = seed;

        SkemTrainer supervised(data, config);
        StandardEmTrainer unsupervised(data.features(), config);
        for (int pass = 0; pass < config.passes; ++pass) {
            const PassRecord record = supervised.step();
            const double ll = unsupervised.step();
            worst = std::max(worst, std::abs(record.log_likelihood - ll));
            const auto& a = supervised.model();
            const auto& b = unsupervised.model();
            worst = std::max(
                worst, (a.weights().row(0).transpose() - b.weights).cwiseAbs().maxCoeff());
            for (int c = 0; c < config.num_components; ++c) {
                const auto& comp = b.components[static_cast<std::size_t>(c)];
                worst = std::max(worst,
                                 (a.component(c).mean() - comp.mean()).cwiseAbs().maxCoeff());
                worst = std::max(worst, (a.component(c).covariance() - comp.covariance())
                                            .cwiseAbs()
                                            .maxCoeff());
            }
        }
    }
    const std::string detail =
        "10 instances, 8 passes each: max parameter/likelihood gap between "
        "single-class and standard EM trajectories " + fmt(worst);
    return worst <= 1e-12 ? Outcome::pass(detail) : Outcome::fail(detail);
}

// --- criterion 4: expanded joint mixture equals the block sum -----------

Outcome criterion_joint_expansion(const std::string&) {
    double worst = 0.0;
    int points_checked = 0;
    int label_mismatches = 0;
    testing::Rng point_rng(777);

    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        testing::Rng rng(8800 + trial);
        const int blocks = 1 + rng.index(3);
        const int dim = blocks * (1 + rng.index(2));  // block dims 1 or 2
        const int l = 1 + rng.index(3);
        const int k = 1 + rng.index(4);
        const auto scheme = std::array{PartitionScheme::sequential,
                                       PartitionScheme::interleaved,
                                       PartitionScheme::random}[trial % 3];
        const Partition partition = make_partition(dim, blocks, scheme, trial);

        std::vector<SharedKernelModel> block_models;
        for (int r = 0; r < blocks; ++r) {
            block_models.push_back(testing::random_model(
                l, k, partition.block_dim(r), 10 * trial + static_cast<std::uint64_t>(r)));
        }
        const PartitionedModel model(partition, std::move(block_models));
        const SharedKernelModel joint = expand_joint(model);

        for (int p = 0; p < 12; ++p) {
            Vector x(dim);
            for (int c = 0; c < dim; ++c) {
                x[c] = 2.0 * point_rng.normal();
            }
            const Vector split_scores = class_scores(model, x);
            const Vector joint_scores = class_scores(joint, x);
            worst = std::max(worst,
                             (split_scores - joint_scores).cwiseAbs().maxCoeff());
            Vector sorted = split_scores;
            std::sort(sorted.data(), sorted.data() + sorted.size());
            const double gap = sorted.size() > 1
                                   ? sorted[sorted.size() - 1] - sorted[sorted.size() - 2]
                                   : 1.0;
            if (gap > 1e-7 && classify(model, x) != classify(joint, x)) {
                ++label_mismatches;
            }
            ++points_checked;
        }
    }
    const std::string detail = "10 random partitioned models, " +
                               std::to_string(points_checked) +
                               " points: max block-sum vs expanded log-density gap " +
                               fmt(worst) + ", unambiguous label mismatches " +
                               std::to_string(label_mismatches);
    return (worst <= 1e-9 && label_mismatches == 0) ? Outcome::pass(detail)
                                                    : Outcome::fail(detail);
}

// --- criteria 5/6: tabular benchmarks -----------------------------------

Outcome criterion_rice(const std::string& data_dir) {
    const auto paths = bench::locate_datasets(data_dir);
    if (!paths.has_rice()) {
        return Outcome::skip("rice.csv not found under " + data_dir +
                             " (see data/README.md)");
    }
    const CvReport report =
        bench::run_rice_cv(paths.rice, /*K=*/14, /*passes=*/10, /*trials=*/10,
                           /*seed=*/1, /*jobs=*/1);
    const std::string detail = "10-fold CV, K=14, 10 trials: mean accuracy " +
                               fmt(report.mean_accuracy) + " +/- " +
                               fmt(report.std_accuracy) + " (threshold 0.94)";
    return report.mean_accuracy >= 0.94 ? Outcome::pass(detail) : Outcome::fail(detail);
}

Outcome criterion_ionosphere(const std::string& data_dir) {
    const auto paths = bench::locate_datasets(data_dir);
    if (!paths.has_ionosphere()) {
        return Outcome::skip("ionosphere.csv not found under " + data_dir +
                             " (see data/README.md)");
    }
    const CvReport report =
        bench::run_ionosphere_cv(paths.ionosphere, /*K=*/12, /*passes=*/40,
                                 /*trials=*/20, /*seed=*/1, /*jobs=*/1);
    const std::string detail =
        "randomized 5-fold CV, 2x16-D, K=12, 20 trials: mean accuracy " +
        fmt(report.mean_accuracy) + " +/- " + fmt(report.std_accuracy) +
        " (threshold 0.95)";
    return report.mean_accuracy >= 0.95 ? Outcome::pass(detail) : Outcome::fail(detail);
}

// --- criteria 7/8/9: half-size digit experiments ------------------------

Outcome criterion_desk_trend(const std::string& data_dir) {
    const auto paths = bench::locate_datasets(data_dir);
    if (!paths.has_mnist()) {
        return Outcome::skip("digit IDX files not found under " + data_dir +
                             "/mnist (see data/README.md)");
    }
    const bench::DeskData data = bench::load_mnist_desk(paths, 10000, 2000, 36);
    std::vector<double> split, full;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const bench::TrendPair pair = bench::run_desk_trend_pair(data, /*K=*/12, seed);
        split.push_back(pair.split_accuracy);
        full.push_back(pair.full_accuracy);
    }
    const double split_mean = mean_of(split);
    const double full_mean = mean_of(full);
    const std::string detail = "K=12, 5 seeds: 3x12-D partitioned mean accuracy " +
                               fmt(split_mean) + " vs 1x36-D mean " + fmt(full_mean);
    return split_mean > full_mean ? Outcome::pass(detail) : Outcome::fail(detail);
}

Outcome criterion_pooled_comparison(const std::string& data_dir) {
    const auto paths = bench::locate_datasets(data_dir);
    if (!paths.has_mnist()) {
        return Outcome::skip("digit IDX files not found under " + data_dir +
                             "/mnist (see data/README.md)");
    }
    const bench::DeskData data = bench::load_mnist_desk(paths, 10000, 2000, 36);
    std::vector<double> full_cov, pooled;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const bench::PooledPair pair =
            bench::run_pooled_comparison_pair(data, /*K=*/20, seed);
        full_cov.push_back(pair.full_cov_accuracy);
        pooled.push_back(pair.pooled_cov_accuracy);
    }
    const double full_mean = mean_of(full_cov);
    const double pooled_mean = mean_of(pooled);
    const std::string detail =
        "K=20, 10 same-initialization pairs: per-component covariances mean " +
        fmt(full_mean) + " vs pooled covariance mean " + fmt(pooled_mean);
    return full_mean > pooled_mean ? Outcome::pass(detail) : Outcome::fail(detail);
}

Outcome criterion_sharing(const std::string& data_dir) {
    // Part 1, always checkable: the metric's definition on hand fixtures.
    {
        Matrix mixed(2, 3);
        mixed << 0.5, 0.5, 0.0, 0.0, 0.5, 0.5;
        Matrix disjoint(2, 4);
        disjoint << 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5;
        const bool fixtures_ok =
            shared_proportion(mixed, 0.01) == 0.5 &&
            shared_proportion(disjoint, 0.01) == 0.0 &&
            shared_proportion(Matrix::Constant(3, 4, 0.25), 0.01) == 1.0;
        if (!fixtures_ok) {
            return Outcome::fail("hand fixtures disagree with the definition");
        }
    }

    const auto paths = bench::locate_datasets(data_dir);
    if (!paths.has_mnist()) {
        return Outcome::skip("fixtures pass; the K-sweep trend needs digit IDX files "
                             "under " + data_dir + "/mnist (see data/README.md)");
    }
    const bench::DeskData data = bench::load_mnist_desk(paths, 10000, 2000, 36);
    std::string detail = "fixtures exact;";
    bool ok = true;
    for (int blocks : {1, 3}) {
        const int passes = blocks == 1 ? 40 : 30;
        std::vector<double> low_k, high_k;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            low_k.push_back(bench::run_sharing_run(data, blocks, 4, seed, passes));
            high_k.push_back(bench::run_sharing_run(data, blocks, 40, seed, passes));
        }
        const double low_mean = mean_of(low_k);
        const double high_mean = mean_of(high_k);
        detail += " " + std::to_string(blocks) + "-block mean sharing K=4 " +
                  fmt(low_mean) + " vs K=40 " + fmt(high_mean) + ";";
        ok = ok && high_mean < low_mean;
    }
    return ok ? Outcome::pass(detail) : Outcome::fail(detail);
}

// --- criterion 10: partitioned training is faster -----------------------

Outcome criterion_speedup(const std::string&) {
    const bench::TimingReport report =
        bench::run_complexity_benchmark(/*num_samples=*/20000, /*num_components=*/20,
                                        /*timed_passes=*/2, /*seed=*/3);
    std::string detail =
        "12x3-D vs 1x36-D per pass (K=20, N=20000, serial): "
        "factorize-per-evaluation profile " + fmt(report.full_probe_seconds) + "s vs " +
        fmt(report.split_probe_seconds) + "s = " + fmt(report.probe_ratio) +
        "x; cached-factorization production profile " + fmt(report.full_real_seconds) +
        "s vs " + fmt(report.split_real_seconds) + "s = " + fmt(report.real_ratio) +
        "x; op-model prediction " + fmt(report.predicted_ratio) + "x";
    return report.probe_ratio >= 10.0 ? Outcome::pass(detail) : Outcome::fail(detail);
}

// --- criterion 11: cross-cutting invariants -----------------------------

Outcome criterion_invariants(const std::string&) {
    std::vector<std::string> failures;

    // Weight rows and responsibilities stay normalized through training.
    {
        const SharedKernelModel truth = testing::random_model(2, 3, 2, 4001);
        const LabeledDataset data = sample_populated(truth, 200, 4002);
        TrainConfig config;
        config.num_components = 3;
        config.passes = 6;
        config.seed = 2;
        SkemTrainer trainer(data, config);
        for (int pass = 0; pass < config.passes; ++pass) {
            trainer.step();
            const Matrix& w = trainer.model().weights();
            for (int j = 0; j < w.rows(); ++j) {
                if (std::abs(w.row(j).sum() - 1.0) > 1e-12 || w.row(j).minCoeff() < 0.0) {
                    failures.push_back("weight normalization");
                }
            }
        }
        const Matrix resp = e_step(trainer.model(), data).values();
        for (int i = 0; i < resp.rows(); ++i) {
            if (std::abs(resp.row(i).sum() - 1.0) > 1e-10) {
                failures.push_back("responsibility normalization");
            }
        }
    }

    // Sample order never changes the fitted model.
    {
        const SharedKernelModel truth = testing::random_model(2, 2, 2, 4010);
        const LabeledDataset data = sample_populated(truth, 50, 4011);
        std::vector<int> order(50);
        std::iota(order.begin(), order.end(), 0);
        std::reverse(order.begin(), order.end());
        TrainConfig config;
        config.num_components = 2;
        config.passes = 5;
        config.seed = 6;
        const TrainResult a = train_skem(data, config);
        const TrainResult b = train_skem(data.subset(order), config);
        double gap = (a.model.weights() - b.model.weights()).cwiseAbs().maxCoeff();
        for (int c = 0; c < 2; ++c) {
            gap = std::max(gap, (a.model.component(c).mean() - b.model.component(c).mean())
                                    .cwiseAbs()
                                    .maxCoeff());
        }
        if (gap > 1e-9) {
            failures.push_back("permutation equivariance");
        }
    }

    // Serialization round-trips to identical scores.
    {
        const SharedKernelModel truth = testing::random_model(2, 2, 3, 4020);
        const LabeledDataset data = sample_populated(truth, 80, 4021);
        TrainConfig config;
        config.num_components = 2;
        config.passes = 3;
        config.seed = 9;
        const TrainResult result = train_skem(data, config);
        ModelBundle bundle;
        bundle.kind = "skem";
        bundle.single = result.model;
        bundle.train_config = config;
        const auto path =
            (std::filesystem::temp_directory_path() / "skem_acceptance_bundle.json")
                .string();
        save_model(bundle, path);
        const ModelBundle back = load_model(path);
        std::remove(path.c_str());
        for (int i = 0; i < data.size(); ++i) {
            const Vector x = data.features().row(i).transpose();
            if ((class_scores(*bundle.single, x) - class_scores(*back.single, x))
                    .cwiseAbs()
                    .maxCoeff() != 0.0) {
                failures.push_back("serialization round trip");
                break;
            }
        }
    }

    // PCA produces orthonormal axes.
    {
        testing::Rng rng(4030);
        Matrix train(60, 5);
        for (int i = 0; i < 60; ++i) {
            for (int c = 0; c < 5; ++c) {
                train(i, c) = rng.normal();
            }
        }
        const PcaTransform pca = PcaTransform::fit(train, 3);
        const Matrix gram = pca.basis().transpose() * pca.basis();
        if ((gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() > 1e-10) {
            failures.push_back("PCA orthonormality");
        }
    }

    // Deskew settles after one application.
    {
        Matrix image(25, 25);
        const double c = 12.0;
        for (int y = 0; y < 25; ++y) {
            for (int x = 0; x < 25; ++x) {
                const double dy = y - c;
                const double dx = x - c - 0.5 * dy;
                image(y, x) = std::exp(-(dx * dx + dy * dy) / 8.0);
            }
        }
        const Matrix once = deskew(image);
        const Matrix twice = deskew(once);
        const double first = (once - image).cwiseAbs().maxCoeff();
        const double second = (twice - once).cwiseAbs().maxCoeff();
        if (!(second < 0.1 * first)) {
            failures.push_back("deskew idempotence");
        }
    }

    if (failures.empty()) {
        return Outcome::pass(
            "normalization, permutation equivariance, serialization round trip, "
            "PCA orthonormality, deskew idempotence all hold");
    }
    std::string detail = "violated:";
    for (const auto& f : failures) {
        detail += " " + f + ";";
    }
    return Outcome::fail(detail);
}

using CriterionFn = Outcome (*)(const std::string&);

struct Criterion {
    int number;
    const char* title;
    CriterionFn run;
};

constexpr Criterion kCriteria[] = {
    {1, "expected complete-data log-likelihood matches brute-force enumeration",
     criterion_q_oracle},
    {2, "training log-likelihood is monotone", criterion_monotone},
    {3, "single-class training reduces to standard EM", criterion_single_class_reduction},
    {4, "expanded joint mixture matches the blockwise classifier", criterion_joint_expansion},
    {5, "rice benchmark accuracy", criterion_rice},
    {6, "ionosphere benchmark accuracy", criterion_ionosphere},
    {7, "partitioned beats unpartitioned on half-size digits", criterion_desk_trend},
    {8, "per-component covariances beat pooled covariance", criterion_pooled_comparison},
    {9, "component sharing metric and its K trend", criterion_sharing},
    {10, "partitioned training wall-clock speedup", criterion_speedup},
    {11, "cross-cutting invariants", criterion_invariants},
};

}  // namespace

int main(int argc, char** argv) {
    int criterion = 0;
    std::string data_dir = "data";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            criterion = std::atoi(argv[++i]);
        } else if (arg == "--data-dir" && i + 1 < argc) {
            data_dir = argv[++i];
        } else {
            std::cerr << "usage: acceptance --criterion N [--data-dir DIR]\n";
            return 2;
        }
    }
    if (criterion < 1 || criterion > static_cast<int>(std::size(kCriteria))) {
        std::cerr << "usage: acceptance --criterion N [--data-dir DIR]\n";
        return 2;
    }

    const Criterion& entry = kCriteria[criterion - 1];
    Outcome outcome = Outcome::fail("unexpected error");
    try {
        outcome = entry.run(data_dir);
    } catch (const std::exception& e) {
        outcome = Outcome::fail(std::string("exception: ") + e.what());
    }

    const char* tag = outcome.kind == Outcome::Kind::pass   ? "[PASS]"
                      : outcome.kind == Outcome::Kind::skip ? "[SKIP]"
                                                            : "[FAIL]";
    std::cout << tag << " criterion " << entry.number << ": " << entry.title << ": "
              << outcome.detail << std::endl;
    return outcome.kind == Outcome::Kind::fail ? 1 : 0;
}
