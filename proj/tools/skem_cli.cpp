// skem: command-line front end for shared-kernel mixture classifiers.
// Subcommands: train, eval, cv, sweep, bench. Every run echoes its fully
// resolved configuration (reusable via --config) and all randomness flows
// from --seed through documented per-fold/per-trial/per-block streams.

#include "bench.hpp"
#include "skem/classifier.hpp"
#include "skem/em.hpp"
#include "skem/io.hpp"
#include "skem/model.hpp"
#include "skem/partition.hpp"
#include "skem/preprocess.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

using namespace skem;

namespace {

// --- dataset plumbing ---------------------------------------------------

bool is_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    unsigned char magic[4] = {0, 0, 0, 0};
    in.read(reinterpret_cast<char*>(magic), 4);
    return in.gcount() == 4 && magic[0] == 0 && magic[1] == 0 && magic[2] == 0x08 &&
           magic[3] == 0x03;
}

struct DataOptions {
    std::string data;
    std::string labels;  // IDX label file; delimited files carry their own labels
    int labels_col = -1;  // 1-based; -1 means the last column
    bool deskew = false;
    int pool = 1;
};

void add_data_options(CLI::App* cmd, DataOptions& opts, const std::string& what) {
    cmd->add_option("--data", opts.data, what + " (delimited text or IDX images)")
        ->required();
    cmd->add_option("--labels", opts.labels,
                    "IDX label file matching --data (IDX input only)");
    cmd->add_option("--labels-col", opts.labels_col,
                    "1-based label column of a delimited file (default: last)");
    cmd->add_flag("--deskew", opts.deskew, "deskew images before vectorizing");
    cmd->add_option("--pool", opts.pool,
                    "block-average image downscale factor (images only)")
        ->check(CLI::PositiveNumber);
}

LabeledDataset load_any(const DataOptions& opts,
                        const std::vector<std::string>* label_dictionary) {
    if (is_idx_images(opts.data)) {
        if (opts.labels.empty()) {
            throw SkemError("IDX input needs --labels with the matching label file");
        }
        const auto [images, labels] = load_idx(opts.data, opts.labels);
        Matrix features = images_to_features(images, opts.deskew, opts.pool);
        int num_classes = 0;
        for (int label : labels) {
            num_classes = std::max(num_classes, label + 1);
        }
        std::vector<std::string> names;
        for (int j = 0; j < num_classes; ++j) {
            names.push_back(std::to_string(j));
        }
        return LabeledDataset(std::move(features), labels, num_classes, std::move(names));
    }
    if (opts.deskew || opts.pool != 1) {
        throw SkemError("--deskew/--pool apply to IDX image input only");
    }
    DelimitedSchema schema;
    if (opts.labels_col == 0) {
        throw SkemError("--labels-col is 1-based");
    }
    schema.label_column = opts.labels_col > 0 ? opts.labels_col - 1 : -1;
    return load_delimited(opts.data, schema, label_dictionary);
}

// --- model/preprocessing shared options ---------------------------------

struct ModelOptions {
    int k = 2;
    int passes = 30;
    double init_low = -2.0;
    double init_high = 2.0;
    double init_sigma = 2.0;
    std::string cov = "full";
    int blocks = 1;
    int block_dim = 0;  // 0: derive from --blocks
    std::string scheme = "seq";
    std::uint64_t seed = 0;
};

void add_model_options(CLI::App* cmd, ModelOptions& opts) {
    cmd->add_option("--k", opts.k, "mixture components per model")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--passes", opts.passes, "EM passes")->check(CLI::PositiveNumber);
    cmd->add_option("--init-low", opts.init_low, "initial mean box, lower edge");
    cmd->add_option("--init-high", opts.init_high, "initial mean box, upper edge");
    cmd->add_option("--init-sigma", opts.init_sigma, "initial per-axis std deviation");
    cmd->add_option("--cov", opts.cov, "covariance mode")
        ->check(CLI::IsMember({"full", "mda"}));
    cmd->add_option("--blocks", opts.blocks, "feature blocks (1: unpartitioned)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--block-dim", opts.block_dim,
                    "columns per block; alternative to --blocks, must divide the "
                    "feature count");
    cmd->add_option("--scheme", opts.scheme, "block assignment scheme")
        ->check(CLI::IsMember({"seq", "sequential", "inter", "interleaved", "rand",
                               "random"}));
    cmd->add_option("--seed", opts.seed, "master seed; sub-seeds derive from it");
}

TrainConfig to_train_config(const ModelOptions& opts) {
    TrainConfig config;
    config.num_components = opts.k;
    config.passes = opts.passes;
    config.seed = opts.seed;
    config.init_low = opts.init_low;
    config.init_high = opts.init_high;
    config.init_sigma = opts.init_sigma;
    config.pooled_covariance = opts.cov == "mda";
    return config;
}

int resolve_blocks(const ModelOptions& opts, int dim) {
    if (opts.block_dim > 0) {
        if (dim % opts.block_dim != 0) {
            throw SkemError("--block-dim " + std::to_string(opts.block_dim) +
                            " does not divide the feature count " + std::to_string(dim));
        }
        const int derived = dim / opts.block_dim;
        if (opts.blocks != 1 && opts.blocks != derived) {
            throw SkemError("--blocks and --block-dim disagree");
        }
        return derived;
    }
    return opts.blocks;
}

struct PreprocessOptions {
    bool standardize = false;
    int pca = 0;  // 0: off
};

void add_preprocess_options(CLI::App* cmd, PreprocessOptions& opts) {
    cmd->add_flag("--standardize", opts.standardize,
                  "z-score features with training statistics");
    cmd->add_option("--pca", opts.pca, "project onto this many principal axes (0: off)")
        ->check(CLI::NonNegativeNumber);
}

// Fits the requested transforms on train, applies them to every dataset.
struct FittedPreprocess {
    std::optional<StandardizeTransform> standardize;
    std::optional<PcaTransform> pca;

    Matrix apply(const Matrix& features) const {
        Matrix out = features;
        if (standardize) {
            out = standardize->apply(out);
        }
        if (pca) {
            out = pca->project(out);
        }
        return out;
    }
};

FittedPreprocess fit_preprocess(const PreprocessOptions& opts, const Matrix& train) {
    FittedPreprocess fitted;
    Matrix current = train;
    if (opts.standardize) {
        fitted.standardize = StandardizeTransform::fit(current);
        current = fitted.standardize->apply(current);
    }
    if (opts.pca > 0) {
        fitted.pca = PcaTransform::fit(current, opts.pca);
    }
    return fitted;
}

LabeledDataset transformed(const LabeledDataset& data, const FittedPreprocess& fitted) {
    return LabeledDataset(fitted.apply(data.features()), data.labels(),
                          data.num_classes(), data.label_names());
}

// --- reporting ----------------------------------------------------------

void echo_config(const CLI::App& app) {
    const CLI::App* active = app.get_subcommands().front();
    std::cout << "# resolved configuration: put the lines below under ["
              << active->get_name() << "] in a file and rerun with --config FILE\n";
    std::istringstream lines(active->config_to_str(true, false));
    for (std::string line; std::getline(lines, line);) {
        std::cout << "#   " << line << "\n";
    }
}

void print_confusion(const ConfusionMatrix& confusion,
                     const std::vector<std::string>& names) {
    const int l = confusion.num_classes();
    auto name = [&](int j) {
        return j < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(j)]
                                                  : std::to_string(j);
    };
    std::printf("%14s", "true \\ pred");
    for (int j = 0; j < l; ++j) {
        std::printf(" %10s", name(j).c_str());
    }
    std::printf("\n");
    for (int i = 0; i < l; ++i) {
        std::printf("%14s", name(i).c_str());
        for (int j = 0; j < l; ++j) {
            std::printf(" %10d", confusion.counts(i, j));
        }
        std::printf("\n");
    }
}

void print_cv_report(const CvReport& report) {
    std::printf("%6s %5s %10s %9s\n", "trial", "fold", "best_pass", "accuracy");
    for (const CvFoldResult& fold : report.folds) {
        std::printf("%6d %5d %10d %9.4f\n", fold.trial + 1, fold.fold + 1,
                    fold.best_pass, fold.accuracy);
    }
    std::printf("mean accuracy %.4f +/- %.4f over %zu folds\n", report.mean_accuracy,
                report.std_accuracy, report.folds.size());
}

// --- train --------------------------------------------------------------

struct TrainArgs {
    DataOptions data;
    DataOptions test;  // optional validation/test set
    bool has_test = false;
    ModelOptions model;
    PreprocessOptions preprocess;
    std::string out = "model.json";
};

int cmd_train(const TrainArgs& args) {
    const LabeledDataset raw_train = load_any(args.data, nullptr);
    raw_train.require_all_classes_nonempty();
    const FittedPreprocess fitted = fit_preprocess(args.preprocess, raw_train.features());
    const LabeledDataset train = transformed(raw_train, fitted);

    std::optional<LabeledDataset> test;
    if (args.has_test) {
        DataOptions test_opts = args.test;
        test_opts.deskew = args.data.deskew;
        test_opts.pool = args.data.pool;
        const std::vector<std::string>* dict =
            raw_train.label_names().empty() ? nullptr : &raw_train.label_names();
        test = transformed(load_any(test_opts, dict), fitted);
        if (test->dim() != train.dim()) {
            throw SkemError("test feature count does not match the training data");
        }
    }
    const LabeledDataset* validation = test ? &*test : nullptr;

    const TrainConfig base = to_train_config(args.model);
    const int blocks = resolve_blocks(args.model, train.dim());
    const PartitionScheme scheme = parse_partition_scheme(args.model.scheme);

    ModelBundle bundle;
    bundle.label_names = raw_train.label_names();
    bundle.standardize = fitted.standardize;
    bundle.pca = fitted.pca;
    bundle.deskew = args.data.deskew;
    bundle.pool = args.data.pool;
    bundle.train_config = base;
    bundle.num_blocks = blocks;
    bundle.scheme = to_string(scheme);

    int best_pass = 0;
    if (blocks > 1) {
        PartitionTrainConfig config{base, blocks, scheme};
        const PartitionedTrainResult result = train_pskem(train, config, validation);
        bundle.kind = "pskem";
        bundle.partitioned = result.best_model;
        bundle.histories = result.block_histories;
        best_pass = result.best_pass;

        std::printf("%5s %16s %9s\n", "pass", "log_likelihood", "val_acc");
        for (std::size_t p = 0; p < result.block_histories.front().passes.size(); ++p) {
            double joint_ll = 0.0;
            for (const TrainHistory& history : result.block_histories) {
                joint_ll += history.passes[p].log_likelihood;
            }
            if (validation) {
                std::printf("%5zu %16.4f %9.4f\n", p + 1, joint_ll,
                            result.validation_accuracy[p]);
            } else {
                std::printf("%5zu %16.4f %9s\n", p + 1, joint_ll, "-");
            }
        }
    } else {
        const TrainResult result = train_skem(train, base, validation);
        bundle.kind = base.pooled_covariance ? "mda" : "skem";
        bundle.single = result.best_model;
        bundle.histories = {result.history};
        best_pass = result.best_pass;

        std::printf("%5s %16s %9s\n", "pass", "log_likelihood", "val_acc");
        for (const PassRecord& record : result.history.passes) {
            if (validation) {
                std::printf("%5d %16.4f %9.4f\n", record.pass, record.log_likelihood,
                            record.validation_accuracy);
            } else {
                std::printf("%5d %16.4f %9s\n", record.pass, record.log_likelihood, "-");
            }
        }
    }

    if (validation) {
        const double accuracy =
            bundle.partitioned ? evaluate(*bundle.partitioned, *test).second
                               : evaluate(*bundle.single, *test).second;
        std::printf("kept pass %d; test accuracy %.4f\n", best_pass, accuracy);
    } else {
        std::printf("kept pass %d (no validation set; final pass retained)\n", best_pass);
    }

    save_model(bundle, args.out);
    std::printf("wrote %s\n", args.out.c_str());
    return 0;
}

// --- eval ---------------------------------------------------------------

struct EvalArgs {
    std::string model;
    DataOptions data;
    std::string out;
};

int cmd_eval(const EvalArgs& args) {
    const ModelBundle bundle = load_model(args.model);

    DataOptions opts = args.data;
    opts.deskew = bundle.deskew;
    opts.pool = bundle.pool;
    const std::vector<std::string>* dict =
        bundle.label_names.empty() ? nullptr : &bundle.label_names;
    const LabeledDataset raw = load_any(opts, dict);
    if (raw.size() == 0) {
        throw SkemError("test set is empty");
    }

    const int expected_raw =
        bundle.standardize ? static_cast<int>(bundle.standardize->mean().size())
        : bundle.pca       ? bundle.pca->input_dim()
        : bundle.single    ? bundle.single->dim()
        : bundle.partitioned ? bundle.partitioned->dim()
                             : raw.dim();
    if (raw.dim() != expected_raw) {
        throw SkemError("test data has " + std::to_string(raw.dim()) +
                        " features, the model expects " + std::to_string(expected_raw));
    }
    const LabeledDataset test(bundle.preprocess(raw.features()), raw.labels(),
                              raw.num_classes(), raw.label_names());

    ConfusionMatrix confusion;
    double accuracy = 0.0;
    if (bundle.partitioned) {
        std::tie(confusion, accuracy) = evaluate(*bundle.partitioned, test);
    } else if (bundle.single) {
        std::tie(confusion, accuracy) = evaluate(*bundle.single, test);
    } else {
        throw SkemError("model file holds no classifier (kind '" + bundle.kind + "')");
    }

    print_confusion(confusion, bundle.label_names);
    std::printf("accuracy %.4f on %d samples\n", accuracy, test.size());
    if (!args.out.empty()) {
        save_evaluation_report(confusion, accuracy, bundle.label_names, args.out);
        std::printf("wrote %s\n", args.out.c_str());
    }
    return 0;
}

// --- cv -----------------------------------------------------------------

struct CvArgs {
    DataOptions data;
    ModelOptions model;
    bool standardize = false;
    int folds = 10;
    bool randomize = false;
    int trials = 1;
    int jobs = 1;
    std::string out;
};

int cmd_cv(const CvArgs& args) {
    const LabeledDataset data = load_any(args.data, nullptr);
    data.require_all_classes_nonempty();

    CvConfig config;
    config.train = to_train_config(args.model);
    config.folds = args.folds;
    config.randomize = args.randomize;
    config.trials = args.trials;
    config.jobs = args.jobs;
    config.standardize = args.standardize;
    config.num_blocks = resolve_blocks(args.model, data.dim());
    config.scheme = parse_partition_scheme(args.model.scheme);

    const CvReport report = cross_validate(data, config);
    print_cv_report(report);
    if (!args.out.empty()) {
        save_cv_report(report, args.out);
        std::printf("wrote %s\n", args.out.c_str());
    }
    return 0;
}

// --- sweep --------------------------------------------------------------

struct SweepArgs {
    DataOptions data;
    DataOptions test;
    PreprocessOptions preprocess;
    std::vector<int> k_values{4};
    std::vector<std::string> arrangements;  // "BLOCKSxDIM", e.g. 12x3
    std::vector<std::string> schemes{"seq"};
    int passes = 30;
    int trials = 1;
    std::uint64_t seed = 0;
    double init_low = -2.0, init_high = 2.0, init_sigma = 2.0;
    std::string cov = "full";
    int jobs = 1;
    std::string out;
};

struct SweepCell {
    int k = 0;
    int blocks = 1;
    PartitionScheme scheme = PartitionScheme::sequential;
    double accuracy_sum = 0.0, accuracy_sq_sum = 0.0, sharing_sum = 0.0;
};

std::pair<int, int> parse_arrangement(const std::string& text, int dim) {
    const auto x = text.find('x');
    if (x == std::string::npos) {
        throw SkemError("arrangement '" + text + "' is not of the form BLOCKSxDIM");
    }
    const int blocks = std::stoi(text.substr(0, x));
    const int block_dim = std::stoi(text.substr(x + 1));
    if (blocks < 1 || block_dim < 1 || blocks * block_dim != dim) {
        throw SkemError("arrangement '" + text + "' does not cover " +
                        std::to_string(dim) + " features");
    }
    return {blocks, block_dim};
}

int cmd_sweep(const SweepArgs& args) {
    const LabeledDataset raw_train = load_any(args.data, nullptr);
    raw_train.require_all_classes_nonempty();
    const FittedPreprocess fitted = fit_preprocess(args.preprocess, raw_train.features());
    const LabeledDataset train = transformed(raw_train, fitted);

    DataOptions test_opts = args.test;
    test_opts.deskew = args.data.deskew;
    test_opts.pool = args.data.pool;
    const std::vector<std::string>* dict =
        raw_train.label_names().empty() ? nullptr : &raw_train.label_names();
    const LabeledDataset test = transformed(load_any(test_opts, dict), fitted);
    if (test.dim() != train.dim()) {
        throw SkemError("test feature count does not match the training data");
    }

    std::vector<SweepCell> cells;
    for (int k : args.k_values) {
        for (const std::string& arrangement : args.arrangements) {
            const auto [blocks, block_dim] = parse_arrangement(arrangement, train.dim());
            (void)block_dim;
            for (const std::string& scheme_name : args.schemes) {
                SweepCell cell;
                cell.k = k;
                cell.blocks = blocks;
                cell.scheme = parse_partition_scheme(scheme_name);
                cells.push_back(cell);
            }
        }
    }
    if (cells.empty()) {
        throw SkemError("sweep grid is empty; pass --k and --arrangement");
    }

    // One task per (cell, trial); trial t trains with master seed + t.
    struct Task {
        std::size_t cell;
        int trial;
        double accuracy = 0.0, sharing = 0.0;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (int t = 0; t < args.trials; ++t) {
            tasks.push_back({c, t, 0.0, 0.0});
        }
    }

    auto run_task = [&](Task& task) {
        const SweepCell& cell = cells[task.cell];
        TrainConfig base;
        base.num_components = cell.k;
        base.passes = args.passes;
        base.seed = args.seed + static_cast<std::uint64_t>(task.trial);
        base.init_low = args.init_low;
        base.init_high = args.init_high;
        base.init_sigma = args.init_sigma;
        base.pooled_covariance = args.cov == "mda";
        if (cell.blocks > 1) {
            PartitionTrainConfig config{base, cell.blocks, cell.scheme};
            const PartitionedTrainResult result = train_pskem(train, config, &test);
            task.accuracy = evaluate(result.best_model, test).second;
            task.sharing = shared_proportion(result.model);
        } else {
            const TrainResult result = train_skem(train, base, &test);
            task.accuracy = evaluate(result.best_model, test).second;
            task.sharing = shared_proportion(result.model);
        }
    };

    const int jobs = std::max(1, std::min<int>(args.jobs, static_cast<int>(tasks.size())));
    if (jobs == 1) {
        for (Task& task : tasks) {
            run_task(task);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) {
                    return;
                }
                try {
                    run_task(tasks[i]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next.store(tasks.size());
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
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

    for (const Task& task : tasks) {
        cells[task.cell].accuracy_sum += task.accuracy;
        cells[task.cell].accuracy_sq_sum += task.accuracy * task.accuracy;
        cells[task.cell].sharing_sum += task.sharing;
    }

    const std::string header =
        "k,blocks,block_dim,scheme,trials,accuracy_mean,accuracy_std,shared_mean,"
        "ops_total,ops_cubic";
    std::vector<std::string> rows;
    std::printf("%4s %7s %10s %12s %7s %9s %9s %8s %11s %11s\n", "k", "blocks",
                "block_dim", "scheme", "trials", "acc_mean", "acc_std", "shared",
                "ops_total", "ops_cubic");
    for (const SweepCell& cell : cells) {
        const double n = args.trials;
        const double mean = cell.accuracy_sum / n;
        const double var =
            n > 1 ? std::max(0.0, (cell.accuracy_sq_sum - n * mean * mean) / (n - 1))
                  : 0.0;
        const double stddev = std::sqrt(var);
        const double sharing = cell.sharing_sum / n;
        const Partition partition =
            make_partition(train.dim(), cell.blocks, cell.scheme, args.seed);
        const OpCountEstimate ops =
            complexity_estimate(args.passes, cell.k, train.size(), partition);
        const int block_dim = train.dim() / cell.blocks;
        std::printf("%4d %7d %10d %12s %7d %9.4f %9.4f %8.4f %11.4g %11.4g\n", cell.k,
                    cell.blocks, block_dim, to_string(cell.scheme).c_str(), args.trials,
                    mean, stddev, sharing, ops.total, ops.cubic);
        char row[256];
        std::snprintf(row, sizeof(row), "%d,%d,%d,%s,%d,%.6f,%.6f,%.6f,%.6g,%.6g",
                      cell.k, cell.blocks, block_dim, to_string(cell.scheme).c_str(),
                      args.trials, mean, stddev, sharing, ops.total, ops.cubic);
        rows.push_back(row);
    }

    if (!args.out.empty()) {
        std::ofstream out(args.out);
        if (!out) {
            throw SkemError("cannot write " + args.out);
        }
        out << header << "\n";
        for (const std::string& row : rows) {
            out << row << "\n";
        }
        std::printf("wrote %s\n", args.out.c_str());
    }
    return 0;
}

// --- bench --------------------------------------------------------------

struct BenchArgs {
    std::string name;
    std::string data_dir = "data";
    int k = 0;           // 0: the benchmark's published setting
    int passes = 0;      // 0: published setting
    int trials = 0;      // 0: published setting
    int train_subset = 0;
    int blocks = 0;
    int pca = 0;
    std::uint64_t seed = 1;
    int jobs = 1;
};

int cmd_bench(const BenchArgs& args) {
    const bench::DatasetPaths paths = bench::locate_datasets(args.data_dir);
    auto value_or = [](int flag, int fallback) { return flag > 0 ? flag : fallback; };

    if (args.name == "rice") {
        if (!paths.has_rice()) {
            throw SkemError("rice.csv not found under " + args.data_dir);
        }
        const CvReport report = bench::run_rice_cv(
            paths.rice, value_or(args.k, 14), value_or(args.passes, 10),
            value_or(args.trials, 10), args.seed, args.jobs);
        print_cv_report(report);
        return 0;
    }
    if (args.name == "ionosphere") {
        if (!paths.has_ionosphere()) {
            throw SkemError("ionosphere.csv not found under " + args.data_dir);
        }
        const CvReport report = bench::run_ionosphere_cv(
            paths.ionosphere, value_or(args.k, 12), value_or(args.passes, 40),
            value_or(args.trials, 20), args.seed, args.jobs);
        print_cv_report(report);
        return 0;
    }
    if (args.name == "digits" || args.name == "mda" || args.name == "sharing") {
        if (!paths.has_mnist()) {
            throw SkemError("digit IDX files not found under " + args.data_dir +
                            "/mnist");
        }
        const bench::DeskData data = bench::load_mnist_desk(paths, 10000, 2000, 36);
        const int trials = value_or(args.trials, args.name == "mda" ? 10 : 5);
        if (args.name == "digits") {
            std::printf("%5s %11s %11s\n", "seed", "3x12_pskem", "1x36_skem");
            double split_sum = 0.0, full_sum = 0.0;
            for (int t = 0; t < trials; ++t) {
                const std::uint64_t seed = args.seed + static_cast<std::uint64_t>(t);
                const bench::TrendPair pair =
                    bench::run_desk_trend_pair(data, value_or(args.k, 12), seed);
                std::printf("%5llu %11.4f %11.4f\n",
                            static_cast<unsigned long long>(seed), pair.split_accuracy,
                            pair.full_accuracy);
                split_sum += pair.split_accuracy;
                full_sum += pair.full_accuracy;
            }
            std::printf(" mean %11.4f %11.4f\n", split_sum / trials, full_sum / trials);
        } else if (args.name == "mda") {
            std::printf("%5s %10s %10s\n", "seed", "full_cov", "pooled");
            double full_sum = 0.0, pooled_sum = 0.0;
            for (int t = 0; t < trials; ++t) {
                const std::uint64_t seed = args.seed + static_cast<std::uint64_t>(t);
                const bench::PooledPair pair =
                    bench::run_pooled_comparison_pair(data, value_or(args.k, 20), seed);
                std::printf("%5llu %10.4f %10.4f\n",
                            static_cast<unsigned long long>(seed),
                            pair.full_cov_accuracy, pair.pooled_cov_accuracy);
                full_sum += pair.full_cov_accuracy;
                pooled_sum += pair.pooled_cov_accuracy;
            }
            std::printf(" mean %10.4f %10.4f\n", full_sum / trials, pooled_sum / trials);
        } else {
            std::printf("%7s %3s %13s\n", "blocks", "k", "shared_mean");
            for (int blocks : {1, 3}) {
                for (int k : {4, 40}) {
                    double sum = 0.0;
                    for (int t = 0; t < trials; ++t) {
                        sum += bench::run_sharing_run(
                            data, blocks, k, args.seed + static_cast<std::uint64_t>(t),
                            blocks == 1 ? 40 : 30);
                    }
                    std::printf("%7d %3d %13.4f\n", blocks, k, sum / trials);
                }
            }
        }
        return 0;
    }
    if (args.name == "complexity") {
        const bench::TimingReport report = bench::run_complexity_benchmark(
            value_or(args.train_subset, 20000), value_or(args.k, 20),
            value_or(args.passes, 2), args.seed);
        std::printf("production trainer   : 1x36 %.4fs vs 12x3 %.4fs per pass (%.2fx)\n",
                    report.full_real_seconds, report.split_real_seconds,
                    report.real_ratio);
        std::printf("per-eval factorization: 1x36 %.4fs vs 12x3 %.4fs per pass (%.2fx)\n",
                    report.full_probe_seconds, report.split_probe_seconds,
                    report.probe_ratio);
        std::printf("op-count model       : %.4g vs %.4g ops per pass (%.2fx)\n",
                    report.full_ops.total, report.split_ops.total,
                    report.predicted_ratio);
        return 0;
    }
    if (args.name == "mnist") {
        if (!paths.has_mnist()) {
            throw SkemError("digit IDX files not found under " + args.data_dir +
                            "/mnist");
        }
        const bench::FullRunResult result = bench::run_mnist_full(
            paths, value_or(args.train_subset, 30000), value_or(args.k, 60),
            value_or(args.blocks, 3), value_or(args.pca, 39),
            value_or(args.passes, 30), args.seed);
        std::printf("best accuracy %.4f at pass %d; final accuracy %.4f\n",
                    result.best_accuracy, result.best_pass, result.final_accuracy);
        return 0;
    }
    throw SkemError("unknown benchmark '" + args.name +
                    "' (rice, ionosphere, digits, mda, sharing, complexity, mnist)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shared-kernel mixture classifiers: train, evaluate, cross-validate, "
                 "sweep and benchmark"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI file "
                                   "(defaults < config file < flags)");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "fit a model and save a bundle");
    train->option_defaults()->always_capture_default(true);
    add_data_options(train, train_args.data, "training data");
    train->add_option("--test", train_args.test.data,
                      "held-out data scored every pass; the best pass is kept");
    train->add_option("--test-labels", train_args.test.labels,
                      "IDX label file for --test");
    add_model_options(train, train_args.model);
    add_preprocess_options(train, train_args.preprocess);
    train->add_option("--out", train_args.out, "model bundle path");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "score a saved model on labeled data");
    eval->option_defaults()->always_capture_default(true);
    eval->add_option("--model", eval_args.model, "model bundle from train")->required();
    add_data_options(eval, eval_args.data, "test data");
    eval->add_option("--out", eval_args.out, "write a JSON evaluation report here");

    CvArgs cv_args;
    CLI::App* cv = app.add_subcommand("cv", "k-fold cross-validation");
    cv->option_defaults()->always_capture_default(true);
    add_data_options(cv, cv_args.data, "dataset");
    add_model_options(cv, cv_args.model);
    cv->add_flag("--standardize", cv_args.standardize,
                 "z-score per fold with the training split's statistics");
    cv->add_option("--folds", cv_args.folds, "number of folds")
        ->check(CLI::Range(2, 1000000));
    cv->add_flag("--randomize-folds", cv_args.randomize,
                 "shuffle samples into folds (seeded) instead of contiguous chunks");
    cv->add_option("--trials", cv_args.trials, "repetitions of the whole CV")
        ->check(CLI::PositiveNumber);
    cv->add_option("--jobs", cv_args.jobs, "parallel fold workers")
        ->check(CLI::PositiveNumber);
    cv->add_option("--out", cv_args.out, "write a JSON CV report here");

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand(
        "sweep", "grid of runs over components and partition arrangements");
    sweep->option_defaults()->always_capture_default(true);
    add_data_options(sweep, sweep_args.data, "training data");
    sweep->add_option("--test", sweep_args.test.data, "test data scored per run")
        ->required();
    sweep->add_option("--test-labels", sweep_args.test.labels,
                      "IDX label file for --test");
    add_preprocess_options(sweep, sweep_args.preprocess);
    sweep->add_option("--k", sweep_args.k_values, "component counts to sweep");
    sweep->add_option("--arrangement", sweep_args.arrangements,
                      "partition arrangements as BLOCKSxDIM (e.g. 12x3 36x1)")
        ->required();
    sweep->add_option("--scheme", sweep_args.schemes, "schemes to sweep");
    sweep->add_option("--passes", sweep_args.passes, "EM passes per run");
    sweep->add_option("--trials", sweep_args.trials,
                      "repeats per grid point; trial t uses seed+t");
    sweep->add_option("--seed", sweep_args.seed, "master seed");
    sweep->add_option("--init-low", sweep_args.init_low, "initial mean box, lower edge");
    sweep->add_option("--init-high", sweep_args.init_high,
                      "initial mean box, upper edge");
    sweep->add_option("--init-sigma", sweep_args.init_sigma,
                      "initial per-axis std deviation");
    sweep->add_option("--cov", sweep_args.cov, "covariance mode")
        ->check(CLI::IsMember({"full", "mda"}));
    sweep->add_option("--jobs", sweep_args.jobs, "parallel run workers")
        ->check(CLI::PositiveNumber);
    sweep->add_option("--out", sweep_args.out, "write the table as CSV here");

    BenchArgs bench_args;
    CLI::App* bench_cmd = app.add_subcommand("bench", "canned benchmark protocols");
    bench_cmd->option_defaults()->always_capture_default(true);
    bench_cmd
        ->add_option("name", bench_args.name,
                     "rice | ionosphere | digits | mda | sharing | complexity | mnist")
        ->required();
    bench_cmd->add_option("--data-dir", bench_args.data_dir,
                          "directory holding rice.csv, ionosphere.csv, mnist/");
    bench_cmd->add_option("--k", bench_args.k, "override mixture components");
    bench_cmd->add_option("--passes", bench_args.passes, "override EM passes");
    bench_cmd->add_option("--trials", bench_args.trials, "override trials/seeds");
    bench_cmd->add_option("--train-subset", bench_args.train_subset,
                          "override training sample count");
    bench_cmd->add_option("--blocks", bench_args.blocks, "override feature blocks");
    bench_cmd->add_option("--pca", bench_args.pca, "override PCA rank");
    bench_cmd->add_option("--seed", bench_args.seed, "master seed");
    bench_cmd->add_option("--jobs", bench_args.jobs, "parallel workers where supported");

    CLI11_PARSE(app, argc, argv);
    train_args.has_test = !train_args.test.data.empty();

    echo_config(app);
    try {
        if (*train) {
            return cmd_train(train_args);
        }
        if (*eval) {
            return cmd_eval(eval_args);
        }
        if (*cv) {
            return cmd_cv(cv_args);
        }
        if (*sweep) {
            return cmd_sweep(sweep_args);
        }
        if (*bench_cmd) {
            return cmd_bench(bench_args);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
