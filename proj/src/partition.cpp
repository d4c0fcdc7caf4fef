#include "skem/partition.hpp"

#include "skem/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <utility>

namespace skem {

PartitionScheme parse_partition_scheme(const std::string& name) {
    if (name == "sequential" || name == "seq") {
        return PartitionScheme::sequential;
    }
    if (name == "interleaved" || name == "inter") {
        return PartitionScheme::interleaved;
    }
    if (name == "random" || name == "rand") {
        return PartitionScheme::random;
    }
    throw std::invalid_argument("unknown partition scheme: " + name);
}

std::string to_string(PartitionScheme scheme) {
    switch (scheme) {
        case PartitionScheme::sequential:
            return "sequential";
        case PartitionScheme::interleaved:
            return "interleaved";
        case PartitionScheme::random:
            return "random";
    }
    throw std::invalid_argument("bad PartitionScheme value");
}

Partition make_partition(int dim, int num_blocks, PartitionScheme scheme,
                         std::uint64_t seed) {
    if (dim < 1) {
        throw std::invalid_argument("make_partition: dim must be positive");
    }
    if (num_blocks < 1 || num_blocks > dim) {
        throw std::invalid_argument("make_partition: need 1 <= blocks <= dim");
    }
    Partition partition;
    partition.dim = dim;
    partition.blocks.resize(static_cast<std::size_t>(num_blocks));

    const int base = dim / num_blocks;
    // The last block absorbs any remainder (paper-style equal blocks when
    // the division is even).
    auto block_size = [&](int r) {
        return (r == num_blocks - 1) ? dim - base * (num_blocks - 1) : base;
    };

    switch (scheme) {
        case PartitionScheme::sequential: {
            int next = 0;
            for (int r = 0; r < num_blocks; ++r) {
                for (int i = 0; i < block_size(r); ++i) {
                    partition.blocks[static_cast<std::size_t>(r)].push_back(next++);
                }
            }
            break;
        }
        case PartitionScheme::interleaved: {
            for (int c = 0; c < dim; ++c) {
                partition.blocks[static_cast<std::size_t>(c % num_blocks)].push_back(c);
            }
            break;
        }
        case PartitionScheme::random: {
            std::vector<int> order(static_cast<std::size_t>(dim));
            std::iota(order.begin(), order.end(), 0);
            // Fisher-Yates with raw engine draws; std::shuffle's draw
            // sequence is implementation-defined, this one is not.
            std::mt19937_64 rng(derive_seed(seed, kShuffleStream));
            for (int i = dim - 1; i > 0; --i) {
                const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
                std::swap(order[static_cast<std::size_t>(i)],
                          order[static_cast<std::size_t>(j)]);
            }
            int next = 0;
            for (int r = 0; r < num_blocks; ++r) {
                auto& block = partition.blocks[static_cast<std::size_t>(r)];
                for (int i = 0; i < block_size(r); ++i) {
                    block.push_back(order[static_cast<std::size_t>(next++)]);
                }
                std::sort(block.begin(), block.end());
            }
            break;
        }
    }
    return partition;
}

PartitionedModel::PartitionedModel(Partition partition,
                                   std::vector<SharedKernelModel> blocks)
    : partition_(std::move(partition)), blocks_(std::move(blocks)) {
    if (blocks_.size() != partition_.blocks.size() || blocks_.empty()) {
        throw std::invalid_argument("PartitionedModel: one model per block required");
    }
    for (std::size_t r = 0; r < blocks_.size(); ++r) {
        if (blocks_[r].dim() != static_cast<int>(partition_.blocks[r].size())) {
            throw std::invalid_argument("PartitionedModel: block " + std::to_string(r) +
                                        " dimension mismatch");
        }
        if (blocks_[r].num_classes() != blocks_.front().num_classes()) {
            throw std::invalid_argument("PartitionedModel: blocks disagree on class count");
        }
    }
}

PartitionedTrainResult train_pskem(const LabeledDataset& data,
                                   const PartitionTrainConfig& config,
                                   const LabeledDataset* validation) {
    const Partition partition = make_partition(data.dim(), config.num_blocks,
                                               config.scheme, config.base.seed);
    const int num_blocks = partition.num_blocks();

    std::vector<SkemTrainer> trainers;
    std::vector<LabeledDataset> validation_slices;
    trainers.reserve(static_cast<std::size_t>(num_blocks));
    for (int r = 0; r < num_blocks; ++r) {
        TrainConfig block_config = config.base;
        block_config.seed_stream = static_cast<std::uint64_t>(r);
        trainers.emplace_back(data.slice_columns(partition.blocks[static_cast<std::size_t>(r)]),
                              block_config);
        if (validation != nullptr) {
            validation_slices.push_back(
                validation->slice_columns(partition.blocks[static_cast<std::size_t>(r)]));
        }
    }

    auto assemble = [&]() {
        std::vector<SharedKernelModel> blocks;
        blocks.reserve(trainers.size());
        for (const auto& t : trainers) {
            blocks.push_back(t.model());
        }
        return PartitionedModel(partition, std::move(blocks));
    };
    auto step_block = [&](int r) {
        try {
            return trainers[static_cast<std::size_t>(r)].step();
        } catch (const SkemError& e) {
            throw SkemError("block " + std::to_string(r) + ": " + e.what());
        }
    };

    PartitionedTrainResult result{assemble(), assemble(), 0, {}, {}};
    result.block_histories.resize(static_cast<std::size_t>(num_blocks));

    if (config.lockstep) {
        // Blocks advance in lockstep so "pass p of the joint model" is well
        // defined; the validation score is always the joint classifier's.
        double best_accuracy = -1.0;
        for (int p = 0; p < config.base.passes; ++p) {
            for (int r = 0; r < num_blocks; ++r) {
                result.block_histories[static_cast<std::size_t>(r)].passes.push_back(
                    step_block(r));
            }
            PartitionedModel current = assemble();
            if (validation != nullptr) {
                const double accuracy = evaluate(current, *validation).second;
                result.validation_accuracy.push_back(accuracy);
                if (accuracy > best_accuracy) {
                    best_accuracy = accuracy;
                    result.best_pass = p + 1;
                    result.best_model = current;
                }
            }
            result.model = std::move(current);
        }
        if (validation == nullptr) {
            result.best_model = result.model;
        }
        return result;
    }

    // Independent mode: every block trains to completion on its own,
    // optionally across worker threads. Blocks share no state, and each
    // history lands in its own slot, so the outcome does not depend on
    // scheduling.
    auto run_block = [&](int r) {
        for (int p = 0; p < config.base.passes; ++p) {
            result.block_histories[static_cast<std::size_t>(r)].passes.push_back(
                step_block(r));
        }
    };
    const int jobs = std::max(1, std::min(config.jobs, num_blocks));
    if (jobs == 1) {
        for (int r = 0; r < num_blocks; ++r) {
            run_block(r);
        }
    } else {
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&]() {
            while (true) {
                const int r = next.fetch_add(1);
                if (r >= num_blocks) {
                    return;
                }
                try {
                    run_block(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next.store(num_blocks);
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
    result.model = assemble();
    result.best_model = result.model;
    if (validation != nullptr) {
        result.validation_accuracy.push_back(evaluate(result.model, *validation).second);
        result.best_pass = config.base.passes;
    }
    return result;
}

SharedKernelModel expand_joint(const PartitionedModel& model) {
    const int num_blocks = model.num_blocks();
    const int dim = model.dim();
    const int num_classes = model.num_classes();

    double combos = 1.0;
    for (int r = 0; r < num_blocks; ++r) {
        combos *= model.block(r).num_components();
        if (combos > 1e5) {
            throw SkemError("expand_joint: component product exceeds 1e5");
        }
    }
    const int total = static_cast<int>(combos);

    std::vector<GaussianComponent> components;
    components.reserve(static_cast<std::size_t>(total));
    Matrix weights = Matrix::Ones(num_classes, total);

    std::vector<int> tuple(static_cast<std::size_t>(num_blocks), 0);
    for (int c = 0; c < total; ++c) {
        Vector mean = Vector::Zero(dim);
        Matrix cov = Matrix::Zero(dim, dim);
        for (int r = 0; r < num_blocks; ++r) {
            const auto& cols = model.partition().blocks[static_cast<std::size_t>(r)];
            const auto& comp = model.block(r).component(tuple[static_cast<std::size_t>(r)]);
            for (std::size_t i = 0; i < cols.size(); ++i) {
                mean[cols[i]] = comp.mean()[static_cast<Eigen::Index>(i)];
                for (std::size_t j = 0; j < cols.size(); ++j) {
                    cov(cols[i], cols[j]) =
                        comp.covariance()(static_cast<Eigen::Index>(i),
                                          static_cast<Eigen::Index>(j));
                }
            }
            for (int l = 0; l < num_classes; ++l) {
                weights(l, c) *= model.block(r).weights()(l, tuple[static_cast<std::size_t>(r)]);
            }
        }
        components.emplace_back(std::move(mean), std::move(cov));

        // Odometer over block component tuples, last block fastest.
        int pos = num_blocks - 1;
        while (pos >= 0 &&
               ++tuple[static_cast<std::size_t>(pos)] == model.block(pos).num_components()) {
            tuple[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
    }
    return SharedKernelModel(std::move(components), std::move(weights));
}

OpCountEstimate complexity_estimate(int passes, int num_components, int num_samples,
                                    int dim) {
    if (passes < 1 || num_components < 1 || num_samples < 1 || dim < 1) {
        throw std::invalid_argument("complexity_estimate: all counts must be positive");
    }
    const double np = passes;
    const double k = num_components;
    const double n = num_samples;
    const double m = dim;
    OpCountEstimate estimate;
    estimate.cubic = np * k * n * m * m * m;
    estimate.total = np * k * n * (2.0 + m + m * m) + estimate.cubic;
    return estimate;
}

OpCountEstimate complexity_estimate(int passes, int num_components, int num_samples,
                                    const Partition& partition) {
    OpCountEstimate sum;
    for (int r = 0; r < partition.num_blocks(); ++r) {
        const OpCountEstimate block =
            complexity_estimate(passes, num_components, num_samples, partition.block_dim(r));
        sum.total += block.total;
        sum.cubic += block.cubic;
    }
    return sum;
}

}  // namespace skem
