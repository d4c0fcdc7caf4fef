#pragma once

#include "skem/em.hpp"
#include "skem/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace skem {

enum class PartitionScheme {
    sequential,   // contiguous runs of columns
    interleaved,  // block r takes columns r, r+R, r+2R, ...
    random,       // seeded shuffle of the columns, then contiguous runs
};

PartitionScheme parse_partition_scheme(const std::string& name);
std::string to_string(PartitionScheme scheme);

/// Disjoint feature blocks covering columns 0..dim-1.
struct Partition {
    int dim = 0;
    std::vector<std::vector<int>> blocks;

    int num_blocks() const { return static_cast<int>(blocks.size()); }
    int block_dim(int r) const { return static_cast<int>(blocks.at(r).size()); }
};

/// Seed stream used for the random scheme's shuffle; outside the range of
/// block index streams so the shuffle never collides with block inits.
inline constexpr std::uint64_t kShuffleStream = std::uint64_t{1} << 32;

/// Splits dim columns into num_blocks blocks under the given scheme.
/// When the division is uneven, the last sequential/random block absorbs
/// the remainder; interleaving spreads it by construction. The seed only
/// matters for random.
Partition make_partition(int dim, int num_blocks, PartitionScheme scheme,
                         std::uint64_t seed = 0);

/// One shared-kernel model per feature block. Classification sums the
/// blocks' class-conditional log-densities, which treats the blocks as
/// independent given the class.
class PartitionedModel {
public:
    PartitionedModel(Partition partition, std::vector<SharedKernelModel> blocks);

    int dim() const { return partition_.dim; }
    int num_blocks() const { return partition_.num_blocks(); }
    int num_classes() const { return blocks_.empty() ? 0 : blocks_.front().num_classes(); }
    int components_per_block() const {
        return blocks_.empty() ? 0 : blocks_.front().num_components();
    }

    const Partition& partition() const { return partition_; }
    const std::vector<SharedKernelModel>& blocks() const { return blocks_; }
    const SharedKernelModel& block(int r) const { return blocks_.at(r); }

private:
    Partition partition_;
    std::vector<SharedKernelModel> blocks_;
};

struct PartitionTrainConfig {
    TrainConfig base;  // per-block EM settings; seed is the master seed
    int num_blocks = 1;
    PartitionScheme scheme = PartitionScheme::sequential;
    // Lockstep advances every block one pass, then scores the joint
    // classifier on the validation set; best-pass selection needs it.
    // When off, each block trains to completion independently (optionally
    // across worker threads) and only the final model is scored.
    bool lockstep = true;
    int jobs = 1;  // worker threads for the independent (non-lockstep) mode
};

struct PartitionedTrainResult {
    PartitionedModel model;       // all blocks after the final pass
    PartitionedModel best_model;  // blocks from the pass with the highest joint
                                  // validation accuracy; == model when untracked
    int best_pass = 0;
    std::vector<TrainHistory> block_histories;
    std::vector<double> validation_accuracy;  // per pass, joint classifier
};

/// Trains the blocks' EM runs in lockstep: every block advances one pass,
/// then the joint classifier is scored on the validation set (when given).
/// Block r draws its initialization from seed stream r, so a one-block
/// partition reproduces the unpartitioned trainer bit for bit.
PartitionedTrainResult train_pskem(const LabeledDataset& data,
                                   const PartitionTrainConfig& config,
                                   const LabeledDataset* validation = nullptr);

/// Expands a partitioned model into the equivalent single model on the
/// full feature space: K^R components indexed by block-component tuples
/// (last block fastest), weights the products of the blocks' weights,
/// means scattered back to original column positions, covariances the
/// matching block-diagonal direct sums. Throws SkemError when K^R
/// exceeds 10^5 (a desk-scale cross-check, not a production path).
SharedKernelModel expand_joint(const PartitionedModel& model);

/// Floating-point work model for an EM run: passes * K * N * (2 + M + M^2 + g(M))
/// with g(M) = M^3 for the per-sample covariance factorization work.
struct OpCountEstimate {
    double total = 0.0;
    double cubic = 0.0;  // the g(M) term alone
};

OpCountEstimate complexity_estimate(int passes, int num_components, int num_samples,
                                    int dim);

/// Sum of per-block estimates; same K and pass count in every block.
OpCountEstimate complexity_estimate(int passes, int num_components, int num_samples,
                                    const Partition& partition);

}  // namespace skem
