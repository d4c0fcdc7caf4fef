#pragma once

#include "skem/classifier.hpp"
#include "skem/em.hpp"
#include "skem/model.hpp"
#include "skem/partition.hpp"
#include "skem/preprocess.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace skem {

/// Column layout of a delimited text file.
struct DelimitedSchema {
    char delimiter = ',';
    int label_column = -1;  // 0-based; -1 means the last column
    bool has_header = false;
    std::vector<int> feature_columns;  // empty: every non-label column, in order
};

/// Parses a delimited file into features + labels. Distinct label strings
/// are sorted and mapped to 0..L-1; the dataset keeps the dictionary.
/// When label_dictionary is given (scoring new data against a trained
/// model), labels are mapped through it instead and an unseen label is an
/// error. Ragged rows and non-numeric feature cells report the file line.
LabeledDataset load_delimited(const std::string& path, const DelimitedSchema& schema = {},
                              const std::vector<std::string>* label_dictionary = nullptr);

/// Raw unsigned-byte image stack from an IDX file (row-major pixels).
struct IdxImages {
    int count = 0;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;

    Matrix image(int n) const;  // height x width, values 0..255
};

IdxImages load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);

/// Loads an image/label pair and checks the counts agree.
std::pair<IdxImages, std::vector<int>> load_idx(const std::string& images_path,
                                                const std::string& labels_path);

/// Writers for the same format (fixtures, converted datasets).
void save_idx_images(const IdxImages& images, const std::string& path);
void save_idx_labels(const std::vector<int>& labels, const std::string& path);

/// Image stack -> one feature row per image: optional deskew, optional
/// pool x pool block-average downscale, range scaling to [0,1], then a
/// row-major flatten.
Matrix images_to_features(const IdxImages& images, bool deskew, int pool);

/// Everything needed to run a trained classifier later: the model, the
/// label dictionary, and the fitted preprocessing chain.
struct ModelBundle {
    int version = 1;
    std::string kind;  // "skem" | "pskem" | "mda" | "standard-em"

    std::optional<SharedKernelModel> single;       // skem / mda
    std::optional<PartitionedModel> partitioned;   // pskem
    std::optional<MixtureModel> mixture;           // standard-em

    std::vector<std::string> label_names;
    std::optional<StandardizeTransform> standardize;
    std::optional<PcaTransform> pca;
    bool deskew = false;
    int pool = 1;  // image downscale factor applied before feature extraction

    TrainConfig train_config;
    int num_blocks = 1;
    std::string scheme = "sequential";

    std::vector<TrainHistory> histories;  // one per block

    /// Standardize + PCA on already-vectorized feature rows. The
    /// image-space steps (deskew, pooling, range scaling) happen upstream
    /// where the image geometry is known, steered by the stored flags.
    Matrix preprocess(const Matrix& features) const;
};

/// JSON on disk, with doubles emitted at full round-trip precision so a
/// save/load cycle is numerically exact.
void save_model(const ModelBundle& bundle, const std::string& path);

/// Loads and re-validates; rejects unsupported versions and any bundle
/// violating the model invariants.
ModelBundle load_model(const std::string& path);

/// Report serialization (JSON).
void save_evaluation_report(const ConfusionMatrix& confusion, double accuracy,
                            const std::vector<std::string>& label_names,
                            const std::string& path);
void save_cv_report(const CvReport& report, const std::string& path);

}  // namespace skem
