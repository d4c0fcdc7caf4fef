#include "skem/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace skem {

using nlohmann::json;

namespace {

std::string trimmed(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, delimiter)) {
        cells.push_back(trimmed(cell));
    }
    if (!line.empty() && line.back() == delimiter) {
        cells.push_back("");
    }
    return cells;
}

double parse_double(const std::string& cell, const std::string& path, int line_number) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') {
        ++first;  // from_chars rejects an explicit plus sign
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || first == last) {
        throw SkemError(path + ":" + std::to_string(line_number) +
                        ": non-numeric feature value '" + cell + "'");
    }
    if (!std::isfinite(value)) {
        throw SkemError(path + ":" + std::to_string(line_number) +
                        ": non-finite feature value '" + cell + "'");
    }
    return value;
}

}  // namespace

LabeledDataset load_delimited(const std::string& path, const DelimitedSchema& schema,
                              const std::vector<std::string>* label_dictionary) {
    std::ifstream file(path);
    if (!file) {
        throw SkemError("cannot open " + path);
    }

    std::vector<std::vector<double>> feature_rows;
    std::vector<std::string> raw_labels;
    std::vector<int> row_lines;  // original file line of each data row
    std::string line;
    int line_number = 0;
    int expected_cells = -1;
    int label_column = schema.label_column;
    std::vector<int> feature_columns = schema.feature_columns;

    while (std::getline(file, line)) {
        ++line_number;
        if (line_number == 1 && schema.has_header) {
            continue;
        }
        if (trimmed(line).empty()) {
            continue;
        }
        const std::vector<std::string> cells = split_line(line, schema.delimiter);
        if (expected_cells < 0) {
            expected_cells = static_cast<int>(cells.size());
            if (label_column < 0) {
                label_column = expected_cells - 1;
            }
            if (label_column >= expected_cells) {
                throw SkemError(path + ": label column " + std::to_string(label_column) +
                                " outside the " + std::to_string(expected_cells) +
                                " columns present");
            }
            if (feature_columns.empty()) {
                for (int c = 0; c < expected_cells; ++c) {
                    if (c != label_column) {
                        feature_columns.push_back(c);
                    }
                }
            }
            for (int c : feature_columns) {
                if (c < 0 || c >= expected_cells || c == label_column) {
                    throw SkemError(path + ": bad feature column " + std::to_string(c));
                }
            }
        } else if (static_cast<int>(cells.size()) != expected_cells) {
            throw SkemError(path + ":" + std::to_string(line_number) + ": expected " +
                            std::to_string(expected_cells) + " columns, found " +
                            std::to_string(cells.size()));
        }
        std::vector<double> row;
        row.reserve(feature_columns.size());
        for (int c : feature_columns) {
            row.push_back(parse_double(cells[static_cast<std::size_t>(c)], path, line_number));
        }
        feature_rows.push_back(std::move(row));
        raw_labels.push_back(cells[static_cast<std::size_t>(label_column)]);
        row_lines.push_back(line_number);
    }
    if (feature_rows.empty()) {
        throw SkemError(path + ": no data rows");
    }

    // Label mapping: either the caller's dictionary, or the sorted set of
    // distinct strings seen here.
    std::vector<std::string> names;
    std::map<std::string, int> index_of;
    if (label_dictionary != nullptr) {
        names = *label_dictionary;
        for (std::size_t i = 0; i < names.size(); ++i) {
            index_of[names[i]] = static_cast<int>(i);
        }
    } else {
        for (const auto& s : raw_labels) {
            index_of.emplace(s, 0);
        }
        for (auto& [name, idx] : index_of) {
            idx = static_cast<int>(names.size());
            names.push_back(name);
        }
    }

    std::vector<int> labels;
    labels.reserve(raw_labels.size());
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
        const auto it = index_of.find(raw_labels[i]);
        if (it == index_of.end()) {
            throw SkemError(path + ":" + std::to_string(row_lines[i]) +
                            ": unknown label '" + raw_labels[i] +
                            "' not in the model's dictionary");
        }
        labels.push_back(it->second);
    }

    Matrix features(static_cast<Eigen::Index>(feature_rows.size()),
                    static_cast<Eigen::Index>(feature_columns.size()));
    for (std::size_t n = 0; n < feature_rows.size(); ++n) {
        for (std::size_t c = 0; c < feature_rows[n].size(); ++c) {
            features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)) =
                feature_rows[n][c];
        }
    }
    return LabeledDataset(std::move(features), std::move(labels),
                          static_cast<int>(names.size()), std::move(names));
}

namespace {

constexpr std::uint32_t kIdxImagesMagic = 2051;
constexpr std::uint32_t kIdxLabelsMagic = 2049;

std::uint32_t read_be32(std::istream& stream, const std::string& path) {
    unsigned char bytes[4];
    stream.read(reinterpret_cast<char*>(bytes), 4);
    if (!stream) {
        throw SkemError(path + ": truncated file");
    }
    return (static_cast<std::uint32_t>(bytes[0]) << 24) |
           (static_cast<std::uint32_t>(bytes[1]) << 16) |
           (static_cast<std::uint32_t>(bytes[2]) << 8) |
           static_cast<std::uint32_t>(bytes[3]);
}

void write_be32(std::ostream& stream, std::uint32_t value) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(value >> 24),
        static_cast<unsigned char>(value >> 16),
        static_cast<unsigned char>(value >> 8),
        static_cast<unsigned char>(value),
    };
    stream.write(reinterpret_cast<const char*>(bytes), 4);
}

}  // namespace

IdxImages load_idx_images(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw SkemError("cannot open " + path);
    }
    if (read_be32(file, path) != kIdxImagesMagic) {
        throw SkemError(path + ": bad magic number, not an IDX image file");
    }
    IdxImages images;
    images.count = static_cast<int>(read_be32(file, path));
    images.height = static_cast<int>(read_be32(file, path));
    images.width = static_cast<int>(read_be32(file, path));
    const std::size_t total = static_cast<std::size_t>(images.count) *
                              static_cast<std::size_t>(images.height) *
                              static_cast<std::size_t>(images.width);
    images.pixels.resize(total);
    file.read(reinterpret_cast<char*>(images.pixels.data()),
              static_cast<std::streamsize>(total));
    if (file.gcount() != static_cast<std::streamsize>(total)) {
        throw SkemError(path + ": truncated file");
    }
    return images;
}

std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw SkemError("cannot open " + path);
    }
    if (read_be32(file, path) != kIdxLabelsMagic) {
        throw SkemError(path + ": bad magic number, not an IDX label file");
    }
    const auto count = read_be32(file, path);
    std::vector<unsigned char> raw(count);
    file.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (file.gcount() != static_cast<std::streamsize>(count)) {
        throw SkemError(path + ": truncated file");
    }
    return std::vector<int>(raw.begin(), raw.end());
}

std::pair<IdxImages, std::vector<int>> load_idx(const std::string& images_path,
                                                const std::string& labels_path) {
    IdxImages images = load_idx_images(images_path);
    std::vector<int> labels = load_idx_labels(labels_path);
    if (static_cast<std::size_t>(images.count) != labels.size()) {
        throw SkemError("image count " + std::to_string(images.count) +
                        " does not match label count " + std::to_string(labels.size()));
    }
    return {std::move(images), std::move(labels)};
}

Matrix IdxImages::image(int n) const {
    if (n < 0 || n >= count) {
        throw std::invalid_argument("IdxImages::image: index out of range");
    }
    Matrix out(height, width);
    const std::size_t offset = static_cast<std::size_t>(n) *
                               static_cast<std::size_t>(height) *
                               static_cast<std::size_t>(width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            out(y, x) = static_cast<double>(
                pixels[offset + static_cast<std::size_t>(y) * width + x]);
        }
    }
    return out;
}

void save_idx_images(const IdxImages& images, const std::string& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw SkemError("cannot open " + path + " for writing");
    }
    write_be32(file, kIdxImagesMagic);
    write_be32(file, static_cast<std::uint32_t>(images.count));
    write_be32(file, static_cast<std::uint32_t>(images.height));
    write_be32(file, static_cast<std::uint32_t>(images.width));
    file.write(reinterpret_cast<const char*>(images.pixels.data()),
               static_cast<std::streamsize>(images.pixels.size()));
    if (!file) {
        throw SkemError("failed writing " + path);
    }
}

void save_idx_labels(const std::vector<int>& labels, const std::string& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw SkemError("cannot open " + path + " for writing");
    }
    write_be32(file, kIdxLabelsMagic);
    write_be32(file, static_cast<std::uint32_t>(labels.size()));
    for (int label : labels) {
        if (label < 0 || label > 255) {
            throw SkemError("IDX labels must fit one byte");
        }
        const auto byte = static_cast<unsigned char>(label);
        file.write(reinterpret_cast<const char*>(&byte), 1);
    }
    if (!file) {
        throw SkemError("failed writing " + path);
    }
}

Matrix images_to_features(const IdxImages& images, bool deskew_images, int pool) {
    if (images.count == 0) {
        throw std::invalid_argument("images_to_features: empty image stack");
    }
    if (pool < 1) {
        throw std::invalid_argument("images_to_features: pool factor must be positive");
    }
    const int height = images.height / pool;
    const int width = images.width / pool;
    Matrix features(images.count, height * width);
    for (int n = 0; n < images.count; ++n) {
        Matrix img = images.image(n);
        if (deskew_images) {
            img = deskew(img);
        }
        if (pool > 1) {
            img = average_pool(img, pool);
        }
        img = range_scale(img);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                features(n, y * width + x) = img(y, x);
            }
        }
    }
    return features;
}

namespace {

json to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v[i]);
    }
    return out;
}

json to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

Vector vector_from_json(const json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
    }
    return v;
}

Matrix matrix_from_json(const json& j) {
    if (j.empty()) {
        throw SkemError("model file: empty matrix");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw SkemError("model file: ragged matrix");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return m;
}

json model_to_json(const SharedKernelModel& model) {
    json components = json::array();
    for (const auto& comp : model.components()) {
        components.push_back({
            {"mean", to_json(comp.mean())},
            {"covariance", to_json(comp.covariance())},
        });
    }
    return {{"components", std::move(components)}, {"weights", to_json(model.weights())}};
}

SharedKernelModel model_from_json(const json& j) {
    std::vector<GaussianComponent> components;
    for (const json& comp : j.at("components")) {
        try {
            components.emplace_back(vector_from_json(comp.at("mean")),
                                    matrix_from_json(comp.at("covariance")));
        } catch (const SkemError& e) {
            throw SkemError(std::string("model file: invalid component: ") + e.what());
        }
    }
    SharedKernelModel model(std::move(components), matrix_from_json(j.at("weights")));
    if (const auto problem = validate(model)) {
        throw SkemError("model file: " + *problem);
    }
    return model;
}

json history_to_json(const TrainHistory& history) {
    json passes = json::array();
    for (const auto& record : history.passes) {
        passes.push_back({
            {"pass", record.pass},
            {"log_likelihood", record.log_likelihood},
            {"validation_accuracy", record.validation_accuracy},
        });
    }
    return {{"passes", std::move(passes)}};
}

TrainHistory history_from_json(const json& j) {
    TrainHistory history;
    for (const json& p : j.at("passes")) {
        PassRecord record;
        record.pass = p.at("pass").get<int>();
        record.log_likelihood = p.at("log_likelihood").get<double>();
        record.validation_accuracy = p.at("validation_accuracy").get<double>();
        history.passes.push_back(record);
    }
    return history;
}

}  // namespace

Matrix ModelBundle::preprocess(const Matrix& features) const {
    Matrix out = features;
    if (standardize) {
        out = standardize->apply(out);
    }
    if (pca) {
        out = pca->project(out);
    }
    return out;
}

void save_model(const ModelBundle& bundle, const std::string& path) {
    json j;
    j["format"] = "skem-model";
    j["version"] = bundle.version;
    j["kind"] = bundle.kind;
    j["label_names"] = bundle.label_names;
    j["deskew"] = bundle.deskew;
    j["pool"] = bundle.pool;
    j["num_blocks"] = bundle.num_blocks;
    j["scheme"] = bundle.scheme;

    j["train_config"] = {
        {"num_components", bundle.train_config.num_components},
        {"passes", bundle.train_config.passes},
        {"seed", bundle.train_config.seed},
        {"seed_stream", bundle.train_config.seed_stream},
        {"init_low", bundle.train_config.init_low},
        {"init_high", bundle.train_config.init_high},
        {"init_sigma", bundle.train_config.init_sigma},
        {"pooled_covariance", bundle.train_config.pooled_covariance},
    };

    if (bundle.single) {
        j["model"] = model_to_json(*bundle.single);
    }
    if (bundle.partitioned) {
        json blocks = json::array();
        for (const auto& block : bundle.partitioned->blocks()) {
            blocks.push_back(model_to_json(block));
        }
        j["partition"] = {
            {"dim", bundle.partitioned->partition().dim},
            {"blocks", bundle.partitioned->partition().blocks},
        };
        j["blocks"] = std::move(blocks);
    }
    if (bundle.mixture) {
        json components = json::array();
        for (const auto& comp : bundle.mixture->components) {
            components.push_back({
                {"mean", to_json(comp.mean())},
                {"covariance", to_json(comp.covariance())},
            });
        }
        j["mixture"] = {{"components", std::move(components)},
                        {"weights", to_json(bundle.mixture->weights)}};
    }

    if (bundle.standardize) {
        j["standardize"] = {{"mean", to_json(bundle.standardize->mean())},
                            {"std", to_json(bundle.standardize->std())}};
    }
    if (bundle.pca) {
        j["pca"] = {{"mean", to_json(bundle.pca->mean())},
                    {"basis", to_json(bundle.pca->basis())},
                    {"singular_values", to_json(bundle.pca->singular_values())}};
    }

    json histories = json::array();
    for (const auto& history : bundle.histories) {
        histories.push_back(history_to_json(history));
    }
    j["histories"] = std::move(histories);

    std::ofstream file(path);
    if (!file) {
        throw SkemError("cannot open " + path + " for writing");
    }
    file << j.dump(2) << '\n';
    if (!file) {
        throw SkemError("failed writing " + path);
    }
}

ModelBundle load_model(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        throw SkemError("cannot open " + path);
    }
    json j;
    try {
        file >> j;
    } catch (const json::exception& e) {
        throw SkemError(path + ": not a valid model file: " + e.what());
    }
    if (j.value("format", "") != "skem-model") {
        throw SkemError(path + ": not a model file");
    }
    ModelBundle bundle;
    bundle.version = j.at("version").get<int>();
    if (bundle.version != 1) {
        throw SkemError(path + ": unsupported model format version " +
                        std::to_string(bundle.version));
    }
    bundle.kind = j.at("kind").get<std::string>();
    bundle.label_names = j.at("label_names").get<std::vector<std::string>>();
    bundle.deskew = j.at("deskew").get<bool>();
    bundle.pool = j.at("pool").get<int>();
    bundle.num_blocks = j.at("num_blocks").get<int>();
    bundle.scheme = j.at("scheme").get<std::string>();

    const json& tc = j.at("train_config");
    bundle.train_config.num_components = tc.at("num_components").get<int>();
    bundle.train_config.passes = tc.at("passes").get<int>();
    bundle.train_config.seed = tc.at("seed").get<std::uint64_t>();
    bundle.train_config.seed_stream = tc.at("seed_stream").get<std::uint64_t>();
    bundle.train_config.init_low = tc.at("init_low").get<double>();
    bundle.train_config.init_high = tc.at("init_high").get<double>();
    bundle.train_config.init_sigma = tc.at("init_sigma").get<double>();
    bundle.train_config.pooled_covariance = tc.at("pooled_covariance").get<bool>();

    if (j.contains("model")) {
        bundle.single = model_from_json(j.at("model"));
    }
    if (j.contains("blocks")) {
        Partition partition;
        partition.dim = j.at("partition").at("dim").get<int>();
        partition.blocks =
            j.at("partition").at("blocks").get<std::vector<std::vector<int>>>();
        std::vector<SharedKernelModel> blocks;
        for (const json& block : j.at("blocks")) {
            blocks.push_back(model_from_json(block));
        }
        bundle.partitioned.emplace(std::move(partition), std::move(blocks));
    }
    if (j.contains("mixture")) {
        const json& mj = j.at("mixture");
        MixtureModel mixture;
        for (const json& comp : mj.at("components")) {
            mixture.components.emplace_back(vector_from_json(comp.at("mean")),
                                            matrix_from_json(comp.at("covariance")));
        }
        mixture.weights = vector_from_json(mj.at("weights"));
        if (mixture.weights.size() != static_cast<Eigen::Index>(mixture.components.size())) {
            throw SkemError(path + ": mixture weight count mismatch");
        }
        if (std::abs(mixture.weights.sum() - 1.0) > 1e-8 ||
            (mixture.weights.array() < -1e-12).any()) {
            throw SkemError(path + ": mixture weights not a distribution");
        }
        bundle.mixture = std::move(mixture);
    }

    if (j.contains("standardize")) {
        bundle.standardize = StandardizeTransform::from_parameters(
            vector_from_json(j.at("standardize").at("mean")),
            vector_from_json(j.at("standardize").at("std")));
    }
    if (j.contains("pca")) {
        bundle.pca = PcaTransform::from_parameters(
            vector_from_json(j.at("pca").at("mean")),
            matrix_from_json(j.at("pca").at("basis")),
            vector_from_json(j.at("pca").at("singular_values")));
    }

    for (const json& history : j.at("histories")) {
        bundle.histories.push_back(history_from_json(history));
    }
    return bundle;
}

void save_evaluation_report(const ConfusionMatrix& confusion, double accuracy,
                            const std::vector<std::string>& label_names,
                            const std::string& path) {
    json counts = json::array();
    for (Eigen::Index r = 0; r < confusion.counts.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < confusion.counts.cols(); ++c) {
            row.push_back(confusion.counts(r, c));
        }
        counts.push_back(std::move(row));
    }
    const json j = {
        {"accuracy", accuracy},
        {"labels", label_names},
        {"confusion", std::move(counts)},
    };
    std::ofstream file(path);
    if (!file) {
        throw SkemError("cannot open " + path + " for writing");
    }
    file << j.dump(2) << '\n';
}

void save_cv_report(const CvReport& report, const std::string& path) {
    json folds = json::array();
    for (const auto& fold : report.folds) {
        folds.push_back({
            {"trial", fold.trial},
            {"fold", fold.fold},
            {"best_pass", fold.best_pass},
            {"accuracy", fold.accuracy},
        });
    }
    const json j = {
        {"mean_accuracy", report.mean_accuracy},
        {"std_accuracy", report.std_accuracy},
        {"folds", std::move(folds)},
    };
    std::ofstream file(path);
    if (!file) {
        throw SkemError("cannot open " + path + " for writing");
    }
    file << j.dump(2) << '\n';
}

}  // namespace skem
