#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace zslgmm {

/// Dense class index, assigned in embeddings-file order at load time.
using ClassId = int;

/// Instances, their labels, and one label embedding per class.
///
/// Rows of `features` are instances; rows of `embeddings` are classes and
/// `class_names[k]` names row k. `instance_ids` is empty or has one entry per row.
struct ZslDataset {
  Eigen::MatrixXd features;
  std::vector<ClassId> labels;
  Eigen::MatrixXd embeddings;
  std::vector<std::string> class_names;
  std::vector<std::string> instance_ids;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
  Eigen::Index embedding_dim() const { return embeddings.cols(); }
  int class_count() const { return static_cast<int>(class_names.size()); }

  /// Throws DataError when any invariant is broken: label out of range,
  /// N < K, K < 2, empty dimensions, non-finite values, size mismatches.
  void validate() const;

  /// Throws DataError for an unknown name.
  ClassId class_id(std::string_view name) const;
};

struct LoadOptions {
  /// L2-normalize every embedding row, per embedding file, before fusion.
  bool normalize_embeddings = true;
};

/// Loads features (CSV or ZSLF binary), labels, and one or more embedding
/// files. Several embedding files are fused by column-wise concatenation in
/// the order given; all must list the same classes. Class ids follow the row
/// order of the first embedding file. Labels are joined to feature rows by id;
/// binary feature rows have ids "0", "1", ... in row order.
ZslDataset load_dataset(const std::filesystem::path& features,
                        const std::filesystem::path& labels,
                        std::span<const std::filesystem::path> embeddings,
                        const LoadOptions& options = {});

ZslDataset load_dataset(const std::filesystem::path& features,
                        const std::filesystem::path& labels,
                        const std::filesystem::path& embeddings,
                        const LoadOptions& options = {});

void write_features_csv(const ZslDataset& data, const std::filesystem::path& path);
void write_features_binary(const ZslDataset& data, const std::filesystem::path& path);
void write_labels_csv(const ZslDataset& data, const std::filesystem::path& path);
void write_embeddings_csv(const ZslDataset& data, const std::filesystem::path& path);

/// Class names listed in the first column of an embeddings CSV, or one
/// name per line for any other text file.
std::vector<std::string> read_class_list(const std::filesystem::path& path);

/// Seen/unseen trials. Each trial holds the sorted unseen class ids; the
/// seen set is the complement.
struct SplitSpec {
  std::uint64_t seed = 0;
  int unseen_count = 0;
  std::vector<std::vector<ClassId>> trials;
};

/// Draws `trial_count` unseen sets of `unseen_count` distinct ids uniformly
/// without replacement from [0, class_count), using the "splits" substream of
/// the counter generator seeded with `seed`.
SplitSpec generate_splits(int class_count, int unseen_count, int trial_count, std::uint64_t seed);

/// Checks every trial against a class count; throws SplitError.
void validate_split(const SplitSpec& spec, int class_count);

nlohmann::json split_to_json(const SplitSpec& spec, std::span<const std::string> class_names);
/// Trial entries are matched against class names first; an entry that names no
/// class but parses as an in-range integer is taken as a class id.
SplitSpec split_from_json(const nlohmann::json& doc, std::span<const std::string> class_names);
void write_split_spec(const SplitSpec& spec, std::span<const std::string> class_names,
                      const std::filesystem::path& path);
SplitSpec read_split_spec(const std::filesystem::path& path, std::span<const std::string> class_names);

/// Instances and embeddings of a subset of classes.
struct Partition {
  Eigen::MatrixXd features;
  std::vector<ClassId> labels;       // global class ids
  std::vector<ClassId> classes;      // ascending
  Eigen::MatrixXd embeddings;        // one row per entry of `classes`
  std::vector<std::size_t> rows;     // source row of each instance

  /// Labels re-expressed as positions in `classes`.
  std::vector<int> local_labels() const;
};

struct SplitPartition {
  Partition seen;
  Partition unseen;
};

/// Partitions by class. Throws SplitError for an empty, duplicate,
/// out-of-range, or all-classes unseen set.
SplitPartition apply_split(const ZslDataset& data, std::span<const ClassId> unseen);

/// Instances of the listed classes only (any non-empty subset).
Partition select_classes(const ZslDataset& data, std::span<const ClassId> classes);

}  // namespace zslgmm
