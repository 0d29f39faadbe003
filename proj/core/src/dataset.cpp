#include "zslgmm/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "csv.hpp"
#include "zslgmm/error.hpp"
#include "zslgmm/rng.hpp"

namespace zslgmm {
namespace fs = std::filesystem;
using detail::CsvTable;
using detail::format_double;
using detail::parse_double;
using detail::read_csv;

namespace {

constexpr char kBinaryMagic[4] = {'Z', 'S', 'L', 'F'};

struct FeatureTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd values;
};

bool has_binary_magic(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0;
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

FeatureTable read_features_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  in.seekg(4);
  const std::uint32_t rows = read_u32_le(in);
  const std::uint32_t cols = read_u32_le(in);
  if (!in) throw DataError(path.string(), 1, "truncated ZSLF header");
  FeatureTable table;
  table.values.resize(rows, cols);
  std::vector<unsigned char> buf(static_cast<std::size_t>(cols) * 4);
  for (std::uint32_t r = 0; r < rows; ++r) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw DataError(path.string(), r + 1, "truncated ZSLF payload at row " + std::to_string(r));
    for (std::uint32_t c = 0; c < cols; ++c) {
      const unsigned char* p = buf.data() + 4 * c;
      const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                                 (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
      const float v = std::bit_cast<float>(bits);
      if (!std::isfinite(v)) {
        throw DataError(path.string(), r + 1, "non-finite value in row " + std::to_string(r));
      }
      table.values(r, c) = v;
    }
    table.ids.push_back(std::to_string(r));
  }
  return table;
}

FeatureTable read_features_csv(const fs::path& path) {
  const CsvTable csv = read_csv(path);
  if (csv.header.size() < 2 || csv.header.front() != "id") {
    throw DataError(csv.file, csv.header_line, "features header must be 'id,f0,...'");
  }
  const std::size_t cols = csv.header.size() - 1;
  FeatureTable table;
  table.values.resize(static_cast<Eigen::Index>(csv.rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (row.cells.size() != cols + 1) {
      throw DataError(csv.file, row.line,
                      "ragged row: expected " + std::to_string(cols + 1) + " columns, got " +
                          std::to_string(row.cells.size()));
    }
    table.ids.push_back(row.cells[0]);
    for (std::size_t c = 0; c < cols; ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(row.cells[c + 1], csv.file, row.line);
    }
  }
  return table;
}

struct EmbeddingTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
};

EmbeddingTable read_embeddings(const fs::path& path, bool normalize) {
  const CsvTable csv = read_csv(path);
  if (csv.header.size() < 2 || csv.header.front() != "class") {
    throw DataError(csv.file, csv.header_line, "embeddings header must be 'class,e0,...'");
  }
  const std::size_t cols = csv.header.size() - 1;
  EmbeddingTable table;
  table.values.resize(static_cast<Eigen::Index>(csv.rows.size()), static_cast<Eigen::Index>(cols));
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    if (row.cells.size() != cols + 1) {
      throw DataError(csv.file, row.line,
                      "ragged row: expected " + std::to_string(cols + 1) + " columns, got " +
                          std::to_string(row.cells.size()));
    }
    if (!seen.emplace(row.cells[0], r).second) {
      throw DataError(csv.file, row.line, "duplicate class '" + row.cells[0] + "'");
    }
    table.names.push_back(row.cells[0]);
    for (std::size_t c = 0; c < cols; ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_double(row.cells[c + 1], csv.file, row.line);
    }
    if (normalize) {
      auto v = table.values.row(static_cast<Eigen::Index>(r));
      const double norm = v.norm();
      if (!(norm > 0.0)) {
        throw DataError(csv.file, row.line, "zero embedding for class '" + row.cells[0] + "'");
      }
      v /= norm;
    }
  }
  return table;
}

}  // namespace

void ZslDataset::validate() const {
  const Eigen::Index n = features.rows();
  const int k = class_count();
  if (k < 2) throw DataError("dataset needs at least 2 classes, got " + std::to_string(k));
  if (embeddings.rows() != k) {
    throw DataError("embeddings have " + std::to_string(embeddings.rows()) + " rows for " +
                    std::to_string(k) + " classes");
  }
  if (n < k) {
    throw DataError("dataset has " + std::to_string(n) + " instances for " + std::to_string(k) +
                    " classes (need N >= K)");
  }
  if (features.cols() < 1) throw DataError("feature dimension must be at least 1");
  if (embeddings.cols() < 1) throw DataError("embedding dimension must be at least 1");
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw DataError("label count " + std::to_string(labels.size()) + " does not match " +
                    std::to_string(n) + " feature rows");
  }
  if (!instance_ids.empty() && static_cast<Eigen::Index>(instance_ids.size()) != n) {
    throw DataError("instance id count does not match feature rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw DataError("instance " + std::to_string(i) + " has unknown class id " +
                      std::to_string(labels[i]));
    }
  }
  if (!features.allFinite()) throw DataError("features contain non-finite values");
  if (!embeddings.allFinite()) throw DataError("embeddings contain non-finite values");
}

ClassId ZslDataset::class_id(std::string_view name) const {
  const auto it = std::find(class_names.begin(), class_names.end(), name);
  if (it == class_names.end()) throw DataError("unknown class '" + std::string(name) + "'");
  return static_cast<ClassId>(it - class_names.begin());
}

ZslDataset load_dataset(const fs::path& features_path, const fs::path& labels_path,
                        std::span<const fs::path> embedding_paths, const LoadOptions& options) {
  if (embedding_paths.empty()) throw DataError("at least one embeddings file is required");
  for (const auto& p : {features_path, labels_path}) {
    if (!fs::exists(p)) throw DataError(p.string() + ": file not found");
  }
  for (const auto& p : embedding_paths) {
    if (!fs::exists(p)) throw DataError(p.string() + ": file not found");
  }

  ZslDataset data;

  // Embedding blocks, fused column-wise in the order of the first file.
  std::vector<EmbeddingTable> blocks;
  for (const auto& p : embedding_paths) blocks.push_back(read_embeddings(p, options.normalize_embeddings));
  data.class_names = blocks.front().names;
  std::unordered_map<std::string, ClassId> class_index;
  for (std::size_t k = 0; k < data.class_names.size(); ++k) {
    class_index.emplace(data.class_names[k], static_cast<ClassId>(k));
  }
  Eigen::Index total_cols = 0;
  for (const auto& b : blocks) total_cols += b.values.cols();
  data.embeddings.resize(static_cast<Eigen::Index>(data.class_names.size()), total_cols);
  Eigen::Index offset = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    if (block.names.size() != data.class_names.size()) {
      throw DataError(embedding_paths[b].string() + ": lists " + std::to_string(block.names.size()) +
                      " classes, expected " + std::to_string(data.class_names.size()));
    }
    for (std::size_t r = 0; r < block.names.size(); ++r) {
      const auto it = class_index.find(block.names[r]);
      if (it == class_index.end()) {
        throw DataError(embedding_paths[b].string() + ": class '" + block.names[r] +
                        "' missing from " + embedding_paths[0].string());
      }
      data.embeddings.block(it->second, offset, 1, block.values.cols()) =
          block.values.row(static_cast<Eigen::Index>(r));
    }
    offset += block.values.cols();
  }

  FeatureTable feats =
      has_binary_magic(features_path) ? read_features_binary(features_path) : read_features_csv(features_path);

  const CsvTable label_csv = read_csv(labels_path);
  if (label_csv.header.size() != 2 || label_csv.header[0] != "id" || label_csv.header[1] != "class") {
    throw DataError(label_csv.file, label_csv.header_line, "labels header must be 'id,class'");
  }
  std::unordered_map<std::string, ClassId> label_of;
  for (const auto& row : label_csv.rows) {
    if (row.cells.size() != 2) throw DataError(label_csv.file, row.line, "expected 'id,class'");
    const auto cls = class_index.find(row.cells[1]);
    if (cls == class_index.end()) {
      throw DataError(label_csv.file, row.line,
                      "unknown class '" + row.cells[1] + "' (not in embeddings)");
    }
    if (!label_of.emplace(row.cells[0], cls->second).second) {
      throw DataError(label_csv.file, row.line, "duplicate id '" + row.cells[0] + "'");
    }
  }
  if (label_of.size() != feats.ids.size()) {
    throw DataError(label_csv.file, label_csv.header_line,
                    std::to_string(label_of.size()) + " labels for " + std::to_string(feats.ids.size()) +
                        " feature rows in " + features_path.string());
  }
  data.labels.reserve(feats.ids.size());
  for (const auto& id : feats.ids) {
    const auto it = label_of.find(id);
    if (it == label_of.end()) {
      throw DataError(label_csv.file, label_csv.header_line, "no label for feature row id '" + id + "'");
    }
    data.labels.push_back(it->second);
  }
  data.features = std::move(feats.values);
  data.instance_ids = std::move(feats.ids);
  data.validate();
  return data;
}

ZslDataset load_dataset(const fs::path& features, const fs::path& labels, const fs::path& embeddings,
                        const LoadOptions& options) {
  const fs::path paths[] = {embeddings};
  return load_dataset(features, labels, std::span<const fs::path>(paths), options);
}

namespace {

std::string instance_id(const ZslDataset& data, Eigen::Index row) {
  return data.instance_ids.empty() ? std::to_string(row) : data.instance_ids[static_cast<std::size_t>(row)];
}

}  // namespace

void write_features_csv(const ZslDataset& data, const fs::path& path) {
  std::ostringstream out;
  out << "id";
  for (Eigen::Index c = 0; c < data.features.cols(); ++c) out << ",f" << c;
  out << '\n';
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    out << instance_id(data, r);
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) out << ',' << format_double(data.features(r, c));
    out << '\n';
  }
  detail::write_text_file(path, out.str());
}

void write_features_binary(const ZslDataset& data, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out.write(kBinaryMagic, 4);
  write_u32_le(out, static_cast<std::uint32_t>(data.features.rows()));
  write_u32_le(out, static_cast<std::uint32_t>(data.features.cols()));
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
      write_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(data.features(r, c))));
    }
  }
  if (!out) throw Error(path.string() + ": write failed");
}

void write_labels_csv(const ZslDataset& data, const fs::path& path) {
  std::ostringstream out;
  out << "id,class\n";
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    out << instance_id(data, r) << ',' << data.class_names[static_cast<std::size_t>(data.labels[r])] << '\n';
  }
  detail::write_text_file(path, out.str());
}

void write_embeddings_csv(const ZslDataset& data, const fs::path& path) {
  std::ostringstream out;
  out << "class";
  for (Eigen::Index c = 0; c < data.embeddings.cols(); ++c) out << ",e" << c;
  out << '\n';
  for (Eigen::Index r = 0; r < data.embeddings.rows(); ++r) {
    out << data.class_names[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < data.embeddings.cols(); ++c) out << ',' << format_double(data.embeddings(r, c));
    out << '\n';
  }
  detail::write_text_file(path, out.str());
}

std::vector<std::string> read_class_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::string first;
  std::getline(in, first);
  in.close();
  if (first.rfind("class,", 0) == 0 || first == "class") {
    const CsvTable csv = read_csv(path);
    std::vector<std::string> names;
    for (const auto& row : csv.rows) names.push_back(row.cells.at(0));
    return names;
  }
  std::ifstream again(path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(again, line)) {
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const auto b = line.find_last_not_of(" \t\r");
    names.push_back(line.substr(a, b - a + 1));
  }
  return names;
}

SplitSpec generate_splits(int class_count, int unseen_count, int trial_count, std::uint64_t seed) {
  if (unseen_count <= 0 || unseen_count >= class_count) {
    throw SplitError("unseen count must satisfy 0 < unseen < classes (got " + std::to_string(unseen_count) +
                     " of " + std::to_string(class_count) + ")");
  }
  if (trial_count < 1) throw SplitError("trial count must be at least 1");

  CounterRng rng = CounterRng(seed).substream("splits");
  SplitSpec spec;
  spec.seed = seed;
  spec.unseen_count = unseen_count;
  spec.trials.reserve(static_cast<std::size_t>(trial_count));
  std::vector<ClassId> pool(static_cast<std::size_t>(class_count));
  for (int t = 0; t < trial_count; ++t) {
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates: the first unseen_count slots are a uniform draw.
    for (int i = 0; i < unseen_count; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng.uniform_index(static_cast<std::uint64_t>(class_count - i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    std::vector<ClassId> unseen(pool.begin(), pool.begin() + unseen_count);
    std::sort(unseen.begin(), unseen.end());
    spec.trials.push_back(std::move(unseen));
  }
  return spec;
}

void validate_split(const SplitSpec& spec, int class_count) {
  if (spec.trials.empty()) throw SplitError("split spec has no trials");
  for (std::size_t t = 0; t < spec.trials.size(); ++t) {
    auto ids = spec.trials[t];
    const std::string where = "trial " + std::to_string(t) + ": ";
    if (ids.empty()) throw SplitError(where + "empty unseen set");
    if (static_cast<int>(ids.size()) >= class_count) throw SplitError(where + "no seen classes left");
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw SplitError(where + "duplicate class id");
    if (ids.front() < 0 || ids.back() >= class_count) throw SplitError(where + "class id out of range");
  }
}

nlohmann::json split_to_json(const SplitSpec& spec, std::span<const std::string> class_names) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& trial : spec.trials) {
    nlohmann::json names = nlohmann::json::array();
    for (ClassId id : trial) {
      if (id < 0 || static_cast<std::size_t>(id) >= class_names.size()) {
        throw SplitError("class id " + std::to_string(id) + " has no name");
      }
      names.push_back(class_names[static_cast<std::size_t>(id)]);
    }
    trials.push_back(std::move(names));
  }
  nlohmann::json doc;
  doc["seed"] = spec.seed;
  doc["unseen_count"] = spec.unseen_count;
  doc["trials"] = std::move(trials);
  return doc;
}

SplitSpec split_from_json(const nlohmann::json& doc, std::span<const std::string> class_names) {
  if (!doc.is_object() || !doc.contains("trials") || !doc["trials"].is_array()) {
    throw SplitError("split spec must be an object with a 'trials' array");
  }
  SplitSpec spec;
  spec.seed = doc.value("seed", std::uint64_t{0});
  spec.unseen_count = doc.value("unseen_count", 0);
  std::unordered_map<std::string, ClassId> index;
  for (std::size_t k = 0; k < class_names.size(); ++k) index.emplace(class_names[k], static_cast<ClassId>(k));
  for (const auto& trial : doc["trials"]) {
    if (!trial.is_array()) throw SplitError("each trial must be an array of class names");
    std::vector<ClassId> ids;
    for (const auto& entry : trial) {
      if (!entry.is_string()) throw SplitError("class names in trials must be strings");
      const auto name = entry.get<std::string>();
      if (const auto it = index.find(name); it != index.end()) {
        ids.push_back(it->second);
        continue;
      }
      int parsed = -1;
      const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), parsed);
      if (ec == std::errc{} && ptr == name.data() + name.size() && parsed >= 0 &&
          static_cast<std::size_t>(parsed) < class_names.size()) {
        ids.push_back(parsed);
        continue;
      }
      throw SplitError("unknown class '" + name + "' in split spec");
    }
    std::sort(ids.begin(), ids.end());
    spec.trials.push_back(std::move(ids));
  }
  if (spec.unseen_count == 0 && !spec.trials.empty()) {
    spec.unseen_count = static_cast<int>(spec.trials.front().size());
  }
  validate_split(spec, static_cast<int>(class_names.size()));
  return spec;
}

void write_split_spec(const SplitSpec& spec, std::span<const std::string> class_names, const fs::path& path) {
  detail::write_text_file(path, split_to_json(spec, class_names).dump() + "\n");
}

SplitSpec read_split_spec(const fs::path& path, std::span<const std::string> class_names) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  try {
    return split_from_json(doc, class_names);
  } catch (const SplitError& e) {
    throw SplitError(path.string() + ": " + e.what());
  }
}

std::vector<int> Partition::local_labels() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (ClassId label : labels) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), label);
    out.push_back(static_cast<int>(it - classes.begin()));
  }
  return out;
}

Partition select_classes(const ZslDataset& data, std::span<const ClassId> classes) {
  Partition part;
  part.classes.assign(classes.begin(), classes.end());
  std::sort(part.classes.begin(), part.classes.end());
  if (part.classes.empty()) throw SplitError("class subset is empty");
  if (std::adjacent_find(part.classes.begin(), part.classes.end()) != part.classes.end()) {
    throw SplitError("class subset has duplicate ids");
  }
  if (part.classes.front() < 0 || part.classes.back() >= data.class_count()) {
    throw SplitError("class id out of range");
  }
  std::vector<char> member(static_cast<std::size_t>(data.class_count()), 0);
  for (ClassId c : part.classes) member[static_cast<std::size_t>(c)] = 1;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (member[static_cast<std::size_t>(data.labels[i])]) part.rows.push_back(i);
  }
  part.features.resize(static_cast<Eigen::Index>(part.rows.size()), data.features.cols());
  part.labels.reserve(part.rows.size());
  for (std::size_t i = 0; i < part.rows.size(); ++i) {
    part.features.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(part.rows[i]));
    part.labels.push_back(data.labels[part.rows[i]]);
  }
  part.embeddings.resize(static_cast<Eigen::Index>(part.classes.size()), data.embeddings.cols());
  for (std::size_t k = 0; k < part.classes.size(); ++k) {
    part.embeddings.row(static_cast<Eigen::Index>(k)) = data.embeddings.row(part.classes[k]);
  }
  return part;
}

SplitPartition apply_split(const ZslDataset& data, std::span<const ClassId> unseen) {
  if (unseen.empty()) throw SplitError("unseen class set is empty");
  std::vector<ClassId> ids(unseen.begin(), unseen.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw SplitError("duplicate unseen class id");
  if (ids.front() < 0 || ids.back() >= data.class_count()) {
    throw SplitError("unseen class id out of range [0, " + std::to_string(data.class_count()) + ")");
  }
  if (static_cast<int>(ids.size()) >= data.class_count()) throw SplitError("split leaves no seen classes");
  std::vector<ClassId> seen;
  for (ClassId c = 0; c < data.class_count(); ++c) {
    if (!std::binary_search(ids.begin(), ids.end(), c)) seen.push_back(c);
  }
  return {select_classes(data, seen), select_classes(data, ids)};
}

}  // namespace zslgmm
