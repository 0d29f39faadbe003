#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "support.hpp"
#include "zslgmm/dataset.hpp"
#include "zslgmm/error.hpp"

using namespace zslgmm;
using testing::TempDir;
using testing::write_file;

namespace {

struct Files {
  TempDir dir;
  std::filesystem::path features = dir / "features.csv";
  std::filesystem::path labels = dir / "labels.csv";
  std::filesystem::path embeddings = dir / "embeddings.csv";
};

void write_minimal(const Files& f) {
  write_file(f.features, "id,f0,f1\na,1,2\nb,3,4\nc,5,6\n");
  write_file(f.labels, "id,class\nc,horse\na,zebra\nb,horse\n");
  write_file(f.embeddings, "class,e0,e1\nzebra,3,4\nhorse,0,2\n");
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

ZslDataset tiny_dataset(int classes, const std::vector<int>& labels) {
  ZslDataset d;
  d.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), 2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    d.features(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    d.features(static_cast<Eigen::Index>(i), 1) = static_cast<double>(labels[i]);
  }
  d.labels = labels;
  d.embeddings = Eigen::MatrixXd::Identity(classes, classes);
  for (int k = 0; k < classes; ++k) d.class_names.push_back("k" + std::to_string(k));
  d.validate();
  return d;
}

}  // namespace

TEST_CASE("minimal well-formed input loads") {
  Files f;
  write_minimal(f);
  const ZslDataset d = load_dataset(f.features, f.labels, f.embeddings);
  CHECK(d.size() == 3);
  CHECK(d.class_count() == 2);
  CHECK(d.feature_dim() == 2);
  // Class ids follow embedding row order; labels joined by id.
  CHECK(d.class_names == std::vector<std::string>{"zebra", "horse"});
  CHECK(d.labels == std::vector<ClassId>{0, 1, 1});
  CHECK(d.instance_ids == std::vector<std::string>{"a", "b", "c"});
  CHECK(d.features(2, 1) == 6.0);
  // Rows are L2-normalized.
  CHECK(d.embeddings(0, 0) == doctest::Approx(0.6));
  CHECK(d.embeddings(0, 1) == doctest::Approx(0.8));
  CHECK(d.embeddings(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("label naming a class absent from embeddings is reported with file and line") {
  Files f;
  write_minimal(f);
  write_file(f.embeddings, "class,e0,e1\nhorse,0,2\nlion,1,1\n");
  const std::string msg = error_of([&] { load_dataset(f.features, f.labels, f.embeddings); });
  CHECK(msg.find("labels.csv:3") != std::string::npos);
  CHECK(msg.find("unknown class 'zebra'") != std::string::npos);
}

TEST_CASE("ragged feature row is rejected") {
  Files f;
  write_minimal(f);
  write_file(f.features, "id,f0,f1,f2,f3\na,1,2,3,4\nb,1,2,3\nc,1,2,3,4\n");
  const std::string msg = error_of([&] { load_dataset(f.features, f.labels, f.embeddings); });
  CHECK(msg.find("features.csv:3") != std::string::npos);
  CHECK(msg.find("ragged") != std::string::npos);
}

TEST_CASE("non-finite values and bad numbers carry context") {
  Files f;
  write_minimal(f);
  write_file(f.features, "id,f0,f1\na,1,2\nb,nan,4\nc,5,6\n");
  CHECK(error_of([&] { load_dataset(f.features, f.labels, f.embeddings); }).find("features.csv:3") !=
        std::string::npos);
  write_file(f.features, "id,f0,f1\na,1,2\nb,3,x\nc,5,6\n");
  CHECK(error_of([&] { load_dataset(f.features, f.labels, f.embeddings); }).find("features.csv:3") !=
        std::string::npos);
}

TEST_CASE("missing file error names the path") {
  Files f;
  write_minimal(f);
  const auto missing = f.dir / "nope.csv";
  CHECK(error_of([&] { load_dataset(f.features, f.labels, missing); }).find(missing.string()) != std::string::npos);
}

TEST_CASE("feature row without a label is an error") {
  Files f;
  write_minimal(f);
  write_file(f.labels, "id,class\na,zebra\nb,horse\n");
  CHECK_THROWS_AS(load_dataset(f.features, f.labels, f.embeddings), DataError);
}

TEST_CASE("two embedding files fuse by column concatenation after per-block normalization") {
  Files f;
  write_minimal(f);
  const auto second = f.dir / "words.csv";
  write_file(second, "class,w0\nhorse,-5\nzebra,2\n");
  const std::vector<std::filesystem::path> paths{f.embeddings, second};
  const ZslDataset d = load_dataset(f.features, f.labels, paths);
  REQUIRE(d.embedding_dim() == 3);
  CHECK(d.embeddings(0, 2) == doctest::Approx(1.0));   // zebra
  CHECK(d.embeddings(1, 2) == doctest::Approx(-1.0));  // horse
  CHECK(d.embeddings.row(0).head(2).norm() == doctest::Approx(1.0));
}

TEST_CASE("zero embedding row cannot be normalized") {
  Files f;
  write_minimal(f);
  write_file(f.embeddings, "class,e0,e1\nzebra,0,0\nhorse,0,2\n");
  CHECK_THROWS_AS(load_dataset(f.features, f.labels, f.embeddings), DataError);
}

TEST_CASE("binary features round-trip") {
  Files f;
  write_minimal(f);
  ZslDataset d = load_dataset(f.features, f.labels, f.embeddings);
  const auto bin = f.dir / "features.bin";
  write_features_binary(d, bin);
  // Binary rows are identified by index.
  write_file(f.labels, "id,class\n0,zebra\n1,horse\n2,horse\n");
  const ZslDataset back = load_dataset(bin, f.labels, f.embeddings);
  CHECK(back.features.isApprox(d.features));
  CHECK(back.labels == d.labels);

  std::ifstream in(bin, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::memcmp(magic, "ZSLF", 4) == 0);
}

TEST_CASE("truncated binary payload is reported") {
  Files f;
  write_minimal(f);
  const auto bin = f.dir / "bad.bin";
  const unsigned char bytes[] = {'Z', 'S', 'L', 'F', 3, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0x80, 0x3f};
  write_file(bin, std::string_view(reinterpret_cast<const char*>(bytes), sizeof bytes));
  CHECK_THROWS_AS(load_dataset(bin, f.labels, f.embeddings), DataError);
}

TEST_CASE("CSV writers round-trip through the loader") {
  Files f;
  write_minimal(f);
  const ZslDataset d = load_dataset(f.features, f.labels, f.embeddings);
  TempDir out;
  write_features_csv(d, out / "f.csv");
  write_labels_csv(d, out / "l.csv");
  write_embeddings_csv(d, out / "e.csv");
  const ZslDataset back = load_dataset(out / "f.csv", out / "l.csv", out / "e.csv");
  CHECK(back.features == d.features);
  CHECK(back.labels == d.labels);
  CHECK(back.embeddings == d.embeddings);
  CHECK(back.class_names == d.class_names);
}

TEST_CASE("validate enforces the dataset invariants") {
  ZslDataset d = tiny_dataset(2, {0, 1, 1});
  d.labels[0] = 2;
  CHECK_THROWS_AS(d.validate(), DataError);
  ZslDataset one = tiny_dataset(2, {0, 1});
  one.class_names.pop_back();
  one.embeddings.conservativeResize(1, Eigen::NoChange);
  one.labels = {0, 0};
  CHECK_THROWS_AS(one.validate(), DataError);
}

TEST_CASE("generate_splits shapes") {
  SUBCASE("50 classes, 10 unseen, 300 trials") {
    const SplitSpec s = generate_splits(50, 10, 300, 1);
    CHECK(s.trials.size() == 300);
    for (const auto& t : s.trials) {
      CHECK(t.size() == 10);
      CHECK(std::set<ClassId>(t.begin(), t.end()).size() == 10);
      CHECK(std::is_sorted(t.begin(), t.end()));
      CHECK(t.front() >= 0);
      CHECK(t.back() < 50);
    }
  }
  SUBCASE("200 classes, 50 unseen") {
    const SplitSpec s = generate_splits(200, 50, 300, 2);
    CHECK(s.trials.size() == 300);
    CHECK(s.trials[0].size() == 50);
  }
  CHECK(generate_splits(50, 10, 20, 9).trials == generate_splits(50, 10, 20, 9).trials);
  CHECK_THROWS_AS(generate_splits(10, 10, 1, 0), SplitError);
  CHECK_THROWS_AS(generate_splits(10, 0, 1, 0), SplitError);
  CHECK_THROWS_AS(generate_splits(10, 3, 0, 0), SplitError);
}

TEST_CASE("split draws are roughly uniform over classes") {
  const SplitSpec s = generate_splits(20, 5, 4000, 11);
  std::vector<int> counts(20, 0);
  for (const auto& t : s.trials)
    for (ClassId id : t) ++counts[static_cast<std::size_t>(id)];
  // Expected 1000 per class; binomial sd about 27.
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}

TEST_CASE("split spec JSON round-trips by class name") {
  const std::vector<std::string> names{"ant", "bee", "cat", "dog", "eel"};
  const SplitSpec s = generate_splits(5, 2, 4, 3);
  TempDir dir;
  write_split_spec(s, names, dir / "s.json");
  const SplitSpec back = read_split_spec(dir / "s.json", names);
  CHECK(back.seed == 3);
  CHECK(back.unseen_count == 2);
  CHECK(back.trials == s.trials);
  const std::string text = testing::read_file(dir / "s.json");
  CHECK(text.find("\"trials\"") != std::string::npos);
  CHECK(text.find("\"" + names[static_cast<std::size_t>(s.trials[0][0])] + "\"") != std::string::npos);
}

TEST_CASE("split spec entries fall back to integer ids") {
  const std::vector<std::string> names{"ant", "bee", "cat"};
  const auto doc = nlohmann::json::parse(R"({"seed": 1, "unseen_count": 1, "trials": [["2"], ["bee"]]})");
  const SplitSpec s = split_from_json(doc, names);
  CHECK(s.trials[0] == std::vector<ClassId>{2});
  CHECK(s.trials[1] == std::vector<ClassId>{1});
  const auto bad = nlohmann::json::parse(R"({"seed": 1, "unseen_count": 1, "trials": [["yak"]]})");
  CHECK_THROWS_AS(split_from_json(bad, names), SplitError);
}

TEST_CASE("apply_split two-class case") {
  const ZslDataset d = tiny_dataset(2, {0, 1, 0, 1});
  const std::vector<ClassId> unseen{1};
  const SplitPartition p = apply_split(d, unseen);
  CHECK(p.seen.classes == std::vector<ClassId>{0});
  CHECK(p.seen.labels == std::vector<ClassId>{0, 0});
  CHECK(p.seen.embeddings.rows() == 1);
  CHECK(p.seen.embeddings.row(0) == d.embeddings.row(0));
  CHECK(p.unseen.rows == std::vector<std::size_t>{1, 3});
}

TEST_CASE("apply_split counts") {
  // N = 10, 6 instances in unseen classes {2, 3}.
  const ZslDataset d = tiny_dataset(4, {0, 2, 1, 3, 2, 0, 3, 2, 1, 3});
  const std::vector<ClassId> unseen{3, 2};
  const SplitPartition p = apply_split(d, unseen);
  CHECK(p.seen.features.rows() == 4);
  CHECK(p.unseen.features.rows() == 6);
  CHECK(p.unseen.classes == std::vector<ClassId>{2, 3});
  CHECK(p.unseen.local_labels() == std::vector<int>{0, 1, 0, 1, 0, 1});
}

TEST_CASE("apply_split rejects bad unseen sets") {
  const ZslDataset d = tiny_dataset(3, {0, 1, 2});
  CHECK_THROWS_AS(apply_split(d, std::vector<ClassId>{}), SplitError);
  CHECK_THROWS_AS(apply_split(d, std::vector<ClassId>{5}), SplitError);
  CHECK_THROWS_AS(apply_split(d, std::vector<ClassId>{1, 1}), SplitError);
  CHECK_THROWS_AS(apply_split(d, std::vector<ClassId>{0, 1, 2}), SplitError);
}
