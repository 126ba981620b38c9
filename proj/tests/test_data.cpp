#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "lenkit/data.hpp"
#include "lenkit/errors.hpp"
#include "lenkit/rng.hpp"

using namespace lenkit;

namespace {

namespace fs = std::filesystem;

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& name, const std::string& contents)
      : path(fs::temp_directory_path() / name) {
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::error_code ec; fs::remove(path, ec); }
};

Dataset xor_dataset() {
  Dataset d;
  d.x = Matrix::from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  d.y = {0, 1, 1, 0};
  d.concept_names = {"x1", "x2"};
  d.class_names = {"0", "1"};
  return d;
}

}  // namespace

TEST_CASE("load_csv reads the xor layout") {
  TempFile file("lenkit_xor.csv",
                "x1,x2,label\n"
                "0,0,0\n"
                "0,1,1\n"
                "1,0,1\n"
                "1,1,0\n");
  Dataset d = load_csv(file.path);
  CHECK(d.n_concepts() == 2);
  CHECK(d.n_classes() == 2);
  CHECK(d.n_rows() == 4);
  CHECK(d.concept_names == std::vector<std::string>{"x1", "x2"});
  CHECK(d.class_names == std::vector<std::string>{"0", "1"});
  CHECK(d.y == std::vector<int>{0, 1, 1, 0});
  CHECK(d.x.at(2, 0) == 1.0);
}

TEST_CASE("load_csv diagnostics") {
  TempFile out_of_range("lenkit_range.csv", "a,b,label\n0.5,1.5,0\n");
  try {
    load_csv(out_of_range.path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
  }

  TempFile header_only("lenkit_header.csv", "a,b,label\n");
  CHECK_THROWS_AS(load_csv(header_only.path), DataError);

  TempFile no_label("lenkit_nolabel.csv", "a,b,c\n0,0,0\n");
  CHECK_THROWS_AS(load_csv(no_label.path), DataError);

  TempFile ragged("lenkit_ragged.csv", "a,b,label\n0,1\n");
  CHECK_THROWS_AS(load_csv(ragged.path), DataError);

  TempFile not_numeric("lenkit_nan.csv", "a,b,label\n0,zebra,0\n");
  CHECK_THROWS_AS(load_csv(not_numeric.path), DataError);

  TempFile duplicate("lenkit_dup.csv", "a,a,label\n0,1,0\n");
  CHECK_THROWS_AS(load_csv(duplicate.path), DataError);

  CHECK_THROWS_AS(load_csv("/nonexistent/nowhere.csv"), DataError);
}

TEST_CASE("load_csv accepts string labels and sorts integer labels numerically") {
  TempFile strings("lenkit_strings.csv",
                   "nose,lips,label\n1,0,person\n0,1,animal\n1,1,person\n");
  Dataset d = load_csv(strings.path);
  CHECK(d.class_names == std::vector<std::string>{"animal", "person"});
  CHECK(d.y == std::vector<int>{1, 0, 1});

  TempFile numeric("lenkit_numeric.csv",
                   "a,label\n0,10\n0.25,2\n0.5,10\n1,0\n");
  Dataset n = load_csv(numeric.path);
  CHECK(n.class_names == std::vector<std::string>{"0", "2", "10"});
  CHECK(n.y == std::vector<int>{2, 1, 2, 0});
}

TEST_CASE("save then load is the identity") {
  Rng rng(3);
  Dataset d;
  d.concept_names = {"alpha", "beta", "gamma"};
  d.class_names = {"no", "yes"};
  d.x = Matrix(20, 3);
  for (double& v : d.x.values()) v = rng.uniform();
  for (std::size_t i = 0; i < 20; ++i) d.y.push_back(int(rng.below(2)));

  fs::path path = fs::temp_directory_path() / "lenkit_roundtrip.csv";
  save_csv(d, path);
  Dataset back = load_csv(path);
  fs::remove(path);

  CHECK(back.concept_names == d.concept_names);
  CHECK(back.class_names == d.class_names);
  CHECK(back.y == d.y);
  REQUIRE(back.x.rows() == d.x.rows());
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    for (std::size_t j = 0; j < d.x.cols(); ++j) {
      CHECK(back.x.at(i, j) == doctest::Approx(d.x.at(i, j)).epsilon(1e-9));
    }
  }
}

TEST_CASE("split partitions deterministically") {
  Rng rng(5);
  Dataset d;
  d.concept_names = {"a"};
  d.class_names = {"0", "1"};
  d.x = Matrix(10, 1, 0.5);
  d.y.assign(10, 0);
  d.y[1] = 1;

  Split s = split(d, {0.6, 0.2, 0.2}, 7);
  CHECK(s.train.size() == 6);
  CHECK(s.validation.size() == 2);
  CHECK(s.test.size() == 2);

  std::set<std::size_t> all;
  all.insert(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 10);

  Split again = split(d, {0.6, 0.2, 0.2}, 7);
  CHECK(again.train == s.train);
  CHECK(again.validation == s.validation);
  CHECK(again.test == s.test);
}

TEST_CASE("split varies with the seed") {
  Dataset d;
  d.concept_names = {"a"};
  d.class_names = {"0"};
  d.x = Matrix(10, 1, 0.25);
  d.y.assign(10, 0);

  std::set<std::vector<std::size_t>> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    seen.insert(split(d, {0.6, 0.2, 0.2}, seed).train);
  }
  CHECK(seen.size() >= 95);
}

TEST_CASE("split validates its inputs") {
  Dataset d = xor_dataset();
  CHECK_THROWS_AS(split(d, {0.9, 0.05, 0.05}, 0), DomainError);   // rounds to zero rows
  CHECK_THROWS_AS(split(d, {0.5, 0.4, 0.2}, 0), DomainError);     // does not sum to 1
  CHECK_THROWS_AS(split(d, {1.0, 0.0, 0.0}, 0), DomainError);     // zero fraction
}

TEST_CASE("booleanize thresholds strictly") {
  Matrix x = Matrix::from_rows({{0.5, 0.51}, {0.0, 1.0}});
  auto b = booleanize(x, 0.5);
  CHECK_FALSE(b[0][0]);  // boundary stays false
  CHECK(b[0][1]);
  CHECK_FALSE(b[1][0]);
  CHECK(b[1][1]);

  Matrix binary = Matrix::from_rows({{0, 1}, {1, 0}});
  auto same = booleanize(binary, 0.5);
  CHECK(same[0] == std::vector<bool>{false, true});
  CHECK(same[1] == std::vector<bool>{true, false});

  CHECK_THROWS_AS(booleanize(Matrix::from_rows({{2.0}}), 0.5), DomainError);
}

TEST_CASE("booleanize matches the elementwise oracle and is monotone") {
  Rng rng(11);
  Matrix x(8, 5);
  for (double& v : x.values()) v = rng.uniform();
  auto low = booleanize(x, 0.3);
  auto high = booleanize(x, 0.7);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(low[i][j] == (x.at(i, j) > 0.3));
      CHECK(high[i][j] == (x.at(i, j) > 0.7));
      if (high[i][j]) CHECK(low[i][j]);  // raising the threshold never adds a true
    }
  }
}

TEST_CASE("take materializes rows") {
  Dataset d = xor_dataset();
  Dataset sub = take(d, {2, 0});
  CHECK(sub.n_rows() == 2);
  CHECK(sub.x.at(0, 0) == 1.0);
  CHECK(sub.y == std::vector<int>{1, 0});
  CHECK_THROWS_AS(take(d, {9}), DomainError);
}
