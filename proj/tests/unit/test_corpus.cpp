#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "subtext/common.hpp"
#include "subtext/corpus.hpp"

using namespace subtext;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() /
                 ("subtext_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace

TEST_CASE("clean_document collapses whitespace and trims") {
  CleanOptions opts{.min_chars = 1};
  CHECK(clean_document("  a   b\t c ", opts) == "a b c");
  CHECK(clean_document("a b", opts) == "a b");
}

TEST_CASE("clean_document drops short documents") {
  CHECK(clean_document("ab", CleanOptions{.min_chars = 10}) == std::nullopt);
  CHECK(clean_document("", CleanOptions{.min_chars = 1}) == std::nullopt);
}

TEST_CASE("clean_document strips control characters") {
  CleanOptions opts{.min_chars = 1};
  CHECK(clean_document(std::string("a\0b", 3), opts) == "ab");
  CHECK(clean_document("a\x01\x02z", opts) == "az");
}

TEST_CASE("cleaning is idempotent") {
  CleanOptions opts{.min_chars = 1};
  Rng rng(7);
  const char32_t pool[] = {U'a', U'b', U' ', U'\t', 0x0001, 0x00A0, U'न',
                           U'म', 0x0000, U'!', U'9'};
  for (int trial = 0; trial < 200; ++trial) {
    std::u32string s;
    const int len = static_cast<int>(rng.uniform_int(30));
    for (int i = 0; i < len; ++i) {
      s.push_back(pool[rng.uniform_int(std::size(pool))]);
    }
    auto once = clean_document(utf8_encode(s), opts);
    if (!once.has_value()) continue;
    auto twice = clean_document(*once, opts);
    REQUIRE(twice.has_value());
    CHECK(*twice == *once);
  }
}

TEST_CASE("ingest reads files in lexicographic order and cleans") {
  auto dir = make_temp_dir("ingest");
  write_file(dir / "b.txt", "second file line one\nsecond file line two\n");
  write_file(dir / "a.txt", "first file line one\n\n   \n");
  write_file(dir / "c.txt", "third file line one\n");
  CleanOptions opts{.min_chars = 5};
  Corpus c = ingest_corpus(dir, "en", opts);
  REQUIRE(c.documents.size() == 4);
  CHECK(c.documents[0] == "first file line one");
  CHECK(c.documents[1] == "second file line one");
  CHECK(c.documents[3] == "third file line one");
  CHECK(c.token_count == 16);
  CHECK(c.language_code == "en");
  fs::remove_all(dir);
}

TEST_CASE("ingest errors") {
  CHECK_THROWS_WITH_AS(ingest_corpus("/no/such/path/zz", "hi"),
                       doctest::Contains("no such path"), Error);

  auto dir = make_temp_dir("ingest_err");
  write_file(dir / "blank.txt", "\n\n   \n");
  CHECK_THROWS_WITH_AS(ingest_corpus(dir, "en", CleanOptions{.min_chars = 1}),
                       doctest::Contains("zero surviving documents"), Error);

  write_file(dir / "bad.txt", std::string("valid start then \xFF\xFE\n"));
  try {
    ingest_corpus(dir, "en", CleanOptions{.min_chars = 1});
    FAIL("expected Error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad.txt") != std::string::npos);
    CHECK(std::string(e.what()).find("offset 17") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("ingest drops majority-foreign-script documents") {
  auto dir = make_temp_dir("script");
  write_file(dir / "mixed.txt",
             "नमस्ते दुनिया यह हिंदी पाठ है\n"
             "this line is entirely latin text\n"
             "नमस्ते hello यह ok मिश्रित है\n");
  Corpus c = ingest_corpus(dir, "hi", CleanOptions{.min_chars = 3});
  REQUIRE(c.documents.size() == 2);  // the all-latin line is gone
  CHECK(c.documents[1].find("hello") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("split 10 docs at 0.2 gives 8 train + 2 valid, reproducibly") {
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i) lines.push_back("document number " + std::to_string(i));
  Corpus c = make_corpus(lines, "en", CleanOptions{.min_chars = 3});
  SplitSpec spec{0.2, 7};
  auto [train1, valid1] = split_train_valid(c, spec);
  CHECK(train1.documents.size() == 8);
  CHECK(valid1.documents.size() == 2);
  auto [train2, valid2] = split_train_valid(c, spec);
  CHECK(train1.documents == train2.documents);
  CHECK(valid1.documents == valid2.documents);
}

TEST_CASE("split is an exact partition; sizes depend only on fraction") {
  std::vector<std::string> lines;
  for (int i = 0; i < 53; ++i) lines.push_back("line " + std::to_string(i) + " xyz");
  Corpus c = make_corpus(lines, "en", CleanOptions{.min_chars = 3});
  std::set<std::size_t> train_sizes;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 99ULL}) {
    auto [train, valid] = split_train_valid(c, SplitSpec{0.25, seed});
    train_sizes.insert(train.documents.size());
    // partition: union preserves multiset, no overlap
    std::multiset<std::string> merged(train.documents.begin(), train.documents.end());
    merged.insert(valid.documents.begin(), valid.documents.end());
    CHECK(merged == std::multiset<std::string>(c.documents.begin(), c.documents.end()));
    const double ratio = double(valid.documents.size()) / double(c.documents.size());
    CHECK(std::abs(ratio - 0.25) <= 1.0 / double(c.documents.size()));
  }
  CHECK(train_sizes.size() == 1);  // same sizes across seeds
  // ...but at least two seeds give different partitions
  auto [ta, va] = split_train_valid(c, SplitSpec{0.25, 1});
  auto [tb, vb] = split_train_valid(c, SplitSpec{0.25, 2});
  CHECK(va.documents != vb.documents);
}

TEST_CASE("split rejects tiny corpora and bad fractions") {
  Corpus c = make_corpus({"only one document here"}, "en", CleanOptions{.min_chars = 3});
  CHECK_THROWS_AS(split_train_valid(c, SplitSpec{0.5, 1}), Error);
  Corpus c2 = make_corpus({"first doc ok", "second doc ok"}, "en",
                          CleanOptions{.min_chars = 3});
  CHECK_THROWS_AS(split_train_valid(c2, SplitSpec{0.0, 1}), Error);
  CHECK_THROWS_AS(split_train_valid(c2, SplitSpec{1.0, 1}), Error);
}

TEST_CASE("token_count equals whitespace token sum") {
  Corpus c = make_corpus({"one two three", "four five"}, "en",
                         CleanOptions{.min_chars = 3});
  CHECK(c.token_count == 5);
}

TEST_CASE("corpus dir round trip with stats") {
  auto dir = make_temp_dir("corpusdir");
  Corpus c = make_corpus({"alpha beta gamma", "delta epsilon", "zeta eta theta"},
                         "en", CleanOptions{.min_chars = 3});
  auto [train, valid] = split_train_valid(c, SplitSpec{0.34, 5});
  write_corpus_dir(train, valid, dir);
  Corpus train2 = load_corpus_file(dir / "train.txt", "en");
  Corpus valid2 = load_corpus_file(dir / "valid.txt", "en");
  CHECK(train2.documents == train.documents);
  CHECK(valid2.documents == valid.documents);
  const std::string stats = read_file((dir / "stats.txt").string());
  CHECK(stats.find("language=en") != std::string::npos);
  CHECK(stats.find("train_documents=" + std::to_string(train.documents.size())) !=
        std::string::npos);
  fs::remove_all(dir);
}
