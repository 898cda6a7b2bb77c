#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subtext/common.hpp"

namespace subtext {

struct Corpus {
  std::vector<std::string> documents;  // cleaned, one line each
  std::string language_code;
  std::uint64_t token_count = 0;  // whitespace tokens over all documents
};

struct SplitSpec {
  double valid_fraction = 0.2;  // strictly in (0, 1)
  std::uint64_t seed = 0;
};

struct CleanOptions {
  std::size_t min_chars = 20;  // codepoints; shorter documents are dropped
};

// Strips control characters, folds whitespace runs (including exotic Unicode
// spaces) to single ASCII spaces, trims. Returns nullopt when the document
// is shorter than min_chars after cleaning. Idempotent.
std::optional<std::string> clean_document(std::string_view text,
                                          const CleanOptions& opts = {});

std::uint64_t count_whitespace_tokens(const std::vector<std::string>& docs);

// Reads a UTF-8 .txt file (one document per line) or a directory of such
// files in lexicographic order. Documents are cleaned; for languages with a
// known script, documents whose majority letter script differs are dropped.
Corpus ingest_corpus(const std::filesystem::path& path,
                     const std::string& language_code,
                     const CleanOptions& opts = {});

// Builds a corpus from in-memory lines (same cleaning pipeline as ingest).
Corpus make_corpus(const std::vector<std::string>& lines,
                   const std::string& language_code,
                   const CleanOptions& opts = {});

// Deterministic exact partition: documents are ranked by a hash of
// (index, seed) and the round(valid_fraction * n) smallest ranks form the
// validation set, so sizes depend only on (n, valid_fraction).
std::pair<Corpus, Corpus> split_train_valid(const Corpus& corpus,
                                            const SplitSpec& spec);

// Persists train.txt / valid.txt / stats.txt under dir.
void write_corpus_dir(const Corpus& train, const Corpus& valid,
                      const std::filesystem::path& dir);

// Loads a previously written one-document-per-line file without re-cleaning
// (empty lines are skipped).
Corpus load_corpus_file(const std::filesystem::path& file,
                        const std::string& language_code);

}  // namespace subtext
