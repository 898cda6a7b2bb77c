#include "subtext/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "subtext/script.hpp"

namespace subtext {

namespace {

// Majority letter script of a document, nullptr when it has no letters.
const ScriptInfo* majority_script(const std::u32string& text) {
  std::map<const ScriptInfo*, std::size_t> counts;
  for (char32_t cp : text) {
    if (const ScriptInfo* s = script_of_letter(cp)) counts[s]++;
  }
  const ScriptInfo* best = nullptr;
  std::size_t best_count = 0;
  for (const auto& [script, count] : counts) {
    if (count > best_count) {
      best = script;
      best_count = count;
    }
  }
  return best;
}

void append_cleaned(std::vector<std::string>& docs, std::string_view line,
                    const CleanOptions& opts, const ScriptInfo* script,
                    std::string_view where) {
  // decode up front so UTF-8 errors carry file + offset
  const std::u32string raw = utf8_decode(line, where);
  std::u32string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char32_t cp : raw) {
    if (is_unicode_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (is_unicode_control(cp)) continue;
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(cp);
  }
  if (out.size() < opts.min_chars) return;
  if (script != nullptr) {
    const ScriptInfo* major = majority_script(out);
    if (major != nullptr && major != script) return;
  }
  docs.push_back(utf8_encode(out));
}

}  // namespace

std::optional<std::string> clean_document(std::string_view text,
                                          const CleanOptions& opts) {
  std::vector<std::string> docs;
  append_cleaned(docs, text, opts, nullptr, {});
  if (docs.empty()) return std::nullopt;
  return std::move(docs.front());
}

std::uint64_t count_whitespace_tokens(const std::vector<std::string>& docs) {
  std::uint64_t n = 0;
  for (const auto& d : docs) n += split_whitespace(d).size();
  return n;
}

namespace {

Corpus finish_corpus(std::vector<std::string> docs, const std::string& lang) {
  Corpus c;
  c.documents = std::move(docs);
  c.language_code = lang;
  c.token_count = count_whitespace_tokens(c.documents);
  return c;
}

}  // namespace

Corpus ingest_corpus(const std::filesystem::path& path,
                     const std::string& language_code,
                     const CleanOptions& opts) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) {
    throw Error("no such path: " + path.string());
  }
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  if (files.empty()) {
    throw Error("no readable files under: " + path.string());
  }

  const ScriptInfo* script = script_for_language(language_code);
  std::vector<std::string> docs;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot open file: " + file.string());
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      append_cleaned(docs, line, opts, script, file.string());
    }
  }
  if (docs.empty()) {
    throw Error("zero surviving documents under: " + path.string());
  }
  return finish_corpus(std::move(docs), language_code);
}

Corpus make_corpus(const std::vector<std::string>& lines,
                   const std::string& language_code,
                   const CleanOptions& opts) {
  const ScriptInfo* script = script_for_language(language_code);
  std::vector<std::string> docs;
  for (const auto& line : lines) {
    append_cleaned(docs, line, opts, script, {});
  }
  if (docs.empty()) {
    throw Error("zero surviving documents");
  }
  return finish_corpus(std::move(docs), language_code);
}

std::pair<Corpus, Corpus> split_train_valid(const Corpus& corpus,
                                            const SplitSpec& spec) {
  if (!(spec.valid_fraction > 0.0 && spec.valid_fraction < 1.0)) {
    throw Error("valid_fraction must be strictly between 0 and 1");
  }
  const std::size_t n = corpus.documents.size();
  if (n < 2) throw Error("corpus too small to split (need >= 2 documents)");

  const std::size_t n_valid = static_cast<std::size_t>(
      std::llround(spec.valid_fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint64_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    rank[i] = splitmix64(splitmix64(spec.seed) ^ (i + 1));
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });

  std::vector<bool> is_valid(n, false);
  for (std::size_t i = 0; i < n_valid; ++i) is_valid[order[i]] = true;

  std::vector<std::string> train_docs, valid_docs;
  for (std::size_t i = 0; i < n; ++i) {
    (is_valid[i] ? valid_docs : train_docs).push_back(corpus.documents[i]);
  }
  return {finish_corpus(std::move(train_docs), corpus.language_code),
          finish_corpus(std::move(valid_docs), corpus.language_code)};
}

void write_corpus_dir(const Corpus& train, const Corpus& valid,
                      const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write_lines = [](const fs::path& p, const std::vector<std::string>& docs) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write file: " + p.string());
    for (const auto& d : docs) out << d << '\n';
  };
  write_lines(dir / "train.txt", train.documents);
  write_lines(dir / "valid.txt", valid.documents);
  std::ofstream stats(dir / "stats.txt", std::ios::binary);
  if (!stats) throw Error("cannot write file: " + (dir / "stats.txt").string());
  stats << "language=" << train.language_code << '\n'
        << "train_documents=" << train.documents.size() << '\n'
        << "train_tokens=" << train.token_count << '\n'
        << "valid_documents=" << valid.documents.size() << '\n'
        << "valid_tokens=" << valid.token_count << '\n';
}

Corpus load_corpus_file(const std::filesystem::path& file,
                        const std::string& language_code) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open file: " + file.string());
  std::vector<std::string> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    utf8_decode(line, file.string());  // validate
    if (!line.empty()) docs.push_back(line);
  }
  if (docs.empty()) throw Error("zero surviving documents in: " + file.string());
  return finish_corpus(std::move(docs), language_code);
}

}  // namespace subtext
