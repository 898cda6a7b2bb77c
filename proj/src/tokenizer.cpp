#include "subtext/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace subtext {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kUnkPenalty = 10.0;
// expected counts never hit exact zero, so log probs stay finite
constexpr double kCountFloor = 1e-12;

double log_add(double x, double y) {
  if (x == kNegInf) return y;
  if (y == kNegInf) return x;
  const double hi = std::max(x, y);
  const double lo = std::min(x, y);
  return hi + std::log1p(std::exp(lo - hi));
}

struct Edge {
  int end;
  int id;  // vocab id (>= kNumSpecials) or kUnkId
  double log_prob;
};

// Segmentation lattice over a pretokenized codepoint string: edges_from[i]
// holds every vocab piece matching at position i. With single-character
// coverage (or the UNK fallback) every position reaches both ends.
struct Lattice {
  int n = 0;
  std::vector<std::vector<Edge>> edges_from;
};

struct ViterbiCell {
  double score = kNegInf;
  int count = 0;
  int edge = -1;  // index into edges_from[i]
};

}  // namespace

// ---------------------------------------------------------------------------
// SubwordVocab

SubwordVocab::SubwordVocab(std::vector<PieceEntry> pieces)
    : pieces_(std::move(pieces)) {
  index_.reserve(pieces_.size() * 2);
  min_log_prob_ = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const PieceEntry& e = pieces_[i];
    if (e.piece.empty()) throw Error("vocab piece must be non-empty");
    if (e.log_prob > 0.0 || !std::isfinite(e.log_prob)) {
      throw Error("piece log_prob must be finite and <= 0: " + e.piece);
    }
    std::u32string cps = utf8_decode(e.piece);
    auto [it, inserted] =
        index_.emplace(std::move(cps), kNumSpecials + static_cast<int>(i));
    if (!inserted) throw Error("duplicate vocab piece: " + e.piece);
    max_piece_cps_ = std::max(max_piece_cps_,
                              static_cast<int>(it->first.size()));
    min_log_prob_ = std::min(min_log_prob_, e.log_prob);
  }
}

int SubwordVocab::piece_id(const std::u32string& piece) const {
  auto it = index_.find(piece);
  return it == index_.end() ? -1 : it->second;
}

const std::string& SubwordVocab::piece_text(int id) const {
  static const std::string specials[kNumSpecials] = {"<unk>", "<s>", "</s>",
                                                     "<pad>"};
  if (!valid_id(id)) throw Error("unknown piece id: " + std::to_string(id));
  if (id < kNumSpecials) return specials[id];
  return pieces_[id - kNumSpecials].piece;
}

double SubwordVocab::unk_log_prob() const {
  return min_log_prob_ - kUnkPenalty;
}

bool SubwordVocab::covers(std::string_view text) const {
  for (char32_t cp : pretokenize(text)) {
    if (index_.find(std::u32string(1, cp)) == index_.end()) return false;
  }
  return true;
}

namespace {

Lattice build_lattice(const SubwordVocab& vocab, const std::u32string& text,
                      bool allow_unk) {
  Lattice lat;
  lat.n = static_cast<int>(text.size());
  lat.edges_from.resize(lat.n + 1);
  std::u32string probe;
  for (int i = 0; i < lat.n; ++i) {
    const int max_len = std::min<int>(vocab.max_piece_cps(), lat.n - i);
    probe.clear();
    for (int len = 1; len <= max_len; ++len) {
      probe.push_back(text[i + len - 1]);
      const int id = vocab.piece_id(probe);
      if (id < 0) continue;
      lat.edges_from[i].push_back(
          {i + len, id, vocab.pieces()[id - SubwordVocab::kNumSpecials].log_prob});
    }
    // With an UNK fallback every position keeps an outgoing edge, which
    // makes the lattice fully connected.
    if (allow_unk && lat.edges_from[i].empty()) {
      lat.edges_from[i].push_back({i + 1, SubwordVocab::kUnkId,
                                   vocab.unk_log_prob()});
    }
  }
  if (!allow_unk) {
    // a complete path must exist; if not, some reachable position is stuck
    // on a character no piece starts with
    std::vector<bool> reach(lat.n + 1, false);
    reach[0] = true;
    int stuck = -1;
    for (int i = 0; i < lat.n; ++i) {
      if (!reach[i]) continue;
      if (lat.edges_from[i].empty() && stuck < 0) stuck = i;
      for (const Edge& e : lat.edges_from[i]) reach[e.end] = true;
    }
    if (!reach[lat.n]) {
      throw Error("character not covered by vocab: " +
                  utf8_encode(text[stuck < 0 ? 0 : stuck]));
    }
  }
  return lat;
}

// Best path per position of the suffix DP. Ties: fewer pieces, then longer
// first piece — which makes the overall tie-break leftmost-longest.
std::vector<ViterbiCell> viterbi_cells(const Lattice& lat) {
  std::vector<ViterbiCell> best(lat.n + 1);
  best[lat.n] = {0.0, 0, -1};
  for (int i = lat.n - 1; i >= 0; --i) {
    ViterbiCell cell;
    const auto& edges = lat.edges_from[i];
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const Edge& edge = edges[e];
      const ViterbiCell& next = best[edge.end];
      if (next.score == kNegInf) continue;
      const double score = edge.log_prob + next.score;
      const int count = 1 + next.count;
      const int len = edge.end - i;
      bool take = false;
      if (cell.edge < 0 || score > cell.score) {
        take = true;
      } else if (score == cell.score) {
        const int cur_len = edges[cell.edge].end - i;
        if (count < cell.count || (count == cell.count && len > cur_len)) {
          take = true;
        }
      }
      if (take) cell = {score, count, static_cast<int>(e)};
    }
    best[i] = cell;
  }
  return best;
}

std::vector<int> viterbi_path(const Lattice& lat,
                              const std::vector<ViterbiCell>& best,
                              double* log_prob) {
  std::vector<int> ids;
  if (log_prob != nullptr) *log_prob = lat.n == 0 ? 0.0 : best[0].score;
  int pos = 0;
  while (pos < lat.n) {
    const ViterbiCell& cell = best[pos];
    if (cell.edge < 0) throw Error("lattice has no complete path");
    const Edge& edge = lat.edges_from[pos][cell.edge];
    ids.push_back(edge.id);
    pos = edge.end;
  }
  return ids;
}

double lattice_log_z(const Lattice& lat, std::vector<double>* alpha_out) {
  std::vector<double> alpha(lat.n + 1, kNegInf);
  alpha[0] = 0.0;
  for (int i = 0; i < lat.n; ++i) {
    if (alpha[i] == kNegInf) continue;
    for (const Edge& e : lat.edges_from[i]) {
      alpha[e.end] = log_add(alpha[e.end], alpha[i] + e.log_prob);
    }
  }
  const double z = alpha[lat.n];
  if (alpha_out != nullptr) *alpha_out = std::move(alpha);
  return z;
}

// Adds freq * (posterior expected count) of each piece to counts.
// Returns log Z for the sentence.
double accumulate_expected_counts(const Lattice& lat, double freq,
                                  std::vector<double>& counts) {
  std::vector<double> alpha;
  const double z = lattice_log_z(lat, &alpha);
  if (lat.n == 0) return 0.0;
  std::vector<double> beta(lat.n + 1, kNegInf);
  beta[lat.n] = 0.0;
  for (int i = lat.n - 1; i >= 0; --i) {
    for (const Edge& e : lat.edges_from[i]) {
      beta[i] = log_add(beta[i], e.log_prob + beta[e.end]);
    }
  }
  for (int i = 0; i < lat.n; ++i) {
    if (alpha[i] == kNegInf) continue;
    for (const Edge& e : lat.edges_from[i]) {
      if (e.id < SubwordVocab::kNumSpecials) continue;
      const double post = std::exp(alpha[i] + e.log_prob + beta[e.end] - z);
      counts[e.id - SubwordVocab::kNumSpecials] += freq * post;
    }
  }
  return z;
}

// Pretokenized sentence -> frequency, deduplicated for EM/prune speed.
std::map<std::u32string, std::uint64_t> marked_sentence_counts(
    const Corpus& corpus) {
  std::map<std::u32string, std::uint64_t> out;
  for (const auto& doc : corpus.documents) {
    std::u32string marked = pretokenize(doc);
    if (!marked.empty()) out[std::move(marked)]++;
  }
  return out;
}

}  // namespace

std::vector<int> SubwordVocab::segment(const std::u32string& marked,
                                       double* log_prob) const {
  if (marked.empty()) {
    if (log_prob != nullptr) *log_prob = 0.0;
    return {};
  }
  Lattice lat = build_lattice(*this, marked, /*allow_unk=*/true);
  return viterbi_path(lat, viterbi_cells(lat), log_prob);
}

std::vector<int> SubwordVocab::encode(std::string_view text) const {
  return segment(pretokenize(text));
}

std::vector<std::string> SubwordVocab::encode_pieces(
    std::string_view text) const {
  std::vector<std::string> out;
  for (int id : encode(text)) out.push_back(piece_text(id));
  return out;
}

std::string SubwordVocab::decode(std::span<const int> ids) const {
  std::u32string marked;
  for (int id : ids) {
    if (!valid_id(id)) throw Error("unknown piece id: " + std::to_string(id));
    if (id == kUnkId) {
      marked.push_back(kUnkGlyph);
    } else if (id < kNumSpecials) {
      continue;  // BOS/EOS/PAD render as nothing
    } else {
      marked += utf8_decode(pieces_[id - kNumSpecials].piece);
    }
  }
  return detokenize_marked(marked);
}

// ---------------------------------------------------------------------------
// Pretokenization

std::string normalize_spaces(std::string_view text) {
  std::u32string in = utf8_decode(text);
  std::u32string out;
  out.reserve(in.size());
  bool pending = false;
  for (char32_t cp : in) {
    if (is_unicode_space(cp)) {
      pending = !out.empty();
      continue;
    }
    if (pending) {
      out.push_back(U' ');
      pending = false;
    }
    out.push_back(cp);
  }
  return utf8_encode(out);
}

std::u32string pretokenize(std::string_view text) {
  std::u32string in = utf8_decode(normalize_spaces(text));
  std::u32string out;
  out.reserve(in.size() + in.size() / 4 + 1);
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (i == 0) out.push_back(kBoundaryMarker);
    if (in[i] == U' ') {
      out.push_back(kBoundaryMarker);
    } else {
      out.push_back(in[i]);
    }
  }
  return out;
}

std::string detokenize_marked(const std::u32string& marked) {
  std::u32string out;
  out.reserve(marked.size());
  for (char32_t cp : marked) {
    out.push_back(cp == kBoundaryMarker ? U' ' : cp);
  }
  if (!out.empty() && out.front() == U' ') out.erase(out.begin());
  return utf8_encode(out);
}

// ---------------------------------------------------------------------------
// Serialization (text model format)

std::string SubwordVocab::serialize() const {
  std::ostringstream out;
  out << "format=subtext-tokenizer\n"
      << "version=1\n"
      << "marker=" << utf8_encode(kBoundaryMarker) << '\n'
      << "specials=<unk> <s> </s> <pad>\n"
      << "pieces=" << pieces_.size() << '\n';
  for (const PieceEntry& e : pieces_) {
    out << e.piece << '\t' << format_g17(e.log_prob) << '\n';
  }
  return out.str();
}

SubwordVocab SubwordVocab::deserialize(std::string_view blob) {
  std::istringstream in{std::string(blob)};
  std::string line;
  auto expect_kv = [&](std::string_view key) -> std::string {
    if (!std::getline(in, line)) {
      throw Error("tokenizer model truncated, expected key: " +
                  std::string(key));
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.substr(0, eq) != key) {
      throw Error("tokenizer model: expected key '" + std::string(key) +
                  "', got line '" + line + "'");
    }
    return line.substr(eq + 1);
  };
  if (expect_kv("format") != "subtext-tokenizer") {
    throw Error("not a subtext tokenizer model");
  }
  const std::string version = expect_kv("version");
  if (version != "1") {
    throw Error("unsupported tokenizer model version " + version +
                " (supported: 1)");
  }
  expect_kv("marker");
  expect_kv("specials");
  const long n = std::strtol(expect_kv("pieces").c_str(), nullptr, 10);
  if (n < 0) throw Error("tokenizer model: bad piece count");
  std::vector<PieceEntry> pieces;
  pieces.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw Error("tokenizer model truncated at piece " + std::to_string(i));
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error("tokenizer model: malformed piece line '" + line + "'");
    }
    char* end = nullptr;
    const std::string num = line.substr(tab + 1);
    const double lp = std::strtod(num.c_str(), &end);
    if (end == num.c_str()) {
      throw Error("tokenizer model: bad log_prob '" + num + "'");
    }
    pieces.push_back({line.substr(0, tab), lp});
  }
  return SubwordVocab(std::move(pieces));
}

// ---------------------------------------------------------------------------
// Training

std::vector<SeedCandidate> build_seed_vocab(const Corpus& corpus,
                                            const TrainerConfig& config) {
  if (corpus.documents.empty()) throw Error("corpus is empty");
  // marker-prefixed word -> frequency
  std::map<std::u32string, std::uint64_t> words;
  for (const auto& doc : corpus.documents) {
    const std::u32string marked = pretokenize(doc);
    std::size_t start = 0;
    for (std::size_t i = 1; i <= marked.size(); ++i) {
      if (i == marked.size() || marked[i] == kBoundaryMarker) {
        words[marked.substr(start, i - start)]++;
        start = i;
      }
    }
  }

  std::map<std::u32string, std::uint64_t> counts;
  for (const auto& [word, freq] : words) {
    for (std::size_t i = 0; i < word.size(); ++i) {
      const std::size_t max_len =
          std::min<std::size_t>(config.max_piece_len, word.size() - i);
      for (std::size_t len = 1; len <= max_len; ++len) {
        counts[word.substr(i, len)] += freq;
      }
    }
  }

  std::vector<SeedCandidate> singles;
  std::vector<SeedCandidate> multi;
  for (const auto& [piece, count] : counts) {
    if (piece.size() == 1) {
      singles.push_back({piece, count});
    } else if (count >= static_cast<std::uint64_t>(config.min_piece_count)) {
      multi.push_back({piece, count});
    }
  }
  auto score = [](const SeedCandidate& c) {
    return static_cast<double>(c.count) * static_cast<double>(c.piece.size());
  };
  std::sort(multi.begin(), multi.end(),
            [&](const SeedCandidate& a, const SeedCandidate& b) {
              const double sa = score(a), sb = score(b);
              if (sa != sb) return sa > sb;
              return a.piece < b.piece;
            });
  const std::size_t budget =
      config.seed_vocab_size > static_cast<int>(singles.size())
          ? static_cast<std::size_t>(config.seed_vocab_size) - singles.size()
          : 0;
  if (multi.size() > budget) multi.resize(budget);

  std::vector<SeedCandidate> out = std::move(multi);
  out.insert(out.end(), singles.begin(), singles.end());
  std::sort(out.begin(), out.end(),
            [&](const SeedCandidate& a, const SeedCandidate& b) {
              const double sa = score(a), sb = score(b);
              if (sa != sb) return sa > sb;
              return a.piece < b.piece;
            });
  return out;
}

double em_step(const Corpus& corpus, SubwordVocab& vocab) {
  const auto sentences = marked_sentence_counts(corpus);
  std::vector<double> counts(vocab.pieces_.size(), 0.0);
  double ll = 0.0;
  for (const auto& [marked, freq] : sentences) {
    Lattice lat = build_lattice(vocab, marked, /*allow_unk=*/false);
    ll += static_cast<double>(freq) *
          accumulate_expected_counts(lat, static_cast<double>(freq), counts);
  }
  double total = 0.0;
  for (double& c : counts) {
    c = std::max(c, kCountFloor);
    total += c;
  }
  double new_min = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    vocab.pieces_[i].log_prob = std::log(counts[i] / total);
    new_min = std::min(new_min, vocab.pieces_[i].log_prob);
  }
  vocab.min_log_prob_ = new_min;
  return ll;
}

namespace {

// Viterbi score of `text` using every piece except `excluded_id`.
double viterbi_score_excluding(const SubwordVocab& vocab,
                               const std::u32string& text, int excluded_id) {
  Lattice lat = build_lattice(vocab, text, /*allow_unk=*/false);
  for (auto& edges : lat.edges_from) {
    std::erase_if(edges, [&](const Edge& e) { return e.id == excluded_id; });
  }
  const auto best = viterbi_cells(lat);
  return best[0].score;
}

}  // namespace

void prune_vocab(const Corpus& corpus, SubwordVocab& vocab,
                 const TrainerConfig& config) {
  if (vocab.size() <= config.target_vocab_size) return;

  // usage under the one-best segmentation of each sentence
  std::vector<double> usage(vocab.pieces_.size(), 0.0);
  for (const auto& [marked, freq] : marked_sentence_counts(corpus)) {
    Lattice lat = build_lattice(vocab, marked, /*allow_unk=*/false);
    for (int id : viterbi_path(lat, viterbi_cells(lat), nullptr)) {
      if (id >= SubwordVocab::kNumSpecials) {
        usage[id - SubwordVocab::kNumSpecials] +=
            static_cast<double>(freq);
      }
    }
  }

  struct Loss {
    std::size_t idx;
    double loss;
  };
  std::vector<Loss> multi;
  for (std::size_t i = 0; i < vocab.pieces_.size(); ++i) {
    const std::u32string cps = utf8_decode(vocab.pieces_[i].piece);
    if (cps.size() < 2) continue;
    double loss;
    if (usage[i] == 0.0) {
      loss = kNegInf;  // unused pieces go first, their removal is free
    } else {
      const double alt = viterbi_score_excluding(
          vocab, cps, SubwordVocab::kNumSpecials + static_cast<int>(i));
      loss = usage[i] * (vocab.pieces_[i].log_prob - alt);
    }
    multi.push_back({i, loss});
  }
  if (multi.empty()) return;

  const std::size_t over =
      static_cast<std::size_t>(vocab.size() - config.target_vocab_size);
  std::size_t drop =
      multi.size() -
      static_cast<std::size_t>(
          std::ceil(config.shrink_factor * static_cast<double>(multi.size())));
  drop = std::min(drop, over);       // never overshoot below target
  if (drop == 0) drop = std::min(over, multi.size());
  drop = std::min(drop, multi.size());

  std::sort(multi.begin(), multi.end(), [&](const Loss& a, const Loss& b) {
    if (a.loss != b.loss) return a.loss < b.loss;
    return vocab.pieces_[a.idx].piece < vocab.pieces_[b.idx].piece;
  });
  std::set<std::size_t> dropped;
  for (std::size_t k = 0; k < drop; ++k) dropped.insert(multi[k].idx);

  std::vector<SubwordVocab::PieceEntry> kept;
  kept.reserve(vocab.pieces_.size() - dropped.size());
  double log_z = kNegInf;
  for (std::size_t i = 0; i < vocab.pieces_.size(); ++i) {
    if (dropped.count(i)) continue;
    kept.push_back(vocab.pieces_[i]);
    log_z = log_add(log_z, vocab.pieces_[i].log_prob);
  }
  for (auto& e : kept) e.log_prob -= log_z;
  vocab = SubwordVocab(std::move(kept));
}

SubwordVocab train_unigram(const Corpus& corpus, const TrainerConfig& config) {
  if (corpus.documents.empty()) throw Error("corpus is empty");
  const auto seeds = build_seed_vocab(corpus, config);

  std::size_t n_single = 0;
  double total = 0.0;
  for (const auto& s : seeds) {
    if (s.piece.size() == 1) ++n_single;
    total += static_cast<double>(s.count);
  }
  const int floor_size =
      SubwordVocab::kNumSpecials + static_cast<int>(n_single);
  if (config.target_vocab_size < floor_size) {
    throw Error("target_vocab_size " + std::to_string(config.target_vocab_size) +
                " is below the coverage floor " + std::to_string(floor_size) +
                " (specials + distinct characters)");
  }

  std::vector<SubwordVocab::PieceEntry> entries;
  entries.reserve(seeds.size());
  for (const auto& s : seeds) {
    entries.push_back({utf8_encode(s.piece),
                       std::log(static_cast<double>(s.count) / total)});
  }
  SubwordVocab vocab(std::move(entries));

  while (true) {
    for (int k = 0; k < config.em_iters_per_round; ++k) em_step(corpus, vocab);
    if (vocab.size() <= config.target_vocab_size) break;
    prune_vocab(corpus, vocab, config);
  }
  for (int k = 0; k < config.em_iters_per_round; ++k) em_step(corpus, vocab);

  // final id order: by descending probability, ties lexicographic
  std::vector<SubwordVocab::PieceEntry> final_pieces = vocab.pieces_;
  std::sort(final_pieces.begin(), final_pieces.end(),
            [](const SubwordVocab::PieceEntry& a,
               const SubwordVocab::PieceEntry& b) {
              if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
              return a.piece < b.piece;
            });
  return SubwordVocab(std::move(final_pieces));
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

namespace {

void enumerate_rec(const Lattice& lat, int pos,
                   std::vector<int>& ids, double score,
                   std::vector<Segmentation>& out) {
  if (pos == lat.n) {
    out.push_back({ids, score});
    return;
  }
  for (const Edge& e : lat.edges_from[pos]) {
    ids.push_back(e.id);
    enumerate_rec(lat, e.end, ids, score + e.log_prob, out);
    ids.pop_back();
  }
}

}  // namespace

std::vector<Segmentation> enumerate_segmentations(const SubwordVocab& vocab,
                                                  const std::u32string& marked) {
  std::vector<Segmentation> out;
  if (marked.empty()) return out;
  Lattice lat = build_lattice(vocab, marked, /*allow_unk=*/false);
  std::vector<int> ids;
  enumerate_rec(lat, 0, ids, 0.0, out);
  return out;
}

std::vector<double> expected_piece_counts(const SubwordVocab& vocab,
                                          const std::u32string& marked,
                                          double* log_z) {
  std::vector<double> counts(vocab.pieces().size(), 0.0);
  Lattice lat = build_lattice(vocab, marked, /*allow_unk=*/false);
  const double z = accumulate_expected_counts(lat, 1.0, counts);
  if (log_z != nullptr) *log_z = z;
  return counts;
}

}  // namespace subtext
