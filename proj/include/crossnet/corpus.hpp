// Stance corpora, tweet tokenization, word vectors and stratified folds.
#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "crossnet/rng.hpp"
#include "crossnet/tensor.hpp"

namespace crossnet {

// Class order is fixed: it defines label indices everywhere.
enum class Stance : std::uint8_t { Favor = 0, Against = 1, Neither = 2 };
inline constexpr std::size_t kNumStances = 3;
inline constexpr std::array<Stance, kNumStances> kStances{Stance::Favor, Stance::Against, Stance::Neither};

inline std::string_view stance_name(Stance s) {
  switch (s) {
    case Stance::Favor: return "FAVOR";
    case Stance::Against: return "AGAINST";
    case Stance::Neither: return "NEITHER";
  }
  return "?";
}

inline std::size_t stance_index(Stance s) { return static_cast<std::size_t>(s); }
inline Stance stance_from_index(std::size_t i) {
  if (i >= kNumStances) throw std::out_of_range("stance index " + std::to_string(i));
  return static_cast<Stance>(i);
}

namespace detail {
inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}
inline std::string ascii_upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  return out;
}
inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}
}  // namespace detail

// Accepts FAVOR / AGAINST / NEITHER in any case; SemEval's NONE maps to NEITHER.
inline std::optional<Stance> parse_stance(std::string_view s) {
  const auto u = detail::ascii_upper(detail::trim(s));
  if (u == "FAVOR") return Stance::Favor;
  if (u == "AGAINST") return Stance::Against;
  if (u == "NEITHER" || u == "NONE") return Stance::Neither;
  return std::nullopt;
}

// ---- tokenization ---------------------------------------------------------

inline const std::string kUrlToken = "<url>";
inline const std::string kUserToken = "<user>";
inline const std::string kHashtagToken = "<hashtag>";

namespace detail {
// Letters, digits, underscore and any non-ASCII byte (UTF-8 continuation
// bytes stay glued to their word).
inline bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c >= 0x80;
}
inline bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return ascii_lower(s.substr(0, prefix.size())) == prefix;
}
}  // namespace detail

// Lowercases, maps URLs to <url> and @mentions to <user>, expands #tag to
// <hashtag> tag, and emits every other ASCII punctuation byte as its own token.
// Apostrophes between word characters stay inside the word ("don't").
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto word_end = [&](std::size_t j) {
    while (j < n) {
      const auto c = static_cast<unsigned char>(text[j]);
      if (detail::is_word_byte(c)) {
        ++j;
      } else if (c == '\'' && j + 1 < n && j > 0 &&
                 detail::is_word_byte(static_cast<unsigned char>(text[j - 1])) &&
                 detail::is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
        ++j;
      } else {
        break;
      }
    }
    return j;
  };
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (detail::is_space(c)) {
      ++i;
      continue;
    }
    const auto rest = text.substr(i);
    if (detail::starts_with_ci(rest, "http://") || detail::starts_with_ci(rest, "https://") ||
        detail::starts_with_ci(rest, "www.")) {
      while (i < n && !detail::is_space(static_cast<unsigned char>(text[i]))) ++i;
      out.push_back(kUrlToken);
      continue;
    }
    if ((c == '@' || c == '#') && i + 1 < n && detail::is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
      const std::size_t end = word_end(i + 1);
      if (c == '@') {
        out.push_back(kUserToken);
      } else {
        out.push_back(kHashtagToken);
        out.push_back(detail::ascii_lower(text.substr(i + 1, end - i - 1)));
      }
      i = end;
      continue;
    }
    if (detail::is_word_byte(c)) {
      const std::size_t end = word_end(i);
      out.push_back(detail::ascii_lower(text.substr(i, end - i)));
      i = end;
      continue;
    }
    out.emplace_back(1, static_cast<char>(c));
    ++i;
  }
  return out;
}

// ---- instances and TSV loading --------------------------------------------

struct Instance {
  std::string id;
  std::string target;
  std::string text;
  std::vector<std::string> tokens;
  Stance stance = Stance::Neither;
};

struct TargetCounts {
  std::size_t total = 0;
  std::array<std::size_t, kNumStances> per_class{};

  double pct(Stance s) const {
    return total ? 100.0 * static_cast<double>(per_class[stance_index(s)]) / static_cast<double>(total) : 0.0;
  }
};

struct Corpus {
  std::vector<Instance> instances;
  std::size_t rejected_empty = 0;  // rows whose tweet tokenized to nothing
  std::map<std::string, TargetCounts> per_target;

  std::vector<Instance> for_target(std::string_view target) const {
    std::vector<Instance> out;
    for (const auto& inst : instances)
      if (inst.target == target) out.push_back(inst);
    return out;
  }
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cols;
}
}  // namespace detail

inline Corpus parse_semeval(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file, expected header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // Strip a UTF-8 byte-order mark.
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);

  const auto header = detail::split_tabs(line);
  auto find_col = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::ascii_lower(detail::trim(header[i])) == detail::ascii_lower(name)) return i;
    throw DataError(source + ": missing column '" + std::string(name) + "'");
  };
  const std::size_t c_id = find_col("ID");
  const std::size_t c_target = find_col("Target");
  const std::size_t c_tweet = find_col("Tweet");
  const std::size_t c_stance = find_col("Stance");
  const std::size_t needed = std::max({c_id, c_target, c_tweet, c_stance}) + 1;

  Corpus corpus;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split_tabs(line);
    if (cols.size() < needed)
      throw DataError(source + ": row " + std::to_string(row) + " has " + std::to_string(cols.size()) +
                      " columns, expected at least " + std::to_string(needed));
    const auto stance = parse_stance(cols[c_stance]);
    if (!stance)
      throw DataError(source + ": row " + std::to_string(row) + ": unknown stance '" +
                      std::string(cols[c_stance]) + "'");
    Instance inst;
    inst.id = std::string(detail::trim(cols[c_id]));
    inst.target = std::string(detail::trim(cols[c_target]));
    inst.text = std::string(cols[c_tweet]);
    inst.tokens = tokenize(inst.text);
    inst.stance = *stance;
    if (inst.tokens.empty()) {
      ++corpus.rejected_empty;
      continue;
    }
    auto& counts = corpus.per_target[inst.target];
    ++counts.total;
    ++counts.per_class[stance_index(inst.stance)];
    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

inline Corpus load_semeval(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open corpus file '" + path + "'");
  return parse_semeval(in, path);
}

inline void write_semeval(std::ostream& out, const std::vector<Instance>& instances) {
  out << "ID\tTarget\tTweet\tStance\n";
  for (const auto& inst : instances)
    out << inst.id << '\t' << inst.target << '\t' << inst.text << '\t' << stance_name(inst.stance) << '\n';
}

// ---- target names ---------------------------------------------------------

class TargetMap {
 public:
  static TargetMap builtin() {
    TargetMap m;
    m.names_ = {{"CC", "Climate Change is a Real Concern"},
                {"FM", "Feminist Movement"},
                {"HC", "Hillary Clinton"},
                {"LA", "Legalization of Abortion"},
                {"DT", "Donald Trump"}};
    return m;
  }

  // JSON object {"CC": "Climate Change is a Real Concern", ...}.
  static TargetMap from_json(const nlohmann::json& j) {
    TargetMap m;
    for (const auto& [k, v] : j.items()) m.names_[detail::ascii_upper(k)] = v.get<std::string>();
    return m;
  }

  static TargetMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open target map '" + path + "'");
    return from_json(nlohmann::json::parse(in));
  }

  // An abbreviation (any case) or a full target name already present in the map.
  std::string resolve(std::string_view key) const {
    if (auto it = names_.find(detail::ascii_upper(key)); it != names_.end()) return it->second;
    for (const auto& [abbr, name] : names_)
      if (name == key) return name;
    std::string known;
    for (const auto& [abbr, name] : names_) known += (known.empty() ? "" : ", ") + abbr;
    throw std::invalid_argument("unknown target '" + std::string(key) + "' (known: " + known + ")");
  }

  const std::map<std::string, std::string>& entries() const { return names_; }

 private:
  std::map<std::string, std::string> names_;
};

// ---- vocabulary and embeddings --------------------------------------------

inline const std::string kUnknownToken = "<unk>";

// Dense ids 0..V-1. Id 0 is reserved for tokens never added.
class Vocabulary {
 public:
  Vocabulary() { add(kUnknownToken); }

  std::size_t add(const std::string& token) {
    auto [it, inserted] = ids_.try_emplace(token, words_.size());
    if (inserted) words_.push_back(token);
    return it->second;
  }

  void add_all(const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) add(t);
  }

  std::size_t id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? 0 : it->second;
  }

  bool contains(const std::string& token) const { return ids_.contains(token); }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

 private:
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<std::string> words_;
};

inline constexpr std::size_t kEmbeddingDim = 200;
inline constexpr double kOovStddev = 0.1;

// Frozen V x dim lookup table. Never updated by training.
struct EmbeddingMatrix {
  Tensor table;
  double coverage = 0.0;  // fraction of vocabulary rows found in the vectors file
  std::size_t found = 0;
  std::uint64_t seed = 0;
  std::vector<bool> pretrained;  // per row: taken from the vectors file

  std::size_t dim() const { return table.cols(); }
  std::size_t rows() const { return table.rows(); }
};

// Pseudorandom row for a token missing from the pretrained vectors; a pure
// function of (token, seed).
inline std::vector<double> oov_vector(const std::string& token, std::uint64_t seed, std::size_t dim) {
  Rng rng(splitmix64(stable_hash(token) ^ splitmix64(seed)));
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal(0.0, kOovStddev);
  return v;
}

// Reads "word v1 ... vdim" lines, keeping only words in the vocabulary.
inline EmbeddingMatrix build_embeddings(const Vocabulary& vocab, std::istream& vectors, std::uint64_t seed,
                                        std::size_t dim = kEmbeddingDim, const std::string& source = "<stream>") {
  EmbeddingMatrix emb;
  emb.seed = seed;
  emb.table = Tensor({vocab.size(), dim});
  std::vector<bool> have(vocab.size(), false);

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(vectors, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view sv(line);
    const auto sp = sv.find(' ');
    if (sp == std::string_view::npos) continue;
    const std::string word(sv.substr(0, sp));
    const bool wanted = vocab.contains(word);
    std::size_t count = 0;
    std::vector<double> vals;
    if (wanted) vals.reserve(dim);
    std::size_t pos = sp + 1;
    while (pos < sv.size()) {
      while (pos < sv.size() && sv[pos] == ' ') ++pos;
      if (pos >= sv.size()) break;
      auto end = sv.find(' ', pos);
      if (end == std::string_view::npos) end = sv.size();
      if (wanted) {
        double x = 0.0;
        auto [ptr, ec] = std::from_chars(sv.data() + pos, sv.data() + end, x);
        if (ec != std::errc{} || ptr != sv.data() + end)
          throw DataError(source + ": line " + std::to_string(lineno) + ": bad number");
        vals.push_back(x);
      }
      ++count;
      pos = end;
    }
    if (count != dim)
      throw DataError(source + ": line " + std::to_string(lineno) + " has " + std::to_string(count) +
                      " values, expected " + std::to_string(dim));
    if (!wanted) continue;
    const auto id = vocab.id(word);
    if (have[id]) continue;  // first occurrence wins
    have[id] = true;
    std::copy(vals.begin(), vals.end(), emb.table.storage().begin() + static_cast<std::ptrdiff_t>(id * dim));
  }

  emb.pretrained = have;
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    if (have[id]) {
      ++emb.found;
      continue;
    }
    const auto v = oov_vector(vocab.word(id), seed, dim);
    std::copy(v.begin(), v.end(), emb.table.storage().begin() + static_cast<std::ptrdiff_t>(id * dim));
  }
  emb.coverage = static_cast<double>(emb.found) / static_cast<double>(vocab.size());
  return emb;
}

inline EmbeddingMatrix build_embeddings(const Vocabulary& vocab, const std::string& vectors_path, std::uint64_t seed,
                                        std::size_t dim = kEmbeddingDim) {
  std::ifstream in(vectors_path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open vectors file '" + vectors_path + "'");
  return build_embeddings(vocab, in, seed, dim, vectors_path);
}

// Rows without any pretrained vector: all OOV, seeded per token.
inline EmbeddingMatrix random_embeddings(const Vocabulary& vocab, std::uint64_t seed, std::size_t dim) {
  std::istringstream none;
  return build_embeddings(vocab, none, seed, dim);
}

// Fraction of token occurrences whose vocabulary row is not pretrained.
inline double oov_rate(const std::vector<Instance>& instances, const Vocabulary& vocab,
                       const EmbeddingMatrix& emb) {
  const auto& pretrained = emb.pretrained;
  std::size_t total = 0, missing = 0;
  for (const auto& inst : instances)
    for (const auto& t : inst.tokens) {
      ++total;
      const auto id = vocab.id(t);
      if (id >= pretrained.size() || !pretrained[id]) ++missing;
    }
  return total ? static_cast<double>(missing) / static_cast<double>(total) : 0.0;
}

// Loader report for one target: {target, total, favor_pct, against_pct, neither_pct, oov_rate}.
inline nlohmann::json loader_report(const std::string& target, const std::vector<Instance>& instances,
                                    double oov) {
  TargetCounts c;
  for (const auto& inst : instances) {
    ++c.total;
    ++c.per_class[stance_index(inst.stance)];
  }
  return {{"target", target},
          {"total", c.total},
          {"favor_pct", c.pct(Stance::Favor)},
          {"against_pct", c.pct(Stance::Against)},
          {"neither_pct", c.pct(Stance::Neither)},
          {"oov_rate", oov}};
}

// ---- stratified folds -----------------------------------------------------

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;

  // Indices in every fold except the excluded ones, in ascending order.
  std::vector<std::size_t> complement(std::initializer_list<std::size_t> excluded) const {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      if (std::find(excluded.begin(), excluded.end(), f) != excluded.end()) continue;
      out.insert(out.end(), folds[f].begin(), folds[f].end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

// Shuffles each class with rng, then deals its members round-robin. The
// starting fold for each class continues where the previous class stopped,
// so fold sizes also differ by at most one.
inline FoldPlan stratified_folds(const std::vector<Stance>& labels, std::size_t k, Rng& rng) {
  if (k < 2) throw std::invalid_argument("stratified_folds: k must be at least 2");
  std::array<std::vector<std::size_t>, kNumStances> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[stance_index(labels[i])].push_back(i);
  for (auto s : kStances)
    if (by_class[stance_index(s)].size() < k)
      throw std::invalid_argument("stratified_folds: class " + std::string(stance_name(s)) + " has " +
                                  std::to_string(by_class[stance_index(s)].size()) + " instances, fewer than k=" +
                                  std::to_string(k));
  FoldPlan plan;
  plan.k = k;
  plan.seed = rng.seed();
  plan.folds.resize(k);
  std::size_t next = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (auto idx : members) {
      plan.folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

inline FoldPlan stratified_folds(const std::vector<Instance>& instances, std::size_t k, Rng& rng) {
  std::vector<Stance> labels;
  labels.reserve(instances.size());
  for (const auto& inst : instances) labels.push_back(inst.stance);
  return stratified_folds(labels, k, rng);
}

}  // namespace crossnet
