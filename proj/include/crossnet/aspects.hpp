// Attention dumps and highly-attended-word lexicons for CrossNet models.
#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossnet/corpus.hpp"
#include "crossnet/model.hpp"
#include "crossnet/trainer.hpp"

namespace crossnet {

struct AttentionRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<double> weights;
  std::string predicted;
  std::string gold;
};

inline nlohmann::json to_json(const AttentionRecord& r) {
  return {{"id", r.id}, {"tokens", r.tokens}, {"weights", r.weights}, {"predicted", r.predicted}, {"gold", r.gold}};
}

// Runs an eval-mode forward and reads off the attention weights over the
// sentence tokens.
inline AttentionRecord attend(const Instance& inst, const Vocabulary& vocab, const Var& embeddings,
                              const ModelParams& params) {
  if (params.config.arch != Architecture::CrossNet)
    throw std::invalid_argument("attention export needs a crossnet model, got " +
                                std::string(arch_name(params.config.arch)));
  const Example ex = encode(inst, tokenize(inst.target), vocab);
  const auto pred = predict(ex, embeddings, params, Mode::Eval);
  AttentionRecord r;
  r.id = inst.id;
  r.tokens = inst.tokens;
  r.weights = pred.attention->weights->value.storage();
  r.predicted = std::string(stance_name(stance_from_index(pred.label)));
  r.gold = std::string(stance_name(inst.stance));
  return r;
}

inline constexpr double kDefaultAttentionMultiplier = 2.0;

// Per-token attention statistics over a corpus. A token occurrence is highly
// attended when its weight is at least multiplier / |P|.
class AspectLexicon {
 public:
  struct Entry {
    std::size_t attended = 0;  // highly attended occurrences
    std::size_t total = 0;     // all occurrences
    double mass = 0.0;         // summed weight of the highly attended occurrences
  };

  explicit AspectLexicon(double multiplier = kDefaultAttentionMultiplier) : multiplier_(multiplier) {
    if (!(multiplier > 0.0)) throw std::invalid_argument("AspectLexicon: multiplier must be positive");
  }

  void observe(const std::vector<std::string>& tokens, const std::vector<double>& weights) {
    if (tokens.size() != weights.size() || tokens.empty())
      throw std::invalid_argument("AspectLexicon::observe: tokens and weights differ in length");
    const double threshold = multiplier_ / static_cast<double>(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto& e = entries_[tokens[i]];
      ++e.total;
      if (weights[i] >= threshold) {
        ++e.attended;
        e.mass += weights[i];
      }
    }
  }

  void observe(const AttentionRecord& r) { observe(r.tokens, r.weights); }

  // Highly attended tokens by descending mass (ties: alphabetical); top_n = 0 keeps all.
  std::vector<std::pair<std::string, Entry>> ranked(std::size_t top_n = 0) const {
    std::vector<std::pair<std::string, Entry>> out;
    for (const auto& [tok, e] : entries_)
      if (e.attended > 0) out.emplace_back(tok, e);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second.mass > b.second.mass; });
    if (top_n > 0 && out.size() > top_n) out.resize(top_n);
    return out;
  }

  bool contains(const std::string& token) const {
    auto it = entries_.find(token);
    return it != entries_.end() && it->second.attended > 0;
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  double multiplier() const { return multiplier_; }

 private:
  double multiplier_;
  std::map<std::string, Entry> entries_;
};

// Tokens in both lexicons' top sets, ranked by combined mass.
inline std::vector<std::string> intersect(const AspectLexicon& a, const AspectLexicon& b, std::size_t top_n = 0) {
  const auto ra = a.ranked(top_n);
  const auto rb = b.ranked(top_n);
  std::map<std::string, double> in_b;
  for (const auto& [tok, e] : rb) in_b[tok] = e.mass;
  std::vector<std::pair<std::string, double>> both;
  for (const auto& [tok, e] : ra)
    if (auto it = in_b.find(tok); it != in_b.end()) both.emplace_back(tok, e.mass + it->second);
  std::stable_sort(both.begin(), both.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  std::vector<std::string> out;
  for (auto& [tok, m] : both) out.push_back(tok);
  return out;
}

inline nlohmann::json to_json(const AspectLexicon& lex, std::size_t top_n = 0) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [tok, e] : lex.ranked(top_n))
    arr.push_back({{"token", tok}, {"attended", e.attended}, {"total", e.total}, {"mass", e.mass}});
  return arr;
}

}  // namespace crossnet
