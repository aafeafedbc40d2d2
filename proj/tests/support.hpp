// Shared test fixtures: random tensors, oracle conversions, toy corpora.
#pragma once

#include <string>
#include <vector>

#include "crossnet/crossnet.hpp"
#include "oracles.hpp"

namespace testing_support {

using namespace crossnet;

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.uniform(-scale, scale);
  return t;
}

inline Var random_leaf(Shape shape, Rng& rng, double scale = 1.0) {
  return leaf(random_tensor(std::move(shape), rng, scale));
}

inline oracle::Mat to_mat(const Var& v) { return {v->value.rows(), v->value.cols(), v->value.storage()}; }
inline oracle::Vec to_vec(const Var& v) { return v->value.storage(); }

inline oracle::Cell to_cell(const LstmCell& c) { return {to_mat(c.w_input), to_mat(c.w_hidden), to_vec(c.bias)}; }

inline std::vector<oracle::Vec> rows_of(const Tensor& m) {
  std::vector<oracle::Vec> out;
  for (std::size_t r = 0; r < m.rows(); ++r)
    out.emplace_back(m.storage().begin() + static_cast<std::ptrdiff_t>(r * m.cols()),
                     m.storage().begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols()));
  return out;
}

// Randomizes every parameter (including biases) so oracle comparisons
// exercise all terms.
inline void randomize(const ModelParams& p, Rng& rng, double scale = 0.5) {
  for (auto& np : p.named())
    for (auto& v : np.node->value.storage()) v = rng.uniform(-scale, scale);
}

inline ModelConfig toy_config(Architecture arch, std::size_t emb = 3, std::size_t h = 4, std::size_t d = 3) {
  ModelConfig c;
  c.arch = arch;
  c.embedding_dim = emb;
  c.hidden = h;
  c.attention = d;
  c.mlp = 5;
  c.dropout = 0.0;
  return c;
}

// Small labeled corpus where every sentence carries one class cue word
// among shared filler words.
inline std::vector<Instance> toy_instances(std::size_t n, std::uint64_t seed,
                                           const std::string& target = "Toy Target") {
  const std::vector<std::vector<std::string>> cues = {
      {"equality", "rights", "support", "love"},
      {"wrong", "stop", "against", "never"},
      {"weather", "today", "lunch", "game"}};
  const std::vector<std::string> filler = {"the", "a", "we", "they", "is", "of", "and", "it", "this", "that"};
  Rng rng(seed);
  std::vector<Instance> out;
  for (std::size_t i = 0; i < n; ++i) {
    Instance inst;
    inst.id = std::to_string(i + 1);
    inst.target = target;
    inst.stance = stance_from_index(i % kNumStances);
    const auto& cue = cues[i % kNumStances];
    const std::size_t len = 3 + rng.below(4);
    const std::size_t at = rng.below(len);
    std::string text;
    for (std::size_t t = 0; t < len; ++t) {
      if (!text.empty()) text += ' ';
      text += t == at ? cue[rng.below(cue.size())] : filler[rng.below(filler.size())];
    }
    inst.text = text;
    inst.tokens = tokenize(text);
    out.push_back(std::move(inst));
  }
  return out;
}

struct ToyData {
  std::vector<Instance> instances;
  Vocabulary vocab;
  EmbeddingMatrix emb;
  Var table;
  std::vector<Example> examples;
};

inline ToyData toy_data(std::size_t n, std::size_t dim, std::uint64_t seed) {
  ToyData d;
  d.instances = toy_instances(n, seed);
  for (const auto& inst : d.instances) {
    d.vocab.add_all(inst.tokens);
    d.vocab.add_all(tokenize(inst.target));
  }
  d.emb = random_embeddings(d.vocab, seed, dim);
  // OOV rows are N(0, 0.1); scale them up so toy words are well separated.
  for (auto& v : d.emb.table.storage()) v *= 5.0;
  d.table = constant(d.emb.table);
  d.examples = encode_all(d.instances, d.vocab);
  return d;
}

}  // namespace testing_support

namespace testing_support {

// Settings under which the 32-instance toy set is memorized well inside
// 50 epochs: small encoder, small batches, a larger step and a light L2.
inline crossnet::ModelConfig overfit_model(crossnet::Architecture arch) {
  auto c = toy_config(arch, 10, 8, 8);
  c.mlp = 16;
  c.dropout = 0.1;
  return c;
}

inline crossnet::TrainConfig overfit_train() {
  crossnet::TrainConfig t;
  t.batch_size = 4;
  t.learning_rate = 1e-2;
  t.lambda = 1e-3;
  t.max_epochs = 50;
  t.patience = 10;
  return t;
}

}  // namespace testing_support
