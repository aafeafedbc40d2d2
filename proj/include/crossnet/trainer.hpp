// Cross-entropy + L2 loss, ADAM, and the mini-batch training loop with
// validation-based early stopping.
#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossnet/autodiff.hpp"
#include "crossnet/corpus.hpp"
#include "crossnet/metrics.hpp"
#include "crossnet/model.hpp"
#include "crossnet/rng.hpp"

namespace crossnet {

struct TrainConfig {
  double learning_rate = 1e-3;
  double lambda = 0.01;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; 0 disables
  MacroAverage macro = MacroAverage::AllClasses;

  void validate() const {
    if (!(learning_rate > 0.0) || !(lambda >= 0.0) || batch_size == 0 || max_epochs == 0 || patience == 0)
      throw std::invalid_argument("TrainConfig: learning rate, batch, epochs and patience must be positive");
    if (patience > max_epochs) throw std::invalid_argument("TrainConfig: patience exceeds max epochs");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && epsilon > 0.0))
      throw std::invalid_argument("TrainConfig: ADAM betas must lie in (0,1) and epsilon be positive");
    if (!(clip_norm >= 0.0)) throw std::invalid_argument("TrainConfig: clip norm must be non-negative");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"lambda", c.lambda},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"clip_norm", c.clip_norm},
          {"macro", c.macro == MacroAverage::AllClasses ? "all" : "favor_against"}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.macro = j.value("macro", "all") == "all" ? MacroAverage::AllClasses : MacroAverage::FavorAgainst;
  c.validate();
  return c;
}

// ---- data -----------------------------------------------------------------

// Token ids for one instance, ready for the embedding lookup.
struct Example {
  std::vector<std::size_t> sentence;
  std::vector<std::size_t> target;
  std::size_t label = 0;
};

inline Example encode(const Instance& inst, const std::vector<std::string>& target_tokens, const Vocabulary& vocab) {
  return {vocab.encode(inst.tokens), vocab.encode(target_tokens), stance_index(inst.stance)};
}

inline std::vector<Example> encode_all(const std::vector<Instance>& instances, const Vocabulary& vocab) {
  std::vector<Example> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(encode(inst, tokenize(inst.target), vocab));
  return out;
}

inline Prediction predict(const Example& ex, const Var& embeddings, const ModelParams& params, Mode mode,
                          Rng* rng = nullptr) {
  if (ex.sentence.empty() || ex.target.empty()) throw std::invalid_argument("predict: empty sentence or target");
  return forward(gather(embeddings, ex.sentence), gather(embeddings, ex.target), params, mode, rng);
}

inline ConfusionCounts evaluate(const std::vector<Example>& data, const Var& embeddings, const ModelParams& params) {
  ConfusionCounts cm(params.config.classes);
  for (const auto& ex : data) cm.add(ex.label, predict(ex, embeddings, params, Mode::Eval).label);
  return cm;
}

// ---- loss -----------------------------------------------------------------

inline constexpr double kProbFloor = 1e-12;

// Batch mean of -log p(gold) plus lambda times the summed squared norms of
// the weight tensors (biases and embeddings excluded).
inline Var loss(const std::vector<Var>& probs, const std::vector<std::size_t>& gold, const ModelParams& params,
                double lambda) {
  if (probs.size() != gold.size()) throw std::invalid_argument("loss: predictions and labels differ in length");
  if (probs.empty()) throw std::invalid_argument("loss: empty batch");
  std::vector<Var> nll;
  nll.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) nll.push_back(log(pick(probs[i], gold[i]), kProbFloor));
  Var total = scale(sum(nll), -1.0 / static_cast<double>(probs.size()));
  if (lambda != 0.0) {
    std::vector<Var> sq;
    for (const auto& p : params.named())
      if (p.is_weight) sq.push_back(sum(mul(p.node, p.node)));
    total = add(total, scale(sum(sq), lambda));
  }
  return total;
}

// ---- optimizer ------------------------------------------------------------

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t t = 0;

  static AdamState for_params(const std::vector<Var>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.push_back(Tensor::zeros_like(p->value));
      s.v.push_back(Tensor::zeros_like(p->value));
    }
    return s;
  }
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One bias-corrected ADAM update from the gradients held by each parameter.
inline void adam_step(const std::vector<NamedParam>& params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state does not match parameters");
  for (const auto& p : params)
    if (!p.node->grad.all_finite()) throw NonFiniteError("adam_step: non-finite gradient in " + p.name);
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k].node->value.storage();
    const auto& g = params[k].node->grad.storage();
    auto& m = state.m[k].storage();
    auto& v = state.v[k].storage();
    if (m.size() != w.size()) throw ShapeError("adam_step " + params[k].name, state.m[k].shape(), params[k].node->shape());
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

inline void adam_step(const ModelParams& params, AdamState& state, const TrainConfig& cfg) {
  adam_step(params.named(), state, cfg);
}

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
inline double clip_grad_norm(const std::vector<Var>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p->grad.storage()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (const auto& p : params)
      for (auto& g : p->grad.storage()) g *= k;
  }
  return norm;
}

// ---- training loop --------------------------------------------------------

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_f;
  std::size_t best_epoch = 0;  // 0-based index into val_f
  bool stopped_early = false;

  bool operator==(const TrainHistory&) const = default;
};

inline nlohmann::json to_json(const TrainHistory& h) {
  return {{"train_loss", h.train_loss},
          {"val_f", h.val_f},
          {"best_epoch", h.best_epoch},
          {"stopped_early", h.stopped_early}};
}

inline TrainHistory train_history_from_json(const nlohmann::json& j) {
  TrainHistory h;
  h.train_loss = j.at("train_loss").get<std::vector<double>>();
  h.val_f = j.at("val_f").get<std::vector<double>>();
  h.best_epoch = j.at("best_epoch").get<std::size_t>();
  h.stopped_early = j.at("stopped_early").get<bool>();
  return h;
}

struct TrainResult {
  ModelParams params;  // snapshot from the best validation epoch
  TrainHistory history;
};

// Parameters are initialized from rng, which also drives per-epoch
// shuffling and dropout.
inline TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, const std::vector<Example>& train_set,
                         const std::vector<Example>& val_set, const Var& embeddings, Rng& rng) {
  model_cfg.validate();
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw std::invalid_argument("train: empty training or validation set");
  if (embeddings->requires_grad) throw std::invalid_argument("train: embeddings must be frozen");

  ModelParams params = init_params(model_cfg, rng);
  const auto named = params.named();
  const auto leaves = params.trainable();
  AdamState adam = AdamState::for_params(leaves);

  TrainResult best{params.clone(), {}};
  double best_f = -1.0;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Var> probs;
      std::vector<std::size_t> gold;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        probs.push_back(predict(ex, embeddings, params, Mode::Train, &rng).probs);
        gold.push_back(ex.label);
      }
      zero_grad(leaves);
      const Var l = loss(probs, gold, params, cfg.lambda);
      const double lv = l->value.item();
      if (!std::isfinite(lv)) {
        std::ostringstream os;
        os << "train: non-finite loss at epoch " << epoch + 1 << ", batch starting at " << start;
        throw NonFiniteError(os.str());
      }
      backward(l);
      clip_grad_norm(leaves, cfg.clip_norm);
      adam_step(named, adam, cfg);
      epoch_loss += lv * static_cast<double>(end - start);
    }
    best.history.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

    const double val_f = f1_scores(evaluate(val_set, embeddings, params), cfg.macro).f;
    best.history.val_f.push_back(val_f);
    if (val_f > best_f) {
      best_f = val_f;
      best.history.best_epoch = epoch;
      best.params.assign(params);
    }
    if (epoch - best.history.best_epoch >= cfg.patience) {
      best.history.stopped_early = epoch + 1 < cfg.max_epochs;
      break;
    }
  }
  return best;
}

}  // namespace crossnet
