// CrossNet and its two baselines on top of the autodiff engine.
//
//   embed -> BiLSTM_T (zero init) -> BiLSTM_P (initialized from BiLSTM_T)
//         -> self-attention over H^P -> MLP -> softmax
//
// BiCond stops after the conditional encoding and classifies the final
// sentence states; BiLSTM-concat encodes target and sentence independently.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "crossnet/autodiff.hpp"
#include "crossnet/rng.hpp"
#include "crossnet/tensor.hpp"

namespace crossnet {

enum class Architecture { CrossNet, BiCond, BiLstmConcat };

inline std::string_view arch_name(Architecture a) {
  switch (a) {
    case Architecture::CrossNet: return "crossnet";
    case Architecture::BiCond: return "bicond";
    case Architecture::BiLstmConcat: return "bilstm";
  }
  return "?";
}

inline Architecture parse_arch(std::string_view s) {
  if (s == "crossnet") return Architecture::CrossNet;
  if (s == "bicond") return Architecture::BiCond;
  if (s == "bilstm" || s == "bilstm_concat") return Architecture::BiLstmConcat;
  throw std::invalid_argument("unknown architecture '" + std::string(s) + "' (expected crossnet, bicond, bilstm)");
}

enum class Activation { Tanh, Sigmoid };

inline std::string_view activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "sigmoid"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

inline Var activate(Activation a, const Var& x) { return a == Activation::Tanh ? tanh(x) : sigmoid(x); }

struct ModelConfig {
  std::size_t hidden = 60;
  std::size_t mlp = 60;
  std::size_t attention = 60;
  double dropout = 0.1;
  std::size_t classes = 3;
  std::size_t embedding_dim = 200;
  Activation attention_activation = Activation::Tanh;
  Architecture arch = Architecture::CrossNet;

  void validate() const {
    if (hidden == 0 || mlp == 0 || attention == 0 || classes == 0 || embedding_dim == 0)
      throw std::invalid_argument("ModelConfig: sizes must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("ModelConfig: dropout must be in [0, 1)");
  }

  // Width of the vector handed to the prediction head.
  std::size_t representation_size() const {
    return arch == Architecture::BiLstmConcat ? 4 * hidden : 2 * hidden;
  }

  bool operator==(const ModelConfig&) const = default;
};

struct LstmState {
  Var h;
  Var c;
};

inline LstmState zero_state(std::size_t hidden) {
  return {constant(Tensor({hidden})), constant(Tensor({hidden}))};
}

// Gate rows are stacked as [input; forget; candidate; output].
struct LstmCell {
  Var w_input;   // 4h x in
  Var w_hidden;  // 4h x h
  Var bias;      // 4h

  std::size_t hidden() const { return w_hidden->value.cols(); }
  std::size_t input_size() const { return w_input->value.cols(); }
};

struct BiLstm {
  LstmCell fwd;
  LstmCell bwd;
};

struct AttentionParams {
  Var w1;  // d x 2h
  Var w2;  // d
  Var b1;  // d
  Var b2;  // scalar
};

struct MlpParams {
  Var w_hidden;  // mlp x rep
  Var b_hidden;  // mlp
  Var w_out;     // C x mlp
  Var b_out;     // C
};

struct NamedParam {
  std::string name;
  Var node;
  bool is_weight;  // counted by the L2 penalty; biases are not
};

class ModelParams {
 public:
  ModelConfig config;
  BiLstm target;
  BiLstm sentence;
  AttentionParams attention;  // CrossNet only
  MlpParams head;

  // Every trainable leaf, in a fixed order.
  std::vector<NamedParam> named() const {
    std::vector<NamedParam> out;
    auto cell = [&](const std::string& prefix, const LstmCell& c) {
      out.push_back({prefix + ".w_input", c.w_input, true});
      out.push_back({prefix + ".w_hidden", c.w_hidden, true});
      out.push_back({prefix + ".bias", c.bias, false});
    };
    cell("target.fwd", target.fwd);
    cell("target.bwd", target.bwd);
    cell("sentence.fwd", sentence.fwd);
    cell("sentence.bwd", sentence.bwd);
    if (config.arch == Architecture::CrossNet) {
      out.push_back({"attention.w1", attention.w1, true});
      out.push_back({"attention.w2", attention.w2, true});
      out.push_back({"attention.b1", attention.b1, false});
      out.push_back({"attention.b2", attention.b2, false});
    }
    out.push_back({"head.w_hidden", head.w_hidden, true});
    out.push_back({"head.b_hidden", head.b_hidden, false});
    out.push_back({"head.w_out", head.w_out, true});
    out.push_back({"head.b_out", head.b_out, false});
    return out;
  }

  std::vector<Var> trainable() const {
    std::vector<Var> out;
    for (auto& p : named()) out.push_back(p.node);
    return out;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto& p : named()) n += p.node->value.size();
    return n;
  }

  // Independent copy of every parameter value (gradients reset).
  ModelParams clone() const {
    ModelParams out = *this;
    auto& o = out;
    auto rebind = [](Var& v) {
      if (v) v = leaf(v->value, true, v->name);
    };
    for (auto* c : {&o.target.fwd, &o.target.bwd, &o.sentence.fwd, &o.sentence.bwd}) {
      rebind(c->w_input);
      rebind(c->w_hidden);
      rebind(c->bias);
    }
    rebind(o.attention.w1);
    rebind(o.attention.w2);
    rebind(o.attention.b1);
    rebind(o.attention.b2);
    rebind(o.head.w_hidden);
    rebind(o.head.b_hidden);
    rebind(o.head.w_out);
    rebind(o.head.b_out);
    return out;
  }

  // Copies values from another parameter set of identical layout.
  void assign(const ModelParams& other) {
    auto dst = named();
    auto src = other.named();
    if (dst.size() != src.size()) throw std::invalid_argument("ModelParams::assign: layout mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (dst[i].node->shape() != src[i].node->shape())
        throw ShapeError("assign " + dst[i].name, dst[i].node->shape(), src[i].node->shape());
      dst[i].node->value = src[i].node->value;
    }
  }

  bool values_equal(const ModelParams& other) const {
    auto a = named();
    auto b = other.named();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].name != b[i].name || a[i].node->value != b[i].node->value) return false;
    return true;
  }

  // Sum of squared entries of every weight (not bias) tensor.
  double weight_sq_norm() const {
    double s = 0.0;
    for (auto& p : named())
      if (p.is_weight)
        for (double v : p.node->value.storage()) s += v * v;
    return s;
  }
};

namespace detail {

inline Var uniform_leaf(Shape shape, double limit, Rng& rng, const std::string& name) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.uniform(-limit, limit);
  return leaf(std::move(t), true, name);
}

inline Var zero_leaf(Shape shape, const std::string& name) { return leaf(Tensor(std::move(shape)), true, name); }

inline constexpr double kLstmInitRange = 0.08;
inline constexpr double kForgetBias = 1.0;

inline LstmCell init_cell(std::size_t in, std::size_t h, Rng& rng, const std::string& name) {
  LstmCell c;
  c.w_input = uniform_leaf({4 * h, in}, kLstmInitRange, rng, name + ".w_input");
  c.w_hidden = uniform_leaf({4 * h, h}, kLstmInitRange, rng, name + ".w_hidden");
  Tensor b({4 * h});
  for (std::size_t i = h; i < 2 * h; ++i) b[i] = kForgetBias;
  c.bias = leaf(std::move(b), true, name + ".bias");
  return c;
}

inline double fan_in_limit(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace detail

// LSTM weights uniform in [-0.08, 0.08] with forget-gate bias 1; attention and
// MLP weights uniform in +-1/sqrt(fan_in); other biases zero.
inline ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  const auto h = cfg.hidden;
  p.target.fwd = detail::init_cell(cfg.embedding_dim, h, rng, "target.fwd");
  p.target.bwd = detail::init_cell(cfg.embedding_dim, h, rng, "target.bwd");
  p.sentence.fwd = detail::init_cell(cfg.embedding_dim, h, rng, "sentence.fwd");
  p.sentence.bwd = detail::init_cell(cfg.embedding_dim, h, rng, "sentence.bwd");
  if (cfg.arch == Architecture::CrossNet) {
    const auto d = cfg.attention;
    p.attention.w1 = detail::uniform_leaf({d, 2 * h}, detail::fan_in_limit(2 * h), rng, "attention.w1");
    p.attention.w2 = detail::uniform_leaf({d}, detail::fan_in_limit(d), rng, "attention.w2");
    p.attention.b1 = detail::zero_leaf({d}, "attention.b1");
    p.attention.b2 = detail::zero_leaf({1}, "attention.b2");
  }
  const auto rep = cfg.representation_size();
  p.head.w_hidden = detail::uniform_leaf({cfg.mlp, rep}, detail::fan_in_limit(rep), rng, "head.w_hidden");
  p.head.b_hidden = detail::zero_leaf({cfg.mlp}, "head.b_hidden");
  p.head.w_out = detail::uniform_leaf({cfg.classes, cfg.mlp}, detail::fan_in_limit(cfg.mlp), rng, "head.w_out");
  p.head.b_out = detail::zero_leaf({cfg.classes}, "head.b_out");
  return p;
}

// ---- encoding layers ------------------------------------------------------

// One step given the precomputed input projection W_input * x.
inline LstmState lstm_step_projected(const Var& x_proj, const LstmState& prev, const LstmCell& cell) {
  const auto h = cell.hidden();
  if (prev.h->value.size() != h || prev.c->value.size() != h)
    throw ShapeError("lstm_step", prev.h->shape(), Shape{h});
  const Var z = add(x_proj, matvec(cell.w_hidden, prev.h), cell.bias);
  const Var in_gate = sigmoid(slice(z, 0, h));
  const Var forget_gate = sigmoid(slice(z, h, h));
  const Var candidate = tanh(slice(z, 2 * h, h));
  const Var out_gate = sigmoid(slice(z, 3 * h, h));
  const Var c = add(mul(forget_gate, prev.c), mul(in_gate, candidate));
  const Var hid = mul(out_gate, tanh(c));
  return {hid, c};
}

// i, f, o = sigmoid(.), g = tanh(.), c' = f*c + i*g, h' = o*tanh(c').
inline LstmState lstm_step(const Var& x, const LstmState& prev, const LstmCell& cell) {
  if (!x->value.is_vector() || x->value.size() != cell.input_size())
    throw ShapeError("lstm_step", x->shape(), Shape{cell.input_size()});
  return lstm_step_projected(matvec(cell.w_input, x), prev, cell);
}

struct BiLstmOutput {
  Var states;           // n x 2h, row i = [fwd_i; bwd_i]
  LstmState fwd_final;  // after position n (left-to-right)
  LstmState bwd_final;  // after position 1 (right-to-left)
};

inline BiLstmOutput bilstm_encode(const Var& seq, const LstmState& init_fwd, const LstmState& init_bwd,
                                  const BiLstm& weights) {
  if (!seq->value.is_matrix()) throw ShapeError("bilstm_encode", seq->shape(), Shape{1, weights.fwd.input_size()});
  if (seq->value.cols() != weights.fwd.input_size())
    throw ShapeError("bilstm_encode", seq->shape(), Shape{seq->value.rows(), weights.fwd.input_size()});
  const std::size_t n = seq->value.rows();
  const Var proj_f = matmul(seq, transpose(weights.fwd.w_input));
  const Var proj_b = matmul(seq, transpose(weights.bwd.w_input));

  std::vector<Var> fwd(n), bwd(n);
  LstmState s = init_fwd;
  for (std::size_t t = 0; t < n; ++t) {
    s = lstm_step_projected(row(proj_f, t), s, weights.fwd);
    fwd[t] = s.h;
  }
  const LstmState fwd_final = s;
  s = init_bwd;
  for (std::size_t t = n; t-- > 0;) {
    s = lstm_step_projected(row(proj_b, t), s, weights.bwd);
    bwd[t] = s.h;
  }
  std::vector<Var> rows(n);
  for (std::size_t t = 0; t < n; ++t) rows[t] = concat({fwd[t], bwd[t]});
  return {stack_rows(rows), fwd_final, s};
}

struct ConditionalEncoding {
  BiLstmOutput target;
  BiLstmOutput sentence;  // sentence.states is H^P
};

// The sentence forward pass starts from the target's final forward state
// (position |T|); the backward pass from the target's backward state at
// position 1.
inline ConditionalEncoding conditional_encode(const Var& target_seq, const Var& sentence_seq, const ModelParams& p) {
  const auto h = p.config.hidden;
  ConditionalEncoding enc;
  enc.target = bilstm_encode(target_seq, zero_state(h), zero_state(h), p.target);
  enc.sentence = bilstm_encode(sentence_seq, enc.target.fwd_final, enc.target.bwd_final, p.sentence);
  return enc;
}

struct AttentionResult {
  Var scores;    // c, length |P|
  Var weights;   // a = softmax(c)
  Var encoding;  // A^P = sum_i a_i h_i, length 2h
};

// c_i = w2 . act(W1 h_i + b1) + b2 with parameters shared across rows.
inline AttentionResult aspect_attention(const Var& states, const AttentionParams& a, Activation act) {
  if (!states->value.is_matrix() || states->value.cols() != a.w1->value.cols())
    throw ShapeError("aspect_attention", states->shape(), a.w1->shape());
  const Var hidden = activate(act, add_broadcast(matmul(states, transpose(a.w1)), a.b1));
  const Var scores = add_broadcast(matvec(hidden, a.w2), a.b2);
  const Var weights = softmax(scores);
  return {scores, weights, matvec(transpose(states), weights)};
}

struct HeadOutput {
  Var logits;
  Var probs;
};

// softmax(W_out tanh(W_hidden x + b_hidden) + b_out).
inline HeadOutput predict_head(const Var& rep, const MlpParams& m) {
  if (!rep->value.is_vector() || rep->value.size() != m.w_hidden->value.cols())
    throw ShapeError("predict_head", rep->shape(), Shape{m.w_hidden->value.cols()});
  const Var hidden = tanh(add(matvec(m.w_hidden, rep), m.b_hidden));
  const Var logits = add(matvec(m.w_out, hidden), m.b_out);
  return {logits, softmax(logits)};
}

// Lowest index wins ties.
inline std::size_t argmax(const Tensor& v) {
  const auto& d = v.storage();
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

// Inverted dropout: kept entries are scaled by 1/(1-rate).
inline Var dropout(const Var& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  Tensor mask = Tensor::zeros_like(x->value);
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask.storage()) m = rng.bernoulli(rate) ? 0.0 : keep;
  return mul(x, constant(std::move(mask)));
}

enum class Mode { Train, Eval };

struct Prediction {
  Var probs;
  Var logits;
  std::size_t label = 0;
  std::optional<AttentionResult> attention;  // CrossNet only
};

// sentence and target are embedded sequences (rows = tokens). rng is
// required in Train mode when dropout > 0.
inline Prediction forward(const Var& sentence, const Var& target, const ModelParams& p, Mode mode,
                          Rng* rng = nullptr) {
  const auto& cfg = p.config;
  const bool drop = mode == Mode::Train && cfg.dropout > 0.0;
  if (drop && rng == nullptr) throw std::invalid_argument("forward: training mode needs an rng for dropout");
  auto maybe_drop = [&](const Var& x) { return drop ? dropout(x, cfg.dropout, *rng) : x; };

  Prediction pred;
  Var rep;
  switch (cfg.arch) {
    case Architecture::CrossNet: {
      const auto enc = conditional_encode(target, sentence, p);
      const Var states = maybe_drop(enc.sentence.states);
      pred.attention = aspect_attention(states, p.attention, cfg.attention_activation);
      rep = maybe_drop(pred.attention->encoding);
      break;
    }
    case Architecture::BiCond: {
      const auto enc = conditional_encode(target, sentence, p);
      rep = maybe_drop(concat({enc.sentence.fwd_final.h, enc.sentence.bwd_final.h}));
      break;
    }
    case Architecture::BiLstmConcat: {
      const auto h = cfg.hidden;
      const auto s = bilstm_encode(sentence, zero_state(h), zero_state(h), p.sentence);
      const auto t = bilstm_encode(target, zero_state(h), zero_state(h), p.target);
      rep = maybe_drop(concat({s.fwd_final.h, s.bwd_final.h, t.fwd_final.h, t.bwd_final.h}));
      break;
    }
  }
  const auto out = predict_head(rep, p.head);
  pred.probs = out.probs;
  pred.logits = out.logits;
  pred.label = argmax(out.probs->value);
  return pred;
}

}  // namespace crossnet
