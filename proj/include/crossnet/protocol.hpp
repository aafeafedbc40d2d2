// In-target and cross-target cross-validation protocols.
#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "crossnet/corpus.hpp"
#include "crossnet/metrics.hpp"
#include "crossnet/model.hpp"
#include "crossnet/trainer.hpp"

namespace crossnet {

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t folds = 10;
  std::size_t threads = 1;  // fold-level parallelism; results do not depend on it
};

struct FoldScore {
  double f_micro = 0.0;
  double f_macro = 0.0;
  double f = 0.0;

  bool operator==(const FoldScore&) const = default;
};

enum class EvalMode { InTarget, CrossTarget };

struct EvalReport {
  std::string source;
  std::string dest;
  std::string arch;
  EvalMode mode = EvalMode::CrossTarget;
  std::uint64_t seed = 0;
  std::vector<FoldScore> folds;
  std::vector<TrainHistory> histories;
  double f_micro_mean = 0.0;
  double f_macro_mean = 0.0;
  double f_mean = 0.0;  // (f_micro_mean + f_macro_mean) / 2
  double f_std = 0.0;   // sample std of the per-fold f

  std::vector<double> fold_f() const {
    std::vector<double> out;
    for (const auto& s : folds) out.push_back(s.f);
    return out;
  }

  void aggregate() {
    std::vector<double> mi, ma;
    for (const auto& s : folds) {
      mi.push_back(s.f_micro);
      ma.push_back(s.f_macro);
    }
    f_micro_mean = mean_std(mi).mean;
    f_macro_mean = mean_std(ma).mean;
    f_mean = (f_micro_mean + f_macro_mean) / 2.0;
    f_std = mean_std(fold_f()).std;
  }
};

inline TransferResult transfer_ratio(const EvalReport& cross, const EvalReport& calibration) {
  return transfer_ratio(cross.f_mean, calibration.f_mean);
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json micro = nlohmann::json::array(), macro = nlohmann::json::array(), hist = nlohmann::json::array();
  for (const auto& s : r.folds) {
    micro.push_back(s.f_micro);
    macro.push_back(s.f_macro);
  }
  for (const auto& h : r.histories) hist.push_back(to_json(h));
  return {{"source", r.source},
          {"dest", r.dest},
          {"arch", r.arch},
          {"mode", r.mode == EvalMode::InTarget ? "in" : "cross"},
          {"folds", r.fold_f()},
          {"folds_micro", micro},
          {"folds_macro", macro},
          {"f_micro_mean", r.f_micro_mean},
          {"f_macro_mean", r.f_macro_mean},
          {"f_mean", r.f_mean},
          {"f_std", r.f_std},
          {"seed", r.seed},
          {"histories", hist}};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.source = j.at("source").get<std::string>();
  r.dest = j.at("dest").get<std::string>();
  r.arch = j.at("arch").get<std::string>();
  r.mode = j.value("mode", "cross") == "in" ? EvalMode::InTarget : EvalMode::CrossTarget;
  r.seed = j.at("seed").get<std::uint64_t>();
  const auto f = j.at("folds").get<std::vector<double>>();
  const auto mi = j.value("folds_micro", std::vector<double>(f.size(), 0.0));
  const auto ma = j.value("folds_macro", std::vector<double>(f.size(), 0.0));
  for (std::size_t i = 0; i < f.size(); ++i) r.folds.push_back({mi.at(i), ma.at(i), f[i]});
  if (j.contains("histories"))
    for (const auto& h : j.at("histories")) r.histories.push_back(train_history_from_json(h));
  r.f_micro_mean = j.at("f_micro_mean").get<double>();
  r.f_macro_mean = j.at("f_macro_mean").get<double>();
  r.f_mean = j.at("f_mean").get<double>();
  r.f_std = j.at("f_std").get<double>();
  return r;
}

// Runs fn(0..n-1) on up to `threads` workers. Each index writes only its own
// output slot, so the result is independent of scheduling.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(threads, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  pool.clear();
  if (error) std::rethrow_exception(error);
}

inline std::vector<Stance> labels_of(const std::vector<Example>& data) {
  std::vector<Stance> out;
  for (const auto& ex : data) out.push_back(stance_from_index(ex.label));
  return out;
}

template <typename T>
std::vector<T> select(const std::vector<T>& data, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data.at(i));
  return out;
}

// Called once per finished fold, possibly from a worker thread.
using FoldHook = std::function<void(std::size_t fold, const TrainResult&)>;

// k-fold plan on the source; fold i validates, the other k-1 train, and the
// whole destination set is the test set.
inline EvalReport run_cross_target(const std::string& source_name, const std::string& dest_name,
                                   const std::vector<Example>& source, const std::vector<Example>& dest,
                                   const Var& embeddings, const ExperimentConfig& cfg, Rng& rng,
                                   const FoldHook& hook = {}) {
  if (source.empty() || dest.empty()) throw std::invalid_argument("run_cross_target: empty source or destination");
  Rng plan_rng = rng.fork(0);
  const FoldPlan plan = stratified_folds(labels_of(source), cfg.folds, plan_rng);

  EvalReport rep;
  rep.source = source_name;
  rep.dest = dest_name;
  rep.arch = std::string(arch_name(cfg.model.arch));
  rep.mode = EvalMode::CrossTarget;
  rep.seed = rng.seed();
  rep.folds.resize(cfg.folds);
  rep.histories.resize(cfg.folds);
  parallel_for(cfg.folds, cfg.threads, [&](std::size_t i) {
    Rng fold_rng = rng.fork(1 + i);
    const auto train_set = select(source, plan.complement({i}));
    const auto val_set = select(source, plan.folds[i]);
    const auto result = train(cfg.model, cfg.train, train_set, val_set, embeddings, fold_rng);
    const auto s = f1_scores(evaluate(dest, embeddings, result.params), cfg.train.macro);
    rep.folds[i] = {s.micro, s.macro, s.f};
    rep.histories[i] = result.history;
    if (hook) hook(i, result);
  });
  rep.aggregate();
  return rep;
}

// k-fold plan on the target; fold i is the test set, fold (i+1) mod k the
// validation set, and the remaining k-2 folds train.
inline EvalReport run_in_target(const std::string& target_name, const std::vector<Example>& data,
                                const Var& embeddings, const ExperimentConfig& cfg, Rng& rng,
                                const FoldHook& hook = {}) {
  if (data.empty()) throw std::invalid_argument("run_in_target: empty data");
  if (cfg.folds < 3) throw std::invalid_argument("run_in_target: need at least 3 folds");
  Rng plan_rng = rng.fork(0);
  const FoldPlan plan = stratified_folds(labels_of(data), cfg.folds, plan_rng);

  EvalReport rep;
  rep.source = target_name;
  rep.dest = target_name;
  rep.arch = std::string(arch_name(cfg.model.arch));
  rep.mode = EvalMode::InTarget;
  rep.seed = rng.seed();
  rep.folds.resize(cfg.folds);
  rep.histories.resize(cfg.folds);
  parallel_for(cfg.folds, cfg.threads, [&](std::size_t i) {
    Rng fold_rng = rng.fork(1 + i);
    const std::size_t val = (i + 1) % cfg.folds;
    const auto train_set = select(data, plan.complement({i, val}));
    const auto val_set = select(data, plan.folds[val]);
    const auto test_set = select(data, plan.folds[i]);
    const auto result = train(cfg.model, cfg.train, train_set, val_set, embeddings, fold_rng);
    const auto s = f1_scores(evaluate(test_set, embeddings, result.params), cfg.train.macro);
    rep.folds[i] = {s.micro, s.macro, s.f};
    rep.histories[i] = result.history;
    if (hook) hook(i, result);
  });
  rep.aggregate();
  return rep;
}

}  // namespace crossnet
