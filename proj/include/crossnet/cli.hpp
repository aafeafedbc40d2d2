// Command-line surface: train, eval, attention, aspects, stats, rerun.
//
// Every train/eval invocation is captured as a run record (one JSON file per
// run) holding the full config snapshot; `rerun` replays a record and checks
// the fold scores match bit-for-bit.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
#pragma once

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crossnet/aspects.hpp"
#include "crossnet/checkpoint.hpp"
#include "crossnet/corpus.hpp"
#include "crossnet/metrics.hpp"
#include "crossnet/model.hpp"
#include "crossnet/protocol.hpp"
#include "crossnet/trainer.hpp"

namespace crossnet::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything needed to reproduce a train or eval run.
struct RunConfig {
  std::string command;  // "train" or "eval"
  std::string data;
  std::string glove;
  std::string targets_file;  // empty: built-in abbreviations
  std::string source;        // abbreviation or full target name
  std::string dest;
  EvalMode mode = EvalMode::CrossTarget;
  ExperimentConfig experiment;
  std::string calibration;  // eval only: record path or run id
  std::string checkpoint;   // train only: output path, empty = next to the record
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"command", c.command},
          {"data", c.data},
          {"glove", c.glove},
          {"targets_file", c.targets_file},
          {"source", c.source},
          {"dest", c.dest},
          {"mode", c.mode == EvalMode::InTarget ? "in" : "cross"},
          {"model", to_json(c.experiment.model)},
          {"train", to_json(c.experiment.train)},
          {"folds", c.experiment.folds},
          {"threads", c.experiment.threads},
          {"calibration", c.calibration},
          {"checkpoint", c.checkpoint}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.command = j.at("command").get<std::string>();
  c.data = j.at("data").get<std::string>();
  c.glove = j.at("glove").get<std::string>();
  c.targets_file = j.value("targets_file", "");
  c.source = j.at("source").get<std::string>();
  c.dest = j.value("dest", "");
  c.mode = j.value("mode", "cross") == "in" ? EvalMode::InTarget : EvalMode::CrossTarget;
  c.experiment.model = model_config_from_json(j.at("model"));
  c.experiment.train = train_config_from_json(j.at("train"));
  c.experiment.folds = j.at("folds").get<std::size_t>();
  c.experiment.threads = j.value("threads", std::size_t{1});
  c.calibration = j.value("calibration", "");
  c.checkpoint = j.value("checkpoint", "");
  return c;
}

// ---- shared loading -------------------------------------------------------

struct Workspace {
  Corpus corpus;
  TargetMap targets;
  Vocabulary vocab;
  EmbeddingMatrix embeddings;
  Var table;  // frozen constant over embeddings.table
};

inline TargetMap load_targets(const std::string& file) {
  return file.empty() ? TargetMap::builtin() : TargetMap::load(file);
}

inline Vocabulary vocabulary_for(const std::vector<Instance>& instances) {
  Vocabulary v;
  for (const auto& inst : instances) {
    v.add_all(inst.tokens);
    v.add_all(tokenize(inst.target));
  }
  return v;
}

inline void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw UsageError(flag + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(flag + ": no such file '" + path + "'");
}

inline Workspace load_workspace(const std::string& data, const std::string& glove, const std::string& targets_file,
                                std::uint64_t embedding_seed, std::size_t dim) {
  require_file(data, "--data");
  require_file(glove, "--glove");
  if (!targets_file.empty()) require_file(targets_file, "--targets");
  Workspace ws;
  ws.corpus = load_semeval(data);
  ws.targets = load_targets(targets_file);
  ws.vocab = vocabulary_for(ws.corpus.instances);
  ws.embeddings = build_embeddings(ws.vocab, glove, embedding_seed, dim);
  ws.table = constant(ws.embeddings.table);
  return ws;
}

inline std::string resolve_target(const TargetMap& targets, const std::string& key) {
  try {
    return targets.resolve(key);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline std::vector<Instance> target_instances(const Workspace& ws, const std::string& key) {
  const std::string name = resolve_target(ws.targets, key);
  auto out = ws.corpus.for_target(name);
  if (out.empty()) throw UsageError("target '" + name + "' has no instances in the data file");
  return out;
}

// ---- formatting -----------------------------------------------------------

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string abbreviation(const TargetMap& m, const std::string& key) {
  const auto upper = detail::ascii_upper(key);
  if (m.entries().contains(upper)) return upper;
  for (const auto& [abbr, name] : m.entries())
    if (name == key) return abbr;
  return key;
}

// "<arch> <src>→<dst> f=<mean>(<std>) [q=<ratio>]", scores x100.
inline std::string format_row(const EvalReport& r, std::optional<double> q, const std::string& src,
                              const std::string& dst) {
  std::string row = r.arch + " " + src + "→" + dst + " f=" + fixed(100.0 * r.f_mean, 1) + "(" +
                    fixed(100.0 * r.f_std, 1) + ")";
  if (q) row += " q=" + fixed(ratio_two_decimals(*q), 2);
  return row;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

inline std::string make_run_id(const RunConfig& cfg) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(stable_hash(to_json(cfg).dump())));
  return cfg.command + "-" + utc_timestamp() + "-" + std::string(hex, 8);
}

inline fs::path record_path(const fs::path& runs_dir, const std::string& ref) {
  if (fs::is_regular_file(ref)) return ref;
  const auto candidate = runs_dir / (ref + ".json");
  if (fs::is_regular_file(candidate)) return candidate;
  throw UsageError("no run record '" + ref + "' (looked for a file and for " + candidate.string() + ")");
}

inline nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + p.string() + "'");
  return nlohmann::json::parse(in);
}

// ---- command bodies -------------------------------------------------------

// Trains on a 90/10 stratified split of one target (fold 0 of a k-fold plan
// validates) and writes a checkpoint. Returns the result block of the record.
inline nlohmann::json execute_train(const RunConfig& cfg, const fs::path& checkpoint_path) {
  const auto& ex = cfg.experiment;
  auto ws = load_workspace(cfg.data, cfg.glove, cfg.targets_file, ex.train.seed, ex.model.embedding_dim);
  const auto insts = target_instances(ws, cfg.source);
  const auto data = encode_all(insts, ws.vocab);
  Rng rng(ex.train.seed);
  Rng plan_rng = rng.fork(0);
  const auto plan = stratified_folds(labels_of(data), ex.folds, plan_rng);
  Rng train_rng = rng.fork(1);
  const auto val_set = select(data, plan.folds[0]);
  const auto result =
      train(ex.model, ex.train, select(data, plan.complement({0})), val_set, ws.table, train_rng);
  const auto val = f1_scores(evaluate(val_set, ws.table, result.params), ex.train.macro);

  const nlohmann::json meta = {{"embedding_seed", ex.train.seed},
                               {"glove", cfg.glove},
                               {"target", ws.targets.resolve(cfg.source)},
                               {"targets_file", cfg.targets_file}};
  save_checkpoint(checkpoint_path, result.params, meta);
  return {{"history", to_json(result.history)},
          {"val_f_micro", val.micro},
          {"val_f_macro", val.macro},
          {"val_f", val.f},
          {"folds", std::vector<double>{val.f}},
          {"embedding_coverage", ws.embeddings.coverage},
          {"checkpoint", checkpoint_path.string()}};
}

inline EvalReport execute_eval(const RunConfig& cfg) {
  const auto& ex = cfg.experiment;
  auto ws = load_workspace(cfg.data, cfg.glove, cfg.targets_file, ex.train.seed, ex.model.embedding_dim);
  Rng rng(ex.train.seed);
  const auto src_name = ws.targets.resolve(cfg.source);
  if (cfg.mode == EvalMode::InTarget) {
    const auto data = encode_all(target_instances(ws, cfg.source), ws.vocab);
    auto rep = run_in_target(src_name, data, ws.table, ex, rng);
    return rep;
  }
  const auto source = encode_all(target_instances(ws, cfg.source), ws.vocab);
  const auto dest = encode_all(target_instances(ws, cfg.dest), ws.vocab);
  return run_cross_target(src_name, ws.targets.resolve(cfg.dest), source, dest, ws.table, ex, rng);
}

inline std::vector<double> fold_scores_of(const nlohmann::json& record) {
  const auto& res = record.at("result");
  if (res.contains("report")) return res.at("report").at("folds").get<std::vector<double>>();
  return res.at("folds").get<std::vector<double>>();
}

// ---- argument parsing -----------------------------------------------------

struct CommonFlags {
  std::string data;
  std::string glove;
  std::string targets_file;
  std::string arch = "crossnet";
  std::string runs_dir = "runs";
  std::uint64_t seed = 1;
  ModelConfig model;
  TrainConfig train;
  std::size_t folds = 10;
  std::size_t threads = 1;
  std::string activation = "tanh";
  std::string macro = "all";
};

inline void add_model_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--arch", f.arch, "crossnet | bicond | bilstm")->check(CLI::IsMember({"crossnet", "bicond", "bilstm"}));
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--hidden", f.model.hidden, "LSTM hidden size");
  cmd->add_option("--mlp", f.model.mlp, "MLP hidden size");
  cmd->add_option("--attention-size", f.model.attention, "attention projection size");
  cmd->add_option("--attention-activation", f.activation, "tanh | sigmoid")->check(CLI::IsMember({"tanh", "sigmoid"}));
  cmd->add_option("--dropout", f.model.dropout, "dropout rate");
  cmd->add_option("--embedding-dim", f.model.embedding_dim, "word vector dimension");
  cmd->add_option("--lambda", f.train.lambda, "L2 coefficient");
  cmd->add_option("--lr", f.train.learning_rate, "ADAM learning rate");
  cmd->add_option("--batch", f.train.batch_size, "mini-batch size");
  cmd->add_option("--epochs", f.train.max_epochs, "maximum epochs");
  cmd->add_option("--patience", f.train.patience, "early-stopping patience");
  cmd->add_option("--clip", f.train.clip_norm, "global gradient-norm clip (0 disables)");
  cmd->add_option("--folds", f.folds, "cross-validation folds");
  cmd->add_option("--threads", f.threads, "parallel folds");
  cmd->add_option("--macro", f.macro, "macro-F1 classes: all | favor_against")
      ->check(CLI::IsMember({"all", "favor_against"}));
}

inline void add_data_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--data", f.data, "SemEval-format TSV")->required();
  cmd->add_option("--glove", f.glove, "word vectors text file")->required();
  cmd->add_option("--targets", f.targets_file, "JSON map of target abbreviations");
  cmd->add_option("--runs-dir", f.runs_dir, "directory for run records");
}

inline ExperimentConfig experiment_from(CommonFlags& f) {
  ExperimentConfig ex;
  ex.model = f.model;
  ex.model.arch = parse_arch(f.arch);
  ex.model.attention_activation = parse_activation(f.activation);
  ex.train = f.train;
  ex.train.seed = f.seed;
  ex.train.macro = f.macro == "all" ? MacroAverage::AllClasses : MacroAverage::FavorAgainst;
  ex.folds = f.folds;
  ex.threads = f.threads;
  try {
    ex.model.validate();
    ex.train.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (ex.folds < 3) throw UsageError("--folds must be at least 3");
  return ex;
}

inline nlohmann::json write_record(const fs::path& runs_dir, const std::string& run_id, const RunConfig& cfg,
                                   nlohmann::json result) {
  nlohmann::json rec = {{"run_id", run_id}, {"timestamp", utc_timestamp()}, {"config", to_json(cfg)},
                        {"result", std::move(result)}};
  write_file_atomic(runs_dir / (run_id + ".json"), rec.dump(2));
  return rec;
}

inline int run_train(const RunConfig& cfg, const fs::path& runs_dir, std::ostream& out) {
  const auto run_id = make_run_id(cfg);
  const fs::path ckpt = cfg.checkpoint.empty() ? runs_dir / (run_id + ".ckpt.json") : fs::path(cfg.checkpoint);
  auto result = execute_train(cfg, ckpt);
  write_record(runs_dir, run_id, cfg, result);
  out << arch_name(cfg.experiment.model.arch) << " " << cfg.source << " val f=" << fixed(100.0 * result["val_f"].get<double>(), 1)
      << " best_epoch=" << result["history"]["best_epoch"].get<std::size_t>() + 1 << "\n";
  out << "run " << run_id << " -> " << (runs_dir / (run_id + ".json")).string() << "\n";
  out << "checkpoint " << ckpt.string() << "\n";
  return kOk;
}

inline int run_eval(const RunConfig& cfg, const fs::path& runs_dir, std::ostream& out) {
  const auto run_id = make_run_id(cfg);
  std::optional<EvalReport> calibration;
  if (!cfg.calibration.empty()) {
    const auto rec = read_json(record_path(runs_dir, cfg.calibration));
    calibration = eval_report_from_json(rec.at("result").at("report"));
  }
  const auto report = execute_eval(cfg);
  nlohmann::json result = {{"report", to_json(report)}};
  std::optional<double> q;
  if (calibration) {
    const auto tr = transfer_ratio(report, *calibration);
    q = tr.q;
    result["transfer"] = {{"q", tr.q}, {"cross_f", tr.cross}, {"calibration_f", tr.calibration},
                          {"calibration_run", cfg.calibration}};
    if (calibration->folds.size() == report.folds.size())
      result["transfer"]["q_fold_mean"] = transfer_ratio_fold_mean(report.fold_f(), calibration->fold_f());
  }
  write_record(runs_dir, run_id, cfg, result);
  const auto targets = load_targets(cfg.targets_file);
  const auto dst = cfg.mode == EvalMode::InTarget ? cfg.source : cfg.dest;
  out << format_row(report, q, abbreviation(targets, cfg.source), abbreviation(targets, dst)) << "\n";
  out << "run " << run_id << " -> " << (runs_dir / (run_id + ".json")).string() << "\n";
  return kOk;
}

inline Workspace workspace_for_checkpoint(const Checkpoint& ck, const std::vector<Instance>& instances,
                                          const std::string& glove_override) {
  const std::string glove = glove_override.empty() ? ck.meta.value("glove", "") : glove_override;
  require_file(glove, "--glove");
  Workspace ws;
  ws.corpus.instances = instances;
  ws.vocab = vocabulary_for(instances);
  ws.embeddings = build_embeddings(ws.vocab, glove, ck.meta.value("embedding_seed", std::uint64_t{1}),
                                   ck.params.config.embedding_dim);
  ws.table = constant(ws.embeddings.table);
  return ws;
}

inline int run_attention(const std::string& checkpoint, const std::string& input, const std::string& output,
                         const std::string& glove, std::ostream& out) {
  require_file(checkpoint, "--checkpoint");
  require_file(input, "--input");
  const auto ck = load_checkpoint(checkpoint);
  if (ck.params.config.arch != Architecture::CrossNet)
    throw std::runtime_error("checkpoint holds a " + std::string(arch_name(ck.params.config.arch)) +
                             " model; attention export needs crossnet");
  const auto corpus = load_semeval(input);
  const auto ws = workspace_for_checkpoint(ck, corpus.instances, glove);
  std::ostringstream lines;
  for (const auto& inst : corpus.instances) lines << to_json(attend(inst, ws.vocab, ws.table, ck.params)).dump() << "\n";
  if (output.empty() || output == "-") {
    out << lines.str();
  } else {
    write_file_atomic(output, lines.str());
    out << "wrote " << corpus.instances.size() << " attention records to " << output << "\n";
  }
  return kOk;
}

inline AspectLexicon lexicon_for(const std::string& checkpoint, const std::string& corpus_path,
                                 const std::string& glove, double multiplier) {
  require_file(checkpoint, "--checkpoint");
  require_file(corpus_path, "--corpus");
  const auto ck = load_checkpoint(checkpoint);
  if (ck.params.config.arch != Architecture::CrossNet)
    throw std::runtime_error("aspect extraction needs crossnet checkpoints");
  const auto corpus = load_semeval(corpus_path);
  const auto ws = workspace_for_checkpoint(ck, corpus.instances, glove);
  AspectLexicon lex(multiplier);
  for (const auto& inst : corpus.instances) lex.observe(attend(inst, ws.vocab, ws.table, ck.params));
  return lex;
}

// Replays a record and compares its fold scores with the stored ones.
inline int run_rerun(const fs::path& record_file, const fs::path& runs_dir, std::ostream& out) {
  const auto rec = read_json(record_file);
  auto cfg = run_config_from_json(rec.at("config"));
  const auto stored = fold_scores_of(rec);
  std::vector<double> fresh;
  if (cfg.command == "train") {
    const auto tmp = runs_dir / (rec.at("run_id").get<std::string>() + ".rerun.ckpt.json");
    fresh = execute_train(cfg, tmp).at("folds").get<std::vector<double>>();
    fs::remove(tmp);
  } else if (cfg.command == "eval") {
    fresh = execute_eval(cfg).fold_f();
  } else {
    throw UsageError("record has unknown command '" + cfg.command + "'");
  }
  const bool same = fresh == stored;
  out << (same ? "identical" : "MISMATCH") << " fold scores (" << fresh.size() << " folds) for "
      << rec.at("run_id").get<std::string>() << "\n";
  return same ? kOk : kFailure;
}

// Entry point shared by the binary and the tests.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"crossnet: cross-target stance classification"};
  app.require_subcommand(1);
  CommonFlags f;

  auto* train_cmd = app.add_subcommand("train", "train one model on a target and save a checkpoint");
  std::string target, checkpoint_out;
  add_data_flags(train_cmd, f);
  add_model_flags(train_cmd, f);
  train_cmd->add_option("--target", target, "target abbreviation or name")->required();
  train_cmd->add_option("--out", checkpoint_out, "checkpoint path");

  auto* eval_cmd = app.add_subcommand("eval", "k-fold in-target or cross-target evaluation");
  std::string mode = "cross", source, dest, calibration;
  add_data_flags(eval_cmd, f);
  add_model_flags(eval_cmd, f);
  eval_cmd->add_option("--mode", mode, "in | cross")->check(CLI::IsMember({"in", "cross"}));
  eval_cmd->add_option("--source", source, "source target")->required();
  eval_cmd->add_option("--dest", dest, "destination target");
  eval_cmd->add_option("--calibration", calibration, "run id or record of the in-target baseline on --dest");

  auto* att_cmd = app.add_subcommand("attention", "dump per-token attention weights as JSON lines");
  std::string att_ckpt, att_input, att_output, att_glove;
  att_cmd->add_option("--checkpoint", att_ckpt, "crossnet checkpoint")->required();
  att_cmd->add_option("--input", att_input, "SemEval-format TSV")->required();
  att_cmd->add_option("--output", att_output, "output path (default stdout)");
  att_cmd->add_option("--glove", att_glove, "word vectors (default: path stored in the checkpoint)");

  auto* asp_cmd = app.add_subcommand("aspects", "highly attended words for two models and their intersection");
  std::string ck_a, ck_b, corpus_a, corpus_b, asp_glove, asp_output;
  double multiplier = kDefaultAttentionMultiplier;
  std::size_t top = 0;
  asp_cmd->add_option("--checkpoint-a", ck_a)->required();
  asp_cmd->add_option("--checkpoint-b", ck_b)->required();
  asp_cmd->add_option("--corpus-a", corpus_a)->required();
  asp_cmd->add_option("--corpus-b", corpus_b)->required();
  asp_cmd->add_option("--glove", asp_glove, "word vectors (default: path stored in each checkpoint)");
  asp_cmd->add_option("--multiplier", multiplier, "highly attended: weight >= multiplier / |P|");
  asp_cmd->add_option("--top", top, "keep the top-N words of each lexicon (0 = all)");
  asp_cmd->add_option("--output", asp_output, "output JSON path (default stdout)");

  auto* stats_cmd = app.add_subcommand("stats", "class distribution and OOV rate for one target");
  std::string stats_target;
  add_data_flags(stats_cmd, f);
  stats_cmd->add_option("--target", stats_target, "target abbreviation or name")->required();
  stats_cmd->add_option("--embedding-dim", f.model.embedding_dim, "word vector dimension");

  auto* rerun_cmd = app.add_subcommand("rerun", "replay a run record and verify identical fold scores");
  std::string record;
  rerun_cmd->add_option("record", record, "run record path or id")->required();
  rerun_cmd->add_option("--runs-dir", f.runs_dir, "directory for run records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    const fs::path runs_dir = f.runs_dir;
    if (train_cmd->parsed()) {
      RunConfig cfg;
      cfg.command = "train";
      cfg.data = f.data;
      cfg.glove = f.glove;
      cfg.targets_file = f.targets_file;
      cfg.source = target;
      cfg.experiment = experiment_from(f);
      cfg.checkpoint = checkpoint_out;
      require_file(cfg.data, "--data");
      require_file(cfg.glove, "--glove");
      resolve_target(load_targets(cfg.targets_file), cfg.source);
      return run_train(cfg, runs_dir, out);
    }
    if (eval_cmd->parsed()) {
      RunConfig cfg;
      cfg.command = "eval";
      cfg.data = f.data;
      cfg.glove = f.glove;
      cfg.targets_file = f.targets_file;
      cfg.mode = mode == "in" ? EvalMode::InTarget : EvalMode::CrossTarget;
      cfg.source = source;
      cfg.dest = cfg.mode == EvalMode::InTarget ? (dest.empty() ? source : dest) : dest;
      if (cfg.mode == EvalMode::CrossTarget && cfg.dest.empty()) throw UsageError("--dest is required for --mode cross");
      cfg.calibration = calibration;
      cfg.experiment = experiment_from(f);
      require_file(cfg.data, "--data");
      require_file(cfg.glove, "--glove");
      const auto tm = load_targets(cfg.targets_file);
      const auto src_name = resolve_target(tm, cfg.source);
      const auto dst_name = resolve_target(tm, cfg.dest);
      if (cfg.mode == EvalMode::InTarget && src_name != dst_name)
        throw UsageError("--mode in needs --dest equal to --source");
      return run_eval(cfg, runs_dir, out);
    }
    if (att_cmd->parsed()) return run_attention(att_ckpt, att_input, att_output, att_glove, out);
    if (asp_cmd->parsed()) {
      const auto lex_a = lexicon_for(ck_a, corpus_a, asp_glove, multiplier);
      const auto lex_b = lexicon_for(ck_b, corpus_b, asp_glove, multiplier);
      const nlohmann::json res = {{"multiplier", multiplier},
                                  {"top", top},
                                  {"a", to_json(lex_a, top)},
                                  {"b", to_json(lex_b, top)},
                                  {"intersection", intersect(lex_a, lex_b, top)}};
      if (asp_output.empty() || asp_output == "-")
        out << res.dump(2) << "\n";
      else
        write_file_atomic(asp_output, res.dump(2));
      return kOk;
    }
    if (stats_cmd->parsed()) {
      auto ws = load_workspace(f.data, f.glove, f.targets_file, f.seed, f.model.embedding_dim);
      const auto insts = target_instances(ws, stats_target);
      auto rep = loader_report(ws.targets.resolve(stats_target), insts, oov_rate(insts, ws.vocab, ws.embeddings));
      rep["rejected_empty"] = ws.corpus.rejected_empty;
      rep["embedding_coverage"] = ws.embeddings.coverage;
      out << rep.dump() << "\n";
      return kOk;
    }
    if (rerun_cmd->parsed()) return run_rerun(record_path(runs_dir, record), runs_dir, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace crossnet::cli
