#pragma once

// Scenario orchestration: from-scratch, transfer, and hierarchical transfer
// runs as chains of training stages. Every stage trains with shuffled
// mini-batch Adam, early-stops on dev UAS, and hands its best parameters to
// the next stage. The held-out test set is read only after the last stage;
// the run report carries the file-access log that proves it.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <limits>
#include <string>
#include <vector>

#include "udep/checkpoint.hpp"
#include "udep/config.hpp"
#include "udep/conllu.hpp"
#include "udep/decoder.hpp"
#include "udep/embeddings.hpp"
#include "udep/metrics.hpp"
#include "udep/model.hpp"
#include "udep/optim.hpp"

namespace udep {

struct EpochPoint {
  int epoch = 0;  // 0 = evaluation before any training in this stage
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double dev_uas = 0;
  double dev_las = 0;
};

struct StageReport {
  std::string language;
  std::vector<EpochPoint> curve;
  int best_epoch = 0;
  double best_dev_uas = 0;
  int epochs_run = 0;
};

struct RunReport {
  std::string scenario;
  ScenarioKind kind = ScenarioKind::FS;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::vector<StageReport> stages;
  EvalReport test;
  double wall_seconds = 0;
  std::vector<std::string> files_read_training;
  std::vector<std::string> files_read_final_eval;
  bool test_read_during_training = true;  // must come out false
};

// Which files each phase touched; the report asserts the test set stayed
// unread until final evaluation.
struct FileAccessLog {
  std::vector<std::string> training;
  std::vector<std::string> final_eval;
  bool in_training_phase = true;

  void note(const std::filesystem::path& p) {
    (in_training_phase ? training : final_eval).push_back(p.string());
  }
};

// Everything a stage needs in memory: validated, label-simplified treebanks,
// their encodings, and the language's vector table.
struct StageData {
  Treebank train_gold;
  Treebank dev_gold;
  std::vector<EncodedSentence> train_enc;
  std::vector<EncodedSentence> dev_enc;
  EmbeddingTable vectors;
};

inline Treebank load_gold_treebank(const std::filesystem::path& path, FileAccessLog* log) {
  if (log) log->note(path);
  Treebank tb = load_treebank(path);
  validate_treebank(tb);
  return simplify_labels(std::move(tb));
}

inline std::vector<EncodedSentence> encode_treebank(const Treebank& tb, const EmbeddingTable& table,
                                                    const Vocab& vocab) {
  std::vector<EncodedSentence> out;
  out.reserve(tb.sentences.size());
  for (const auto& s : tb.sentences) out.push_back(encode_sentence(s, table, vocab));
  return out;
}

inline StageData load_stage_data(const StageSpec& spec, const Vocab& vocab, int expect_word_dim,
                                 FileAccessLog* log) {
  StageData d;
  if (log) log->note(spec.vectors_path);
  d.vectors = load_vectors(spec.vectors_path);
  if (d.vectors.dim != expect_word_dim)
    throw ConfigError("stage '" + spec.language + "': vector file " + spec.vectors_path + " has dim " +
                      std::to_string(d.vectors.dim) + " but the model expects word_dim " +
                      std::to_string(expect_word_dim));
  d.train_gold = load_gold_treebank(spec.train_path, log);
  d.dev_gold = load_gold_treebank(spec.dev_path, log);
  if (d.train_gold.sentences.empty())
    throw ConfigError("stage '" + spec.language + "': empty training set " + spec.train_path);
  d.train_enc = encode_treebank(d.train_gold, d.vectors, vocab);
  d.dev_enc = encode_treebank(d.dev_gold, d.vectors, vocab);
  return d;
}

// Decode every sentence with frozen parameters and score against gold.
inline EvalReport evaluate_model(const ParamStore& params, const ModelConfig& cfg,
                                 const std::vector<EncodedSentence>& enc, const Treebank& gold,
                                 const Vocab& vocab) {
  Treebank pred = gold;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    DependencyTree tree = predict(params, enc[i], cfg);
    pred.sentences[i] = assemble(tree.heads, tree.label_ids, gold.sentences[i], vocab);
  }
  return attachment_scores(gold, pred);
}

// One training stage: shuffled mini-batch Adam with dev-UAS early stopping.
// The checkpoint enters with the previous stage's parameters (nothing is
// reinitialized) and leaves holding the best-dev parameters plus one more
// lineage entry. Epoch 0 of the curve is the pre-training dev score; the
// early-stopping baseline starts at the first trained epoch.
inline StageReport train_stage(Checkpoint& ckpt, const StageSpec& spec, const StageData& data,
                               int stage_index) {
  StageReport report;
  report.language = spec.language;

  EvalReport at_start =
      evaluate_model(ckpt.params, ckpt.config, data.dev_enc, data.dev_gold, ckpt.vocab);
  report.curve.push_back({0, std::numeric_limits<double>::quiet_NaN(), at_start.uas, at_start.las});

  AdamState adam = make_adam_state(ckpt.params, {.lr = spec.lr});
  ParamStore best_params;
  double best_uas = -1;
  int best_epoch = 0;
  int epochs_since_best = 0;

  const long n_train = static_cast<long>(data.train_enc.size());
  std::vector<int> order(n_train);
  for (long i = 0; i < n_train; ++i) order[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(ckpt.seed, stage_index, epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0;
    long batch_index = 0;
    for (long start = 0; start < n_train; start += spec.batch_size, ++batch_index) {
      long end = std::min(n_train, start + spec.batch_size);
      ModelRun run(ckpt.params, ckpt.config);
      ad::Var batch_loss;
      for (long b = start; b < end; ++b) {
        const EncodedSentence& enc = data.train_enc[order[b]];
        std::uint64_t dseed = derive_seed(ckpt.seed, stage_index, epoch, (batch_index << 16) + (b - start));
        auto scores = run.score(enc, /*train_mode=*/true, dseed);
        ad::Var l = run.loss(scores, enc.gold_heads, enc.gold_label_ids);
        batch_loss = (b == start) ? l : run.tape().add(batch_loss, l);
      }
      batch_loss = run.tape().scale(batch_loss, 1.0 / static_cast<double>(end - start));
      loss_sum += run.tape().val(batch_loss).v[0] * static_cast<double>(end - start);
      run.tape().backward(batch_loss);
      adam_step(ckpt.params, run.param_grads(), adam);
    }

    EvalReport dev = evaluate_model(ckpt.params, ckpt.config, data.dev_enc, data.dev_gold, ckpt.vocab);
    report.curve.push_back({epoch, loss_sum / static_cast<double>(n_train), dev.uas, dev.las});
    report.epochs_run = epoch;

    if (dev.uas > best_uas) {
      best_uas = dev.uas;
      best_epoch = epoch;
      best_params = ckpt.params;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    if (epochs_since_best >= spec.patience) break;
  }

  ckpt.params = std::move(best_params);
  ckpt.lineage.push_back({spec.language, best_uas, best_epoch});
  report.best_epoch = best_epoch;
  report.best_dev_uas = best_uas;
  return report;
}

// Full scenario. Stages run strictly in order, each starting from the
// previous best checkpoint; test metrics are computed exactly once at the
// end. If a stage throws, the partial checkpoint (with its lineage so far)
// is persisted to out_dir before the error propagates.
inline RunReport run_scenario(const ScenarioConfig& cfg,
                              const std::filesystem::path* out_dir = nullptr) {
  auto t_start = std::chrono::steady_clock::now();
  RunReport report;
  report.scenario = cfg.name;
  report.kind = cfg.kind;
  report.seed = cfg.seed;
  report.split_seed = cfg.split_seed;

  if (static_cast<int>(cfg.stages.size()) != stage_count_for(cfg.kind))
    throw ConfigError("scenario kind " + to_string(cfg.kind) + " needs " +
                      std::to_string(stage_count_for(cfg.kind)) + " stages");

  FileAccessLog log;

  // Vocab over every stage's treebanks, so label/UPOS ids are stable across
  // transfer stages.
  std::vector<Treebank> vocab_source;
  for (const auto& stage : cfg.stages) {
    vocab_source.push_back(load_gold_treebank(stage.train_path, &log));
    vocab_source.push_back(load_gold_treebank(stage.dev_path, &log));
  }
  Vocab vocab = build_vocab(vocab_source);
  vocab_source.clear();

  ModelConfig model_cfg = cfg.model;
  model_cfg.num_labels = vocab.num_labels();
  model_cfg.num_upos = vocab.num_upos();
  model_cfg.validate();

  Checkpoint ckpt;
  ckpt.params = init_model(model_cfg, cfg.seed);
  ckpt.config = model_cfg;
  ckpt.vocab = vocab;
  ckpt.seed = cfg.seed;

  for (std::size_t k = 0; k < cfg.stages.size(); ++k) {
    try {
      StageData data = load_stage_data(cfg.stages[k], vocab, model_cfg.word_dim, &log);
      report.stages.push_back(train_stage(ckpt, cfg.stages[k], data, static_cast<int>(k)));
    } catch (...) {
      if (out_dir)
        save_checkpoint(ckpt, *out_dir / (cfg.name + "-partial.ckpt"));
      throw;
    }
    if (out_dir)
      save_checkpoint(ckpt, *out_dir / (cfg.name + "-stage" + std::to_string(k + 1) + ".ckpt"));
  }

  // Final, single evaluation on the held-out test set with the target
  // language's vectors.
  log.in_training_phase = false;
  log.note(cfg.test_path);
  Treebank test_gold = load_treebank(cfg.test_path);
  validate_treebank(test_gold);
  test_gold = simplify_labels(std::move(test_gold));
  log.note(cfg.stages.back().vectors_path);
  EmbeddingTable target_vectors = load_vectors(cfg.stages.back().vectors_path);
  std::vector<EncodedSentence> test_enc;
  test_enc.reserve(test_gold.sentences.size());
  for (const auto& s : test_gold.sentences)
    test_enc.push_back(encode_for_prediction(s, target_vectors, vocab));
  report.test = evaluate_model(ckpt.params, model_cfg, test_enc, test_gold, vocab);

  if (out_dir) save_checkpoint(ckpt, *out_dir / (cfg.name + "-final.ckpt"));

  report.files_read_training = log.training;
  report.files_read_final_eval = log.final_eval;
  // A config may deliberately alias the test path to a stage input (the
  // overfit scenario scores its own training set); only a read that no stage
  // was configured to make counts as a leak.
  bool aliased = false;
  for (const auto& s : cfg.stages)
    aliased |= (s.train_path == cfg.test_path || s.dev_path == cfg.test_path);
  report.test_read_during_training = false;
  if (!aliased)
    for (const auto& f : log.training)
      if (f == cfg.test_path) report.test_read_during_training = true;
  if (report.test_read_during_training)
    throw ContractError("test set was read during a training stage");

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : r.stages) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : s.curve) {
      nlohmann::json point = {{"epoch", p.epoch}, {"dev_uas", p.dev_uas}, {"dev_las", p.dev_las}};
      if (!std::isnan(p.train_loss)) point["train_loss"] = p.train_loss;
      curve.push_back(point);
    }
    stages.push_back({{"language", s.language},
                      {"curve", curve},
                      {"best_epoch", s.best_epoch},
                      {"best_dev_uas", s.best_dev_uas},
                      {"epochs_run", s.epochs_run}});
  }
  return {{"scenario", r.scenario},
          {"kind", to_string(r.kind)},
          {"seed", r.seed},
          {"split_seed", r.split_seed},
          {"stages", stages},
          {"test",
           {{"uas", r.test.uas},
            {"las", r.test.las},
            {"uas_moe", r.test.uas_moe},
            {"las_moe", r.test.las_moe},
            {"n_words", r.test.n_words},
            {"n_sentences", r.test.n_sentences}}},
          {"files_read",
           {{"training", r.files_read_training}, {"final_eval", r.files_read_final_eval}}},
          {"test_read_during_training", r.test_read_during_training},
          {"wall_seconds", r.wall_seconds}};
}

// One result row, percentages with two decimals: "UAS +- MOE  LAS +- MOE".
inline std::string format_report_row(const RunReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-16s %5.2f ± %.2f  %5.2f ± %.2f", r.scenario.c_str(),
                100.0 * r.test.uas, 100.0 * r.test.uas_moe, 100.0 * r.test.las,
                100.0 * r.test.las_moe);
  return buf;
}

}  // namespace udep
