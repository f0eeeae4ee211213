#pragma once

// Command-line surface. Everything routes through run_cli so tests can drive
// the tool in-process. Exit codes are a stable contract:
//   0 success, 2 user/config/data error, 3 checkpoint error,
//   4 gold/prediction alignment error, 1 internal error.

#include <CLI11.hpp>
#include <filesystem>
#include <json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "udep/checkpoint.hpp"
#include "udep/config.hpp"
#include "udep/conllu.hpp"
#include "udep/decoder.hpp"
#include "udep/embeddings.hpp"
#include "udep/metrics.hpp"
#include "udep/model.hpp"
#include "udep/pipeline.hpp"

namespace udep::cli {

namespace detail {

inline std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
  return buf;
}

inline nlohmann::json eval_to_json(const EvalReport& r) {
  return {{"uas", r.uas},           {"las", r.las},
          {"uas_moe", r.uas_moe},   {"las_moe", r.las_moe},
          {"n_words", r.n_words},   {"n_sentences", r.n_sentences}};
}

inline void print_eval(std::ostream& out, const EvalReport& r) {
  out << "UAS  " << pct(r.uas) << " ± " << pct(r.uas_moe) << "\n"
      << "LAS  " << pct(r.las) << " ± " << pct(r.las_moe) << "\n"
      << "words " << r.n_words << "  sentences " << r.n_sentences << "\n";
}

struct SplitArgs {
  std::string input;
  std::string ratios = "0.8,0.1,0.1";
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

inline std::tuple<double, double, double> parse_ratios(const std::string& text) {
  double a = 0, b = 0, c = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf", &a, &b, &c) != 3)
    throw ConfigError("ratios must look like 0.8,0.1,0.1; got '" + text + "'");
  return {a, b, c};
}

inline int do_split(const SplitArgs& args, std::ostream& out) {
  auto ratios = parse_ratios(args.ratios);
  Treebank tb = load_treebank(args.input);
  validate_treebank(tb);
  auto [train, dev, test] = split_treebank(tb, ratios, args.seed);

  std::filesystem::create_directories(args.out_dir);
  std::string stem = std::filesystem::path(args.input).stem().string();
  auto dir = std::filesystem::path(args.out_dir);
  std::map<std::string, const Treebank*> parts = {
      {"train", &train}, {"dev", &dev}, {"test", &test}};
  nlohmann::json manifest;
  manifest["input"] = args.input;
  manifest["seed"] = args.seed;
  manifest["ratios"] = {std::get<0>(ratios), std::get<1>(ratios), std::get<2>(ratios)};
  for (const auto& [name, part] : parts) {
    auto path = dir / (stem + "-" + name + ".conllu");
    write_text_file(path, write_conllu(*part));
    manifest["files"][name] = path.string();
    manifest["counts"][name] = part->sentences.size();
  }
  write_text_file(dir / (stem + "-split-manifest.json"), manifest.dump(2) + "\n");
  out << "split " << tb.sentences.size() << " sentences into " << train.sentences.size() << "/"
      << dev.sentences.size() << "/" << test.sentences.size() << " (seed " << args.seed << ")\n";
  return 0;
}

inline int do_stats(const std::string& input, bool as_json, std::ostream& out) {
  Treebank tb = load_treebank(input);
  TreebankStats st = treebank_stats(tb);
  if (as_json) {
    nlohmann::json j = {{"sentence_count", st.sentence_count},
                        {"word_count", st.word_count},
                        {"unique_word_count", st.unique_word_count},
                        {"avg_sentence_length", st.avg_sentence_length},
                        {"upos_count", st.upos_count},
                        {"universal_relation_count", st.universal_relation_count},
                        {"language_specific_relation_count", st.language_specific_relation_count},
                        {"total_relation_count", st.total_relation_count}};
    out << j.dump(2) << "\n";
    return 0;
  }
  char avg[32];
  std::snprintf(avg, sizeof(avg), "%.2f", st.avg_sentence_length);
  out << "Sentence count                      " << st.sentence_count << "\n"
      << "Word count                          " << st.word_count << "\n"
      << "Unique word count                   " << st.unique_word_count << "\n"
      << "Average sentence length (in words)  " << avg << "\n"
      << "UPOS tag count                      " << st.upos_count << "\n"
      << "Universal relation count            " << st.universal_relation_count << "\n"
      << "Language-specific relation count    " << st.language_specific_relation_count << "\n"
      << "Total relation count                " << st.total_relation_count << "\n";
  return 0;
}

struct TrainArgs {
  std::string train, dev, vectors, language = "xx", out;
  std::uint64_t seed = 1;
  int max_epochs = 200;
  int patience = 10;
  double lr = 1e-3;
  int batch_size = 16;
  ModelConfig model;  // word_dim inferred from the vector file
};

inline int do_train(const TrainArgs& args, std::ostream& out) {
  StageSpec spec;
  spec.language = args.language;
  spec.train_path = args.train;
  spec.dev_path = args.dev;
  spec.vectors_path = args.vectors;
  spec.max_epochs = args.max_epochs;
  spec.patience = args.patience;
  spec.lr = args.lr;
  spec.batch_size = args.batch_size;

  Treebank train_tb = load_gold_treebank(args.train, nullptr);
  Treebank dev_tb = load_gold_treebank(args.dev, nullptr);
  Vocab vocab = build_vocab({train_tb, dev_tb});

  EmbeddingTable table = load_vectors(args.vectors);
  ModelConfig cfg = args.model;
  cfg.word_dim = table.dim;
  cfg.num_labels = vocab.num_labels();
  cfg.num_upos = vocab.num_upos();
  cfg.validate();

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.vocab = vocab;
  ckpt.seed = args.seed;
  ckpt.params = init_model(cfg, args.seed);

  StageData data = load_stage_data(spec, vocab, cfg.word_dim, nullptr);
  StageReport rep = train_stage(ckpt, spec, data, 0);
  save_checkpoint(ckpt, args.out);
  out << "trained " << rep.epochs_run << " epoch(s); best dev UAS " << pct(rep.best_dev_uas)
      << " at epoch " << rep.best_epoch << "; checkpoint written to " << args.out << "\n";
  return 0;
}

inline int do_parse(const std::string& ckpt_path, const std::string& vectors_path,
                    const std::string& input, const std::string& output, std::ostream& out) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  EmbeddingTable table = load_vectors(vectors_path);
  if (table.dim != ckpt.config.word_dim)
    throw CheckpointError("vector file dim " + std::to_string(table.dim) +
                          " does not match the checkpoint's word_dim " +
                          std::to_string(ckpt.config.word_dim));
  Treebank tb = load_treebank(input);
  Treebank pred = tb;
  for (std::size_t i = 0; i < tb.sentences.size(); ++i) {
    EncodedSentence enc = encode_for_prediction(tb.sentences[i], table, ckpt.vocab);
    DependencyTree tree = predict(ckpt.params, enc, ckpt.config);
    pred.sentences[i] = assemble(tree.heads, tree.label_ids, tb.sentences[i], ckpt.vocab);
  }
  write_text_file(output, write_conllu(pred));
  out << "parsed " << tb.sentences.size() << " sentence(s) into " << output << "\n";
  return 0;
}

inline int do_eval(const std::string& gold_path, const std::string& pred_path, bool as_json,
                   double z, std::ostream& out) {
  Treebank gold = load_treebank(gold_path);
  Treebank pred = load_treebank(pred_path);
  EvalReport r = attachment_scores(gold, pred, z);
  if (as_json) out << eval_to_json(r).dump(2) << "\n";
  else print_eval(out, r);
  return 0;
}

inline int do_confusion(const std::string& gold_path, const std::string& pred_path, int top_k,
                        std::ostream& out) {
  Treebank gold = load_treebank(gold_path);
  Treebank pred = load_treebank(pred_path);
  auto table = label_confusion(gold, pred, top_k);
  out << "gold\tpredicted\tcount\n";
  for (const auto& e : table) out << e.gold << "\t" << e.predicted << "\t" << e.count << "\n";
  return 0;
}

inline int do_run_scenario(const std::string& config_path, const std::string& out_dir,
                           std::ostream& out) {
  ScenarioConfig cfg = load_scenario_config(config_path);
  std::filesystem::create_directories(out_dir);
  std::filesystem::path dir(out_dir);
  RunReport report = run_scenario(cfg, &dir);

  write_text_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
  std::string row = format_report_row(report);
  std::string txt = row + "\n";
  for (const auto& s : report.stages) {
    txt += "stage " + s.language + ": best dev UAS " + pct(s.best_dev_uas) + " at epoch " +
           std::to_string(s.best_epoch) + " (" + std::to_string(s.epochs_run) + " epochs)\n";
  }
  write_text_file(dir / "report.txt", txt);
  out << row << "\n";
  return 0;
}

inline int do_moe_check(double score, long n, double z, std::ostream& out) {
  double moe = margin_of_error(score / 100.0, n, z);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * moe);
  out << buf << "\n";
  return 0;
}

}  // namespace detail

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"udep: dependency parsing with cross-lingual transfer at desk scale"};
  app.require_subcommand(1);

  detail::SplitArgs split_args;
  auto* split = app.add_subcommand("split", "split a treebank into train/dev/test parts");
  split->add_option("--input", split_args.input, "CoNLL-U file")->required();
  split->add_option("--ratios", split_args.ratios, "train,dev,test ratios (default 0.8,0.1,0.1)");
  split->add_option("--seed", split_args.seed, "shuffle seed");
  split->add_option("--out-dir", split_args.out_dir, "output directory");

  std::string stats_input;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "corpus statistics of a treebank");
  stats->add_option("--input", stats_input, "CoNLL-U file")->required();
  stats->add_flag("--json", stats_json, "emit JSON");

  detail::TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a parser on one treebank");
  train->add_option("--train", train_args.train, "training CoNLL-U file")->required();
  train->add_option("--dev", train_args.dev, "development CoNLL-U file")->required();
  train->add_option("--vectors", train_args.vectors, "word vectors (word2vec text)")->required();
  train->add_option("--language", train_args.language, "language code for the lineage");
  train->add_option("--out", train_args.out, "checkpoint output path")->required();
  train->add_option("--seed", train_args.seed, "init/shuffle seed");
  train->add_option("--epochs", train_args.max_epochs, "maximum epochs");
  train->add_option("--patience", train_args.patience, "early-stopping patience");
  train->add_option("--lr", train_args.lr, "Adam learning rate");
  train->add_option("--batch-size", train_args.batch_size, "sentences per batch");
  train->add_option("--d-model", train_args.model.d_model, "encoder width");
  train->add_option("--layers", train_args.model.num_layers, "encoder layers");
  train->add_option("--heads", train_args.model.num_heads, "attention heads");
  train->add_option("--ffn-dim", train_args.model.ffn_dim, "feed-forward width");
  train->add_option("--pos-dim", train_args.model.pos_dim, "POS embedding width");
  train->add_option("--arc-mlp-dim", train_args.model.arc_mlp_dim, "arc scorer width");
  train->add_option("--label-mlp-dim", train_args.model.label_mlp_dim, "label scorer width");
  train->add_option("--dropout", train_args.model.dropout_p, "dropout probability");
  train->add_option("--rel-pos-clip", train_args.model.rel_pos_clip, "relative position clip");

  std::string parse_ckpt, parse_vectors, parse_input, parse_output;
  auto* parse = app.add_subcommand("parse", "parse a CoNLL-U file with a checkpoint");
  parse->add_option("--checkpoint", parse_ckpt, "checkpoint path")->required();
  parse->add_option("--vectors", parse_vectors, "word vectors for the input language")->required();
  parse->add_option("--input", parse_input, "input CoNLL-U file")->required();
  parse->add_option("--output", parse_output, "output CoNLL-U file")->required();

  std::string eval_gold, eval_pred;
  bool eval_json = false;
  double eval_z = 1.96;
  auto* eval = app.add_subcommand("eval", "UAS/LAS with margins of error");
  eval->add_option("--gold", eval_gold, "gold CoNLL-U file")->required();
  eval->add_option("--pred", eval_pred, "predicted CoNLL-U file")->required();
  eval->add_flag("--json", eval_json, "emit JSON");
  eval->add_option("--z", eval_z, "z value for the confidence level (default 1.96)");

  std::string conf_gold, conf_pred;
  int conf_k = 10;
  auto* confusion = app.add_subcommand("confusion", "top gold/predicted label confusions");
  confusion->add_option("--gold", conf_gold, "gold CoNLL-U file")->required();
  confusion->add_option("--pred", conf_pred, "predicted CoNLL-U file")->required();
  confusion->add_option("--top-k", conf_k, "number of pairs to print (default 10)");

  std::string scen_config, scen_out = ".";
  auto* scenario = app.add_subcommand("run-scenario", "run an FS/TL/HTL scenario config");
  scenario->add_option("--config", scen_config, "scenario config file")->required();
  scenario->add_option("--out-dir", scen_out, "directory for reports and checkpoints");

  double moe_score = 0;
  long moe_n = 0;
  double moe_z = 1.96;
  auto* moe = app.add_subcommand("moe-check", "margin of error for a percent score");
  moe->add_option("--score", moe_score, "score in percent, e.g. 75.87")->required();
  moe->add_option("--n", moe_n, "sample size in words")->required();
  moe->add_option("--z", moe_z, "z value (default 1.96)");

  try {
    std::vector<const char*> argv;
    argv.push_back("udep");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 2;
  }

  try {
    if (split->parsed()) return detail::do_split(split_args, out);
    if (stats->parsed()) return detail::do_stats(stats_input, stats_json, out);
    if (train->parsed()) return detail::do_train(train_args, out);
    if (parse->parsed())
      return detail::do_parse(parse_ckpt, parse_vectors, parse_input, parse_output, out);
    if (eval->parsed()) return detail::do_eval(eval_gold, eval_pred, eval_json, eval_z, out);
    if (confusion->parsed()) return detail::do_confusion(conf_gold, conf_pred, conf_k, out);
    if (scenario->parsed()) return detail::do_run_scenario(scen_config, scen_out, out);
    if (moe->parsed()) return detail::do_moe_check(moe_score, moe_n, moe_z, out);
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return 3;
  } catch (const AlignmentError& e) {
    err << "alignment error: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const SizeError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace udep::cli
