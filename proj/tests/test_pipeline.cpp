#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "test_util.hpp"
#include "udep/checkpoint.hpp"
#include "udep/config.hpp"
#include "udep/pipeline.hpp"

using namespace udep;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.word_dim = 16;
  cfg.pos_dim = 8;
  cfg.d_model = 32;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.ffn_dim = 64;
  cfg.arc_mlp_dim = 32;
  cfg.label_mlp_dim = 16;
  cfg.dropout_p = 0.1;
  cfg.rel_pos_clip = 4;
  return cfg;
}

std::string synth(const std::string& file) {
  return (testutil::repo_root() / "data" / "synthetic" / file).string();
}
std::string vecs(const std::string& lang) {
  return (testutil::repo_root() / "data" / "vectors" / (lang + ".vec")).string();
}

StageSpec stage_for(const std::string& lang, const std::string& train, const std::string& dev) {
  StageSpec s;
  s.language = lang;
  s.train_path = synth(train);
  s.dev_path = synth(dev);
  s.vectors_path = vecs(lang);
  s.max_epochs = 60;
  s.patience = 60;
  s.lr = 0.01;
  s.batch_size = 8;
  return s;
}

ScenarioConfig scenario_for(ScenarioKind kind, std::uint64_t seed, int max_epochs) {
  ScenarioConfig cfg;
  cfg.kind = kind;
  cfg.seed = seed;
  cfg.split_seed = seed;
  cfg.model = small_model();
  cfg.test_path = synth("synta-test.conllu");
  if (kind == ScenarioKind::FS) {
    cfg.name = "fs-test";
    cfg.stages = {stage_for("synta", "synta-train.conllu", "synta-dev.conllu")};
  } else if (kind == ScenarioKind::TL) {
    cfg.name = "tl-test";
    cfg.stages = {stage_for("syntb", "syntb-train.conllu", "syntb-dev.conllu"),
                  stage_for("synta", "synta-train.conllu", "synta-dev.conllu")};
  } else {
    cfg.name = "htl-test";
    cfg.stages = {stage_for("syntc", "syntc-train.conllu", "syntc-dev.conllu"),
                  stage_for("syntb", "syntb-train.conllu", "syntb-dev.conllu"),
                  stage_for("synta", "synta-train.conllu", "synta-dev.conllu")};
  }
  for (auto& s : cfg.stages) s.max_epochs = max_epochs;
  return cfg;
}

Checkpoint fresh_checkpoint(const Vocab& vocab, std::uint64_t seed) {
  Checkpoint ckpt;
  ckpt.config = small_model();
  ckpt.config.num_labels = vocab.num_labels();
  ckpt.config.num_upos = vocab.num_upos();
  ckpt.vocab = vocab;
  ckpt.seed = seed;
  ckpt.params = init_model(ckpt.config, seed);
  return ckpt;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  Treebank tb = parse_conllu(testutil::two_token_fixture());
  Vocab vocab = build_vocab({tb});
  Checkpoint ckpt = fresh_checkpoint(vocab, 99);
  ckpt.lineage = {{"syntb", 0.75, 12}, {"synta", 0.875, 3}};

  auto dir = testutil::temp_dir("ckpt");
  save_checkpoint(ckpt, dir / "model.ckpt");
  Checkpoint back = load_checkpoint(dir / "model.ckpt");

  REQUIRE(back.params.size() == ckpt.params.size());
  for (const auto& [name, t] : ckpt.params) {
    REQUIRE(back.params.count(name) == 1);
    CHECK(back.params.at(name).v == t.v);
    CHECK(back.params.at(name).rows == t.rows);
  }
  CHECK(back.seed == 99);
  CHECK(back.vocab.upos_names == ckpt.vocab.upos_names);
  CHECK(back.vocab.label_names == ckpt.vocab.label_names);
  REQUIRE(back.lineage.size() == 2);
  CHECK(back.lineage[0].language == "syntb");
  CHECK(back.lineage[0].best_dev_uas == 0.75);
  CHECK(back.lineage[1].epoch == 3);
  CHECK(back.config.d_model == ckpt.config.d_model);
}

TEST_CASE("checkpoint loading rejects damaged files") {
  Treebank tb = parse_conllu(testutil::two_token_fixture());
  Checkpoint ckpt = fresh_checkpoint(build_vocab({tb}), 1);
  auto dir = testutil::temp_dir("ckpt-bad");
  save_checkpoint(ckpt, dir / "model.ckpt");

  SECTION("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir / "nope.ckpt"), CheckpointError);
  }
  SECTION("bad magic") {
    std::string raw = read_text_file(dir / "model.ckpt");
    raw[0] = 'X';
    write_text_file(dir / "model.ckpt", raw);
    CHECK_THROWS_MATCHES(load_checkpoint(dir / "model.ckpt"), CheckpointError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("magic")));
  }
  SECTION("truncated file") {
    std::string raw = read_text_file(dir / "model.ckpt");
    write_text_file(dir / "model.ckpt", raw.substr(0, raw.size() / 2));
    CHECK_THROWS_MATCHES(load_checkpoint(dir / "model.ckpt"), CheckpointError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("truncated")));
  }
  SECTION("missing sidecar") {
    fs::remove(checkpoint_sidecar_path(dir / "model.ckpt"));
    CHECK_THROWS_AS(load_checkpoint(dir / "model.ckpt"), CheckpointError);
  }
}

TEST_CASE("scenario config parsing") {
  SECTION("the shipped synthetic configs parse") {
    auto cfg = load_scenario_config(testutil::repo_root() / "configs" / "fs-synthetic.toml");
    CHECK(cfg.kind == ScenarioKind::FS);
    CHECK(cfg.stages.size() == 1);
    CHECK(cfg.model.d_model == 64);
    CHECK(fs::exists(cfg.stages[0].train_path));
    CHECK(fs::exists(cfg.test_path));
  }
  SECTION("the full-scale roster has the published shape: 1 FS + 4 TL + 3 HTL") {
    int n_fs = 0, n_tl = 0, n_htl = 0;
    for (const auto& entry : fs::directory_iterator(testutil::repo_root() / "configs" / "ud")) {
      auto cfg = parse_scenario_config(read_text_file(entry.path()));
      CHECK(cfg.stages.size() == static_cast<std::size_t>(stage_count_for(cfg.kind)));
      CHECK(cfg.stages.back().language == "jv");
      if (cfg.kind == ScenarioKind::FS) ++n_fs;
      if (cfg.kind == ScenarioKind::TL) ++n_tl;
      if (cfg.kind == ScenarioKind::HTL) {
        ++n_htl;
        CHECK(cfg.stages[1].language == "id");  // fixed intermediate language
      }
    }
    CHECK(n_fs == 1);
    CHECK(n_tl == 4);
    CHECK(n_htl == 3);
  }
  SECTION("stage arity mismatches are config errors") {
    std::string text =
        "name = \"x\"\nkind = \"HTL\"\nseed = 1\ntest = \"t.conllu\"\n"
        "[stage.1]\nlanguage = \"a\"\ntrain = \"a\"\ndev = \"a\"\nvectors = \"a\"\n"
        "[stage.2]\nlanguage = \"b\"\ntrain = \"b\"\ndev = \"b\"\nvectors = \"b\"\n";
    CHECK_THROWS_MATCHES(parse_scenario_config(text), ConfigError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("3 stage")));
  }
  SECTION("all violations are listed at once") {
    std::string text =
        "kind = \"XX\"\nseed = 1\ntest = \"t\"\nmystery = 4\n"
        "[stage.1]\nlanguage = \"a\"\ntrain = \"a\"\ndev = \"a\"\nvectors = \"a\"\n"
        "max_epochs = 0\npatience = 0\n";
    try {
      parse_scenario_config(text);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      CHECK(msg.find("name") != std::string::npos);
      CHECK(msg.find("kind") != std::string::npos);
      CHECK(msg.find("mystery") != std::string::npos);
      CHECK(msg.find("max_epochs") != std::string::npos);
      CHECK(msg.find("patience") != std::string::npos);
    }
  }
}

TEST_CASE("train_stage stopping rule: patience 1 with frozen learning rate") {
  Treebank train = load_treebank(synth("synta-train.conllu"));
  Vocab vocab = build_vocab({train});
  Checkpoint ckpt = fresh_checkpoint(vocab, 5);

  StageSpec spec = stage_for("synta", "synta-train.conllu", "synta-dev.conllu");
  spec.lr = 0.0;  // dev UAS can never improve after the first epoch
  spec.patience = 1;
  spec.max_epochs = 50;
  StageData data = load_stage_data(spec, vocab, ckpt.config.word_dim, nullptr);
  StageReport rep = train_stage(ckpt, spec, data, 0);
  CHECK(rep.epochs_run == 2);
  CHECK(rep.curve.size() == 3);  // epoch 0 eval + two training epochs
  CHECK(rep.best_epoch == 1);
  REQUIRE(ckpt.lineage.size() == 1);
  CHECK(ckpt.lineage[0].language == "synta");
}

TEST_CASE("transfer keeps incoming parameters bit-identical when nothing improves") {
  Treebank train = load_treebank(synth("synta-train.conllu"));
  Vocab vocab = build_vocab({train});
  Checkpoint ckpt = fresh_checkpoint(vocab, 6);
  ParamStore incoming = ckpt.params;

  StageSpec spec = stage_for("synta", "synta-train.conllu", "synta-dev.conllu");
  spec.lr = 0.0;
  spec.max_epochs = 3;
  spec.patience = 1;
  StageData data = load_stage_data(spec, vocab, ckpt.config.word_dim, nullptr);
  train_stage(ckpt, spec, data, 0);
  for (const auto& [name, t] : incoming) CHECK(ckpt.params.at(name).v == t.v);
}

TEST_CASE("train_stage overfits the synthetic treebank when dev equals train") {
  Treebank train = load_treebank(synth("synta-train.conllu"));
  Vocab vocab = build_vocab({train});
  Checkpoint ckpt = fresh_checkpoint(vocab, 11);

  StageSpec spec = stage_for("synta", "synta-train.conllu", "synta-train.conllu");
  StageData data = load_stage_data(spec, vocab, ckpt.config.word_dim, nullptr);
  StageReport rep = train_stage(ckpt, spec, data, 0);
  CHECK(ckpt.lineage.size() == 1);
  CHECK(rep.best_dev_uas >= 0.95);
}

TEST_CASE("word-dimension mismatches across stages are config errors") {
  Treebank train = load_treebank(synth("synta-train.conllu"));
  Vocab vocab = build_vocab({train});
  StageSpec spec = stage_for("synta", "synta-train.conllu", "synta-dev.conllu");
  CHECK_THROWS_AS(load_stage_data(spec, vocab, 32, nullptr), ConfigError);
}

TEST_CASE("run_scenario: FS produces one stage curve and a test block") {
  ScenarioConfig cfg = scenario_for(ScenarioKind::FS, 3, 8);
  RunReport rep = run_scenario(cfg);
  REQUIRE(rep.stages.size() == 1);
  CHECK(rep.stages[0].curve.size() >= 2);
  CHECK(rep.stages[0].curve[0].epoch == 0);
  CHECK(rep.test.n_sentences == 20);
  CHECK_FALSE(rep.test_read_during_training);
  // the test set shows up in the final-eval file list only
  bool in_train = false, in_eval = false;
  for (const auto& f : rep.files_read_training) in_train |= (f == cfg.test_path);
  for (const auto& f : rep.files_read_final_eval) in_eval |= (f == cfg.test_path);
  CHECK_FALSE(in_train);
  CHECK(in_eval);
}

TEST_CASE("run_scenario: HTL chains three stages with sane training dynamics") {
  ScenarioConfig cfg = scenario_for(ScenarioKind::HTL, 4, 6);
  for (auto& s : cfg.stages) s.patience = 6;
  RunReport rep = run_scenario(cfg);
  REQUIRE(rep.stages.size() == 3);
  CHECK(rep.stages[0].language == "syntc");
  CHECK(rep.stages[1].language == "syntb");
  CHECK(rep.stages[2].language == "synta");

  // lineage mirrors the stage order (checked through a persisted checkpoint)
  auto dir = testutil::temp_dir("htl");
  RunReport rep2 = run_scenario(scenario_for(ScenarioKind::HTL, 4, 2), &dir);
  Checkpoint final = load_checkpoint(dir / "htl-test-final.ckpt");
  REQUIRE(final.lineage.size() == 3);
  CHECK(final.lineage[0].language == "syntc");
  CHECK(final.lineage[2].language == "synta");

  // target-stage losses: finite at the start, lower within five epochs
  const auto& curve = rep.stages[2].curve;
  REQUIRE(curve.size() >= 3);
  double first = curve[1].train_loss;
  CHECK(std::isfinite(first));
  double best_early = first;
  for (std::size_t i = 2; i < curve.size() && curve[i].epoch <= 5; ++i)
    best_early = std::min(best_early, curve[i].train_loss);
  CHECK(best_early < first);

  // lineage monotonicity: the recorded best equals the curve maximum
  for (const auto& st : rep.stages) {
    double best = -1;
    for (std::size_t i = 1; i < st.curve.size(); ++i) best = std::max(best, st.curve[i].dev_uas);
    CHECK(st.best_dev_uas == Catch::Approx(best));
  }
}

TEST_CASE("run_scenario is deterministic given the seed") {
  ScenarioConfig cfg = scenario_for(ScenarioKind::TL, 9, 3);
  RunReport a = run_scenario(cfg);
  RunReport b = run_scenario(cfg);
  nlohmann::json ja = report_to_json(a);
  nlohmann::json jb = report_to_json(b);
  ja.erase("wall_seconds");
  jb.erase("wall_seconds");
  CHECK(ja.dump(2) == jb.dump(2));

  ScenarioConfig other = cfg;
  other.seed = 10;
  nlohmann::json jc = report_to_json(run_scenario(other));
  jc.erase("wall_seconds");
  CHECK(ja.dump(2) != jc.dump(2));
}

TEST_CASE("a failing stage persists the partial checkpoint") {
  // Treebanks are read up front for the vocab, so a failure DURING a stage
  // means something like a missing vector file.
  ScenarioConfig cfg = scenario_for(ScenarioKind::TL, 12, 2);
  cfg.stages[1].vectors_path = vecs("does-not-exist");
  auto dir = testutil::temp_dir("partial");
  CHECK_THROWS_AS(run_scenario(cfg, &dir), IoError);
  Checkpoint partial = load_checkpoint(dir / "tl-test-partial.ckpt");
  REQUIRE(partial.lineage.size() == 1);
  CHECK(partial.lineage[0].language == "syntb");
}
