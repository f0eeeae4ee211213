#pragma once

// Scenario configuration files: a flat TOML-compatible key-value format with
// one [stage.N] section per training stage and an optional [model] section.
// Validation collects every violation before failing, so one run of the CLI
// reports the whole list.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "udep/conllu.hpp"
#include "udep/errors.hpp"
#include "udep/model.hpp"

namespace udep {

enum class ScenarioKind { FS, TL, HTL };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::FS: return "FS";
    case ScenarioKind::TL: return "TL";
    case ScenarioKind::HTL: return "HTL";
  }
  return "?";
}

inline int stage_count_for(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::FS: return 1;
    case ScenarioKind::TL: return 2;
    case ScenarioKind::HTL: return 3;
  }
  return 0;
}

struct StageSpec {
  std::string language;
  std::string train_path;
  std::string dev_path;
  std::string vectors_path;
  int max_epochs = 200;
  int patience = 10;
  double lr = 1e-3;
  int batch_size = 16;
};

struct ScenarioConfig {
  std::string name;
  ScenarioKind kind = ScenarioKind::FS;
  std::vector<StageSpec> stages;  // last stage is the target language
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;  // provenance of the data split, echoed in reports
  std::string test_path;         // held-out target test set
  ModelConfig model;             // num_labels/num_upos stay 0 until a vocab is built
};

namespace detail_cfg {

struct RawEntry {
  std::string value;
  long line = 0;
  bool is_string = false;
};

// section -> key -> entry; top-level keys live under "".
using RawConfig = std::map<std::string, std::map<std::string, RawEntry>>;

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline RawConfig parse_raw(const std::string& text, std::vector<std::string>& problems) {
  RawConfig out;
  std::string section;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) {
      if (pos >= text.size()) break;
      eol = text.size();
    }
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    // strip comments outside quotes
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_quote = !in_quote;
      else if (line[i] == '#' && !in_quote) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        problems.push_back("line " + std::to_string(line_no) + ": unterminated section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        problems.push_back("line " + std::to_string(line_no) + ": empty section name");
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      problems.push_back("line " + std::to_string(line_no) + ": empty key or value");
      continue;
    }
    RawEntry entry;
    entry.line = line_no;
    if (value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') {
        problems.push_back("line " + std::to_string(line_no) + ": unterminated string");
        continue;
      }
      entry.value = value.substr(1, value.size() - 2);
      entry.is_string = true;
    } else {
      entry.value = value;
    }
    if (out[section].count(key))
      problems.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out[section][key] = std::move(entry);
  }
  return out;
}

class SectionReader {
 public:
  SectionReader(const std::string& name, const std::map<std::string, RawEntry>* entries,
                std::vector<std::string>& problems)
      : name_(name), entries_(entries), problems_(problems) {}

  std::string get_string(const std::string& key, const std::string& fallback, bool required) {
    const RawEntry* e = find(key);
    if (!e) {
      if (required) problems_.push_back(where() + ": missing required key '" + key + "'");
      return fallback;
    }
    if (!e->is_string) {
      problems_.push_back(where() + ": key '" + key + "' must be a quoted string");
      return fallback;
    }
    return e->value;
  }

  long get_int(const std::string& key, long fallback) {
    const RawEntry* e = find(key);
    if (!e) return fallback;
    try {
      std::size_t used = 0;
      long v = std::stol(e->value, &used);
      if (used != e->value.size() || e->is_string) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      problems_.push_back(where() + ": key '" + key + "' must be an integer, got '" + e->value + "'");
      return fallback;
    }
  }

  double get_double(const std::string& key, double fallback) {
    const RawEntry* e = find(key);
    if (!e) return fallback;
    try {
      std::size_t used = 0;
      double v = std::stod(e->value, &used);
      if (used != e->value.size() || e->is_string) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      problems_.push_back(where() + ": key '" + key + "' must be a number, got '" + e->value + "'");
      return fallback;
    }
  }

  void check_known(const std::vector<std::string>& known) {
    if (!entries_) return;
    for (const auto& [key, entry] : *entries_) {
      bool ok = false;
      for (const auto& k : known)
        if (k == key) ok = true;
      if (!ok)
        problems_.push_back(where() + ": unknown key '" + key + "' (line " +
                            std::to_string(entry.line) + ")");
    }
  }

 private:
  std::string name_;
  const std::map<std::string, RawEntry>* entries_;
  std::vector<std::string>& problems_;

  const RawEntry* find(const std::string& key) const {
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    return it == entries_->end() ? nullptr : &it->second;
  }
  std::string where() const { return name_.empty() ? "top level" : "[" + name_ + "]"; }
};

}  // namespace detail_cfg

inline ScenarioConfig parse_scenario_config(const std::string& text) {
  using namespace detail_cfg;
  std::vector<std::string> problems;
  RawConfig raw = parse_raw(text, problems);

  auto section_of = [&](const std::string& name) -> const std::map<std::string, RawEntry>* {
    auto it = raw.find(name);
    return it == raw.end() ? nullptr : &it->second;
  };

  ScenarioConfig cfg;
  SectionReader top("", section_of(""), problems);
  top.check_known({"name", "kind", "seed", "split_seed", "test"});
  cfg.name = top.get_string("name", "", /*required=*/true);
  std::string kind = top.get_string("kind", "", /*required=*/true);
  if (kind == "FS") cfg.kind = ScenarioKind::FS;
  else if (kind == "TL") cfg.kind = ScenarioKind::TL;
  else if (kind == "HTL") cfg.kind = ScenarioKind::HTL;
  else if (!kind.empty()) problems.push_back("kind must be one of FS, TL, HTL; got '" + kind + "'");
  cfg.seed = static_cast<std::uint64_t>(top.get_int("seed", 0));
  cfg.split_seed = static_cast<std::uint64_t>(top.get_int("split_seed", static_cast<long>(cfg.seed)));
  cfg.test_path = top.get_string("test", "", /*required=*/true);

  SectionReader model("model", section_of("model"), problems);
  model.check_known({"word_dim", "pos_dim", "d_model", "num_layers", "num_heads", "ffn_dim",
                     "arc_mlp_dim", "label_mlp_dim", "dropout", "rel_pos_clip"});
  cfg.model.word_dim = static_cast<int>(model.get_int("word_dim", cfg.model.word_dim));
  cfg.model.pos_dim = static_cast<int>(model.get_int("pos_dim", cfg.model.pos_dim));
  cfg.model.d_model = static_cast<int>(model.get_int("d_model", cfg.model.d_model));
  cfg.model.num_layers = static_cast<int>(model.get_int("num_layers", cfg.model.num_layers));
  cfg.model.num_heads = static_cast<int>(model.get_int("num_heads", cfg.model.num_heads));
  cfg.model.ffn_dim = static_cast<int>(model.get_int("ffn_dim", cfg.model.ffn_dim));
  cfg.model.arc_mlp_dim = static_cast<int>(model.get_int("arc_mlp_dim", cfg.model.arc_mlp_dim));
  cfg.model.label_mlp_dim = static_cast<int>(model.get_int("label_mlp_dim", cfg.model.label_mlp_dim));
  cfg.model.dropout_p = model.get_double("dropout", cfg.model.dropout_p);
  cfg.model.rel_pos_clip = static_cast<int>(model.get_int("rel_pos_clip", cfg.model.rel_pos_clip));

  // stage sections must be stage.1 .. stage.K, contiguous
  int max_stage = 0;
  for (const auto& [section, entries] : raw) {
    if (section.rfind("stage.", 0) != 0) {
      if (!section.empty() && section != "model")
        problems.push_back("unknown section [" + section + "]");
      continue;
    }
    std::string suffix = section.substr(6);
    int idx = 0;
    if (!detail::parse_int(suffix, idx) || idx < 1) {
      problems.push_back("bad stage section [" + section + "]");
      continue;
    }
    max_stage = std::max(max_stage, idx);
  }
  for (int i = 1; i <= max_stage; ++i) {
    std::string section = "stage." + std::to_string(i);
    const auto* entries = section_of(section);
    if (!entries) {
      problems.push_back("missing section [" + section + "] (stages must be contiguous from 1)");
      cfg.stages.emplace_back();
      continue;
    }
    SectionReader sr(section, entries, problems);
    sr.check_known({"language", "train", "dev", "vectors", "max_epochs", "patience", "lr",
                    "batch_size"});
    StageSpec spec;
    spec.language = sr.get_string("language", "", /*required=*/true);
    spec.train_path = sr.get_string("train", "", /*required=*/true);
    spec.dev_path = sr.get_string("dev", "", /*required=*/true);
    spec.vectors_path = sr.get_string("vectors", "", /*required=*/true);
    spec.max_epochs = static_cast<int>(sr.get_int("max_epochs", spec.max_epochs));
    spec.patience = static_cast<int>(sr.get_int("patience", spec.patience));
    spec.lr = sr.get_double("lr", spec.lr);
    spec.batch_size = static_cast<int>(sr.get_int("batch_size", spec.batch_size));
    if (spec.max_epochs < 1) problems.push_back("[" + section + "]: max_epochs must be >= 1");
    if (spec.patience < 1) problems.push_back("[" + section + "]: patience must be >= 1");
    if (spec.batch_size < 1) problems.push_back("[" + section + "]: batch_size must be >= 1");
    if (spec.lr <= 0) problems.push_back("[" + section + "]: lr must be positive");
    cfg.stages.push_back(std::move(spec));
  }

  if (max_stage == 0) problems.push_back("no [stage.N] sections found");
  int expect = stage_count_for(cfg.kind);
  if (max_stage > 0 && max_stage != expect && kind == to_string(cfg.kind))
    problems.push_back("kind " + kind + " needs exactly " + std::to_string(expect) +
                       " stage(s), found " + std::to_string(max_stage));

  // model-shape checks, without requiring vocab-derived fields yet
  try {
    ModelConfig probe = cfg.model;
    probe.num_labels = 1;
    probe.num_upos = 1;
    probe.validate();
  } catch (const ConfigError& e) {
    problems.push_back(std::string("[model]: ") + e.what());
  }

  if (!problems.empty()) {
    std::string msg = "invalid scenario config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  return cfg;
}

inline ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  ScenarioConfig cfg = parse_scenario_config(read_text_file(path));
  // stage data paths are resolved relative to the config file's directory
  auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
  };
  for (auto& s : cfg.stages) {
    resolve(s.train_path);
    resolve(s.dev_path);
    resolve(s.vectors_path);
  }
  resolve(cfg.test_path);
  return cfg;
}

}  // namespace udep
