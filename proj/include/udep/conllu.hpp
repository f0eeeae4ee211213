#pragma once

// CoNLL-U treebank reading, writing, validation, label simplification,
// deterministic splitting, and corpus statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "udep/errors.hpp"
#include "udep/rng.hpp"

namespace udep {

// One syntactic word (a CoNLL-U line with an integer ID). All ten columns are
// kept verbatim so a parsed file can be written back byte-for-byte.
struct Token {
  int id = 0;            // 1-based position in the sentence
  std::string form;
  std::string lemma = "_";
  std::string upos = "_";
  std::string xpos = "_";
  std::string feats = "_";
  int head = 0;          // 0 = ROOT
  std::string deprel;
  std::string deps = "_";
  std::string misc = "_";
};

// Multiword-token range lines ("3-4 ...") and empty nodes ("5.1 ...") carry no
// head and are excluded from the token list, but must survive a round trip.
struct RawLine {
  int after_token = 0;   // number of word tokens preceding this line
  std::string text;      // the full line, verbatim
  bool is_mwt_range = false;
  int range_from = 0;
  int range_to = 0;
};

struct Sentence {
  std::vector<std::string> comments;  // '#' lines, verbatim, in order
  std::vector<Token> tokens;
  std::vector<RawLine> raw_lines;

  std::optional<std::string> sent_id() const { return comment_value("sent_id"); }
  std::optional<std::string> text() const { return comment_value("text"); }

  std::optional<std::string> comment_value(const std::string& key) const {
    const std::string prefix = "# " + key + " =";
    for (const auto& c : comments) {
      if (c.rfind(prefix, 0) == 0) {
        std::string v = c.substr(prefix.size());
        if (!v.empty() && v.front() == ' ') v.erase(0, 1);
        return v;
      }
    }
    return std::nullopt;
  }
};

struct Treebank {
  std::vector<Sentence> sentences;
  std::string language_code;
  std::string name;
};

struct TreebankStats {
  long sentence_count = 0;
  long word_count = 0;          // syntactic words (integer-ID lines)
  long unique_word_count = 0;   // distinct surface forms, case-sensitive
  double avg_sentence_length = 0.0;  // surface tokens per sentence; an MWT range counts once
  long upos_count = 0;
  long universal_relation_count = 0;       // deprels without a ':' subtype
  long language_specific_relation_count = 0;  // deprels with a ':' subtype
  long total_relation_count = 0;
};

// Strips the language-specific subtype: "obl:tmod" -> "obl".
inline std::string simplify_label(const std::string& deprel) {
  auto pos = deprel.find(':');
  return pos == std::string::npos ? deprel : deprel.substr(0, pos);
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

inline bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  std::size_t i = 0;
  long v = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
    if (v > 1000000) return false;
  }
  out = static_cast<int>(v);
  return true;
}

// "3-4" (MWT range) or "5.1" (empty node)?
inline bool classify_special_id(const std::string& id, bool& is_range, int& from, int& to) {
  auto dash = id.find('-');
  if (dash != std::string::npos) {
    if (!parse_int(id.substr(0, dash), from) || !parse_int(id.substr(dash + 1), to)) return false;
    is_range = true;
    return true;
  }
  auto dot = id.find('.');
  if (dot != std::string::npos) {
    int a = 0, b = 0;
    if (!parse_int(id.substr(0, dot), a) || !parse_int(id.substr(dot + 1), b)) return false;
    is_range = false;
    return true;
  }
  return false;
}

}  // namespace detail

// Parses CoNLL-U text: 10 tab-separated columns per token line, '#' comments,
// blank line between sentences. Head range is checked here; tree-shape
// validation is a separate step (validate_sentence).
inline Treebank parse_conllu(std::string_view text) {
  Treebank tb;
  Sentence cur;
  bool in_sentence = false;
  long line_no = 0;

  auto finish_sentence = [&]() {
    if (!in_sentence) return;
    int n = static_cast<int>(cur.tokens.size());
    for (const Token& t : cur.tokens) {
      if (t.head > n) {
        std::string which = cur.sent_id().value_or("#" + std::to_string(tb.sentences.size() + 1));
        throw ValidationError("sentence " + which + ": head " + std::to_string(t.head) +
                              " of token " + std::to_string(t.id) + " out of range (n=" +
                              std::to_string(n) + ")");
      }
    }
    tb.sentences.push_back(std::move(cur));
    cur = Sentence();
    in_sentence = false;
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) {
      if (pos == text.size()) break;
      eol = text.size();
    }
    std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;

    if (line.empty()) {
      finish_sentence();
      continue;
    }
    if (line[0] == '#') {
      if (!cur.tokens.empty() || !cur.raw_lines.empty())
        throw ParseError("line " + std::to_string(line_no) + ": comment inside a sentence");
      cur.comments.push_back(line);
      in_sentence = true;
      continue;
    }

    auto cols = detail::split_tabs(line);
    if (cols.size() != 10)
      throw ParseError("line " + std::to_string(line_no) + ": expected 10 tab-separated columns, got " +
                       std::to_string(cols.size()));

    in_sentence = true;
    int id = 0;
    if (!detail::parse_int(cols[0], id)) {
      bool is_range = false;
      int from = 0, to = 0;
      if (!detail::classify_special_id(cols[0], is_range, from, to))
        throw ParseError("line " + std::to_string(line_no) + ": bad token ID '" + cols[0] + "'");
      RawLine raw;
      raw.after_token = static_cast<int>(cur.tokens.size());
      raw.text = line;
      raw.is_mwt_range = is_range;
      raw.range_from = from;
      raw.range_to = to;
      cur.raw_lines.push_back(std::move(raw));
      continue;
    }

    if (id != static_cast<int>(cur.tokens.size()) + 1)
      throw ParseError("line " + std::to_string(line_no) + ": token ID " + std::to_string(id) +
                       " out of sequence (expected " + std::to_string(cur.tokens.size() + 1) + ")");

    Token t;
    t.id = id;
    t.form = cols[1];
    t.lemma = cols[2];
    t.upos = cols[3];
    t.xpos = cols[4];
    t.feats = cols[5];
    if (!detail::parse_int(cols[6], t.head))
      throw ParseError("line " + std::to_string(line_no) + ": non-integer head '" + cols[6] + "'");
    if (cols[7].empty())
      throw ParseError("line " + std::to_string(line_no) + ": empty deprel");
    t.deprel = cols[7];
    t.deps = cols[8];
    t.misc = cols[9];
    cur.tokens.push_back(std::move(t));
  }
  finish_sentence();
  return tb;
}

inline std::string write_conllu_sentence(const Sentence& s) {
  std::string out;
  for (const auto& c : s.comments) {
    out += c;
    out += '\n';
  }
  std::size_t raw_idx = 0;
  auto emit_raws = [&](int after) {
    while (raw_idx < s.raw_lines.size() && s.raw_lines[raw_idx].after_token == after) {
      out += s.raw_lines[raw_idx].text;
      out += '\n';
      ++raw_idx;
    }
  };
  emit_raws(0);
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const Token& t = s.tokens[i];
    out += std::to_string(t.id);
    out += '\t';
    out += t.form;
    out += '\t';
    out += t.lemma;
    out += '\t';
    out += t.upos;
    out += '\t';
    out += t.xpos;
    out += '\t';
    out += t.feats;
    out += '\t';
    out += std::to_string(t.head);
    out += '\t';
    out += t.deprel;
    out += '\t';
    out += t.deps;
    out += '\t';
    out += t.misc;
    out += '\n';
    emit_raws(static_cast<int>(i) + 1);
  }
  out += '\n';
  return out;
}

inline std::string write_conllu(const Treebank& tb) {
  std::string out;
  for (const auto& s : tb.sentences) out += write_conllu_sentence(s);
  return out;
}

// Tree-shape validation: exactly one root, no self-heads, and every token
// reachable from ROOT. Kept separate from parsing so broken fixtures can be
// built in tests.
inline void validate_sentence(const Sentence& s, const std::string& label = "") {
  int n = static_cast<int>(s.tokens.size());
  std::string which = label.empty() ? s.sent_id().value_or("(unnamed)") : label;
  if (n == 0) throw ValidationError("sentence " + which + ": no tokens");
  int roots = 0;
  for (const Token& t : s.tokens) {
    if (t.head < 0 || t.head > n)
      throw ValidationError("sentence " + which + ": head out of range for token " +
                            std::to_string(t.id));
    if (t.head == t.id)
      throw ValidationError("sentence " + which + ": token " + std::to_string(t.id) +
                            " is its own head");
    if (t.head == 0) ++roots;
  }
  if (roots != 1)
    throw ValidationError("sentence " + which + ": expected exactly one root, found " +
                          std::to_string(roots));
  // DFS over child lists from node 0.
  std::vector<std::vector<int>> children(n + 1);
  for (const Token& t : s.tokens) children[t.head].push_back(t.id);
  std::vector<char> seen(n + 1, 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  int reached = 0;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int c : children[v]) {
      if (!seen[c]) {
        seen[c] = 1;
        ++reached;
        stack.push_back(c);
      }
    }
  }
  if (reached != n)
    throw ValidationError("sentence " + which + ": head graph is not a tree (reached " +
                          std::to_string(reached) + " of " + std::to_string(n) + " tokens)");
}

inline void validate_treebank(const Treebank& tb) {
  for (std::size_t i = 0; i < tb.sentences.size(); ++i) {
    const auto& s = tb.sentences[i];
    std::string label = s.sent_id().value_or("#" + std::to_string(i + 1));
    validate_sentence(s, label);
  }
}

// Replaces every deprel with its simplified form.
inline Treebank simplify_labels(Treebank tb) {
  for (auto& s : tb.sentences)
    for (auto& t : s.tokens) t.deprel = simplify_label(t.deprel);
  return tb;
}

// Deterministic three-way split. Dev and test sizes are floored, the
// remainder goes to train. Parts keep the corpus's original sentence order.
inline std::tuple<Treebank, Treebank, Treebank> split_treebank(
    const Treebank& tb, std::tuple<double, double, double> ratios, std::uint64_t seed) {
  auto [r_train, r_dev, r_test] = ratios;
  if (std::fabs(r_train + r_dev + r_test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1.0, got " +
                      std::to_string(r_train + r_dev + r_test));
  if (r_train < 0 || r_dev < 0 || r_test < 0) throw ConfigError("split ratios must be non-negative");
  if (tb.sentences.empty()) throw ConfigError("cannot split an empty treebank");

  long n = static_cast<long>(tb.sentences.size());
  long n_dev = static_cast<long>(std::floor(r_dev * static_cast<double>(n)));
  long n_test = static_cast<long>(std::floor(r_test * static_cast<double>(n)));
  long n_train = n - n_dev - n_test;

  std::vector<long> perm(n);
  for (long i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);

  std::vector<int> part(n, 0);
  for (long i = 0; i < n; ++i) {
    if (i < n_train) part[perm[i]] = 0;
    else if (i < n_train + n_dev) part[perm[i]] = 1;
    else part[perm[i]] = 2;
  }

  Treebank train{{}, tb.language_code, tb.name + "-train"};
  Treebank dev{{}, tb.language_code, tb.name + "-dev"};
  Treebank test{{}, tb.language_code, tb.name + "-test"};
  for (long i = 0; i < n; ++i) {
    if (part[i] == 0) train.sentences.push_back(tb.sentences[i]);
    else if (part[i] == 1) dev.sentences.push_back(tb.sentences[i]);
    else test.sentences.push_back(tb.sentences[i]);
  }
  return {std::move(train), std::move(dev), std::move(test)};
}

inline TreebankStats treebank_stats(const Treebank& tb) {
  TreebankStats st;
  st.sentence_count = static_cast<long>(tb.sentences.size());
  std::set<std::string> forms;
  std::set<std::string> upos;
  std::set<std::string> rels;
  long surface_tokens = 0;
  for (const auto& s : tb.sentences) {
    st.word_count += static_cast<long>(s.tokens.size());
    // Words covered by an MWT range collapse to one surface token.
    long covered = 0, ranges = 0;
    for (const auto& r : s.raw_lines) {
      if (r.is_mwt_range && r.range_to >= r.range_from) {
        covered += r.range_to - r.range_from + 1;
        ++ranges;
      }
    }
    surface_tokens += static_cast<long>(s.tokens.size()) - covered + ranges;
    for (const auto& t : s.tokens) {
      forms.insert(t.form);
      upos.insert(t.upos);
      rels.insert(t.deprel);
    }
  }
  st.unique_word_count = static_cast<long>(forms.size());
  st.upos_count = static_cast<long>(upos.size());
  for (const auto& r : rels) {
    if (r.find(':') == std::string::npos) ++st.universal_relation_count;
    else ++st.language_specific_relation_count;
  }
  st.total_relation_count = st.universal_relation_count + st.language_specific_relation_count;
  if (st.sentence_count > 0)
    st.avg_sentence_length =
        static_cast<double>(surface_tokens) / static_cast<double>(st.sentence_count);
  return st;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

// Loads and names a treebank from disk. Tree validation is the caller's call.
inline Treebank load_treebank(const std::filesystem::path& path) {
  Treebank tb = parse_conllu(read_text_file(path));
  tb.name = path.stem().string();
  return tb;
}

}  // namespace udep
