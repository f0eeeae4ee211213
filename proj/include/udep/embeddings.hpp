#pragma once

// Static word-vector tables (word2vec/fastText text format), UPOS/label
// vocabularies with order-independent ids, and the encoded-sentence input
// the encoder consumes.

#include <cctype>
#include <filesystem>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "udep/conllu.hpp"
#include "udep/errors.hpp"

namespace udep {

struct EmbeddingTable {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> entries;
  std::vector<double> unk;  // componentwise mean of all loaded vectors
};

namespace detail {

inline bool is_integer_field(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

// word2vec text format: an optional "count dim" header (auto-detected: a
// first line with exactly two integer fields), then "word v1 ... vdim" lines.
// Duplicate words keep their first occurrence.
inline EmbeddingTable parse_vectors(const std::string& text) {
  EmbeddingTable table;
  std::vector<double> sum;
  long loaded = 0;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_ws(line);
    if (first) {
      first = false;
      if (fields.size() == 2 && detail::is_integer_field(fields[0]) &&
          detail::is_integer_field(fields[1])) {
        table.dim = std::stoi(fields[1]);
        continue;  // header line
      }
    }
    if (fields.size() < 2)
      throw ParseError("vector file line " + std::to_string(line_no) + ": no values");
    if (table.dim == 0) table.dim = static_cast<int>(fields.size()) - 1;
    if (static_cast<int>(fields.size()) - 1 != table.dim)
      throw ParseError("vector file line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.dim) + " values, got " +
                       std::to_string(fields.size() - 1));
    const std::string& word = fields[0];
    if (table.entries.count(word)) continue;
    std::vector<double> v(table.dim);
    for (int i = 0; i < table.dim; ++i) {
      try {
        v[i] = std::stod(fields[i + 1]);
      } catch (const std::exception&) {
        throw ParseError("vector file line " + std::to_string(line_no) + ": bad number '" +
                         fields[i + 1] + "'");
      }
    }
    if (sum.empty()) sum.assign(table.dim, 0.0);
    for (int i = 0; i < table.dim; ++i) sum[i] += v[i];
    ++loaded;
    table.entries.emplace(word, std::move(v));
  }
  if (loaded == 0) throw ParseError("vector file contains no vectors");
  table.unk.resize(table.dim);
  for (int i = 0; i < table.dim; ++i) table.unk[i] = sum[i] / static_cast<double>(loaded);
  return table;
}

inline EmbeddingTable load_vectors(const std::filesystem::path& path) {
  return parse_vectors(read_text_file(path));
}

// Exact match, then lowercased match, then the mean vector. Never fails.
inline const std::vector<double>& lookup(const EmbeddingTable& table, const std::string& word) {
  auto it = table.entries.find(word);
  if (it != table.entries.end()) return it->second;
  std::string lower = word;
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower != word) {
    it = table.entries.find(lower);
    if (it != table.entries.end()) return it->second;
  }
  return table.unk;
}

// UPOS and simplified-label ids. Keys are sorted before numbering so the ids
// do not depend on corpus order. Id 0 of the UPOS map is a reserved ROOT tag.
struct Vocab {
  std::map<std::string, int> upos_index;
  std::map<std::string, int> label_index;
  std::vector<std::string> upos_names;
  std::vector<std::string> label_names;

  static constexpr const char* kRootTag = "<root>";

  int num_upos() const { return static_cast<int>(upos_names.size()); }
  int num_labels() const { return static_cast<int>(label_names.size()); }

  int upos_id(const std::string& tag) const {
    auto it = upos_index.find(tag);
    return it == upos_index.end() ? -1 : it->second;
  }
  int label_id(const std::string& label) const {
    auto it = label_index.find(label);
    return it == label_index.end() ? -1 : it->second;
  }
};

// Built over every treebank a scenario touches, so ids stay stable across
// transfer stages. Labels are simplified before indexing.
inline Vocab build_vocab(std::span<const Treebank> treebanks) {
  std::set<std::string> upos;
  std::set<std::string> labels;
  for (const auto& tb : treebanks) {
    for (const auto& s : tb.sentences) {
      for (const auto& t : s.tokens) {
        upos.insert(t.upos);
        labels.insert(simplify_label(t.deprel));
      }
    }
  }
  Vocab v;
  v.upos_index[Vocab::kRootTag] = 0;
  v.upos_names.push_back(Vocab::kRootTag);
  for (const auto& tag : upos) {
    v.upos_index[tag] = static_cast<int>(v.upos_names.size());
    v.upos_names.push_back(tag);
  }
  for (const auto& lab : labels) {
    v.label_index[lab] = static_cast<int>(v.label_names.size());
    v.label_names.push_back(lab);
  }
  return v;
}

inline Vocab build_vocab(std::initializer_list<Treebank> treebanks) {
  return build_vocab(std::span<const Treebank>(treebanks.begin(), treebanks.size()));
}

// Model input for one sentence: looked-up word vectors plus gold annotation,
// all aligned by token order.
struct EncodedSentence {
  int n = 0;
  int word_dim = 0;
  std::vector<double> word_vectors;  // n x word_dim, row-major
  std::vector<int> pos_ids;
  std::vector<int> gold_heads;      // 0 = ROOT
  std::vector<int> gold_label_ids;  // -1 when encoded for prediction only
};

namespace detail {

inline EncodedSentence encode_common(const Sentence& s, const EmbeddingTable& table,
                                     const Vocab& vocab, bool need_labels) {
  EncodedSentence enc;
  enc.n = static_cast<int>(s.tokens.size());
  if (enc.n == 0) throw ContractError("cannot encode an empty sentence");
  enc.word_dim = table.dim;
  enc.word_vectors.reserve(static_cast<std::size_t>(enc.n) * table.dim);
  for (const Token& t : s.tokens) {
    const auto& v = lookup(table, t.form);
    enc.word_vectors.insert(enc.word_vectors.end(), v.begin(), v.end());
    int pid = vocab.upos_id(t.upos);
    if (pid < 0)
      throw ValidationError("token " + std::to_string(t.id) + " ('" + t.form +
                            "'): unknown UPOS tag '" + t.upos + "'");
    enc.pos_ids.push_back(pid);
    enc.gold_heads.push_back(t.head);
    if (need_labels) {
      int lid = vocab.label_id(simplify_label(t.deprel));
      if (lid < 0)
        throw ValidationError("token " + std::to_string(t.id) + " ('" + t.form +
                              "'): unknown label '" + t.deprel + "'");
      enc.gold_label_ids.push_back(lid);
    } else {
      enc.gold_label_ids.push_back(-1);
    }
  }
  return enc;
}

}  // namespace detail

inline EncodedSentence encode_sentence(const Sentence& s, const EmbeddingTable& table,
                                       const Vocab& vocab) {
  return detail::encode_common(s, table, vocab, /*need_labels=*/true);
}

// Prediction-time encoding: gold labels are not required to be in the vocab.
inline EncodedSentence encode_for_prediction(const Sentence& s, const EmbeddingTable& table,
                                             const Vocab& vocab) {
  return detail::encode_common(s, table, vocab, /*need_labels=*/false);
}

}  // namespace udep
