#pragma once

// Attachment scoring (UAS/LAS with binomial margins of error) and
// gold-vs-predicted label confusion counts.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "udep/conllu.hpp"
#include "udep/errors.hpp"

namespace udep {

struct EvalReport {
  double uas = 0;
  double las = 0;
  double uas_moe = 0;
  double las_moe = 0;
  long n_words = 0;
  long n_sentences = 0;
};

struct ConfusionEntry {
  std::string gold;
  std::string predicted;
  long count = 0;
};

// Half-width of the normal-approximation confidence interval for a
// proportion: z * sqrt(p (1 - p) / n).
inline double margin_of_error(double p, long n, double z = 1.96) {
  if (p < 0.0 || p > 1.0) throw ContractError("margin_of_error: p must be in [0,1]");
  if (n < 1) throw ContractError("margin_of_error: n must be >= 1");
  return z * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

namespace detail {

inline void check_aligned(const Treebank& gold, const Treebank& pred) {
  if (gold.sentences.size() != pred.sentences.size())
    throw AlignmentError("gold has " + std::to_string(gold.sentences.size()) +
                         " sentences, predictions have " + std::to_string(pred.sentences.size()));
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    if (gold.sentences[i].tokens.size() != pred.sentences[i].tokens.size())
      throw AlignmentError("sentence " +
                           gold.sentences[i].sent_id().value_or("#" + std::to_string(i + 1)) +
                           ": token counts differ (" +
                           std::to_string(gold.sentences[i].tokens.size()) + " vs " +
                           std::to_string(pred.sentences[i].tokens.size()) + ")");
  }
}

}  // namespace detail

// Every token is scored, punctuation included. Labels are compared after
// subtype stripping on both sides.
inline EvalReport attachment_scores(const Treebank& gold, const Treebank& pred, double z = 1.96) {
  detail::check_aligned(gold, pred);
  EvalReport r;
  long correct_heads = 0, correct_both = 0;
  r.n_sentences = static_cast<long>(gold.sentences.size());
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    const auto& gt = gold.sentences[i].tokens;
    const auto& pt = pred.sentences[i].tokens;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      ++r.n_words;
      if (gt[j].head == pt[j].head) {
        ++correct_heads;
        if (simplify_label(gt[j].deprel) == simplify_label(pt[j].deprel)) ++correct_both;
      }
    }
  }
  if (r.n_words == 0) throw AlignmentError("no tokens to score");
  r.uas = static_cast<double>(correct_heads) / static_cast<double>(r.n_words);
  r.las = static_cast<double>(correct_both) / static_cast<double>(r.n_words);
  r.uas_moe = margin_of_error(r.uas, r.n_words, z);
  r.las_moe = margin_of_error(r.las, r.n_words, z);
  return r;
}

// Counts (gold label, predicted label) pairs over all tokens whose simplified
// labels differ, regardless of head correctness. Top k by count, ties by
// label pair.
inline std::vector<ConfusionEntry> label_confusion(const Treebank& gold, const Treebank& pred,
                                                   int k) {
  detail::check_aligned(gold, pred);
  std::map<std::pair<std::string, std::string>, long> counts;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    const auto& gt = gold.sentences[i].tokens;
    const auto& pt = pred.sentences[i].tokens;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      std::string g = simplify_label(gt[j].deprel);
      std::string p = simplify_label(pt[j].deprel);
      if (g != p) ++counts[{g, p}];
    }
  }
  std::vector<ConfusionEntry> out;
  for (const auto& [pair, c] : counts) out.push_back({pair.first, pair.second, c});
  std::sort(out.begin(), out.end(), [](const ConfusionEntry& a, const ConfusionEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.gold != b.gold) return a.gold < b.gold;
    return a.predicted < b.predicted;
  });
  if (k >= 0 && static_cast<int>(out.size()) > k) out.resize(k);
  return out;
}

}  // namespace udep
