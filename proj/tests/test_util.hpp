#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "udep/conllu.hpp"
#include "udep/rng.hpp"

namespace testutil {

inline std::filesystem::path repo_root() { return std::filesystem::path(UDEP_REPO_ROOT); }

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto base = std::filesystem::temp_directory_path() / ("udep-" + tag);
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);
  return base;
}

// The 2-token fixture: "Aku mangan", heads (2, 0), rels (nsubj, root).
inline std::string two_token_fixture() {
  return
      "# sent_id = fix-1\n"
      "# text = Aku mangan\n"
      "1\tAku\taku\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
      "2\tmangan\tmangan\tVERB\t_\t_\t0\troot\t_\t_\n"
      "\n";
}

// Random valid tree over n tokens: walk a random permutation and attach each
// token to a node placed earlier, so the result is always a single-root tree.
inline udep::Sentence random_sentence(udep::Rng& rng, int n,
                                      const std::vector<std::string>& deprels = {"dep"}) {
  udep::Sentence s;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i + 1;
  rng.shuffle(order);
  std::vector<int> head(n + 1, 0);
  for (int k = 0; k < n; ++k) {
    if (k == 0) head[order[k]] = 0;
    else head[order[k]] = order[rng.next_below(k)];
  }
  for (int i = 1; i <= n; ++i) {
    udep::Token t;
    t.id = i;
    t.form = "w" + std::to_string(i);
    t.upos = "NOUN";
    t.head = head[i];
    t.deprel = head[i] == 0 ? "root" : deprels[rng.next_below(deprels.size())];
    s.tokens.push_back(t);
  }
  return s;
}

inline udep::Treebank random_treebank(std::uint64_t seed, int n_sentences, int max_len = 8) {
  udep::Rng rng(seed);
  udep::Treebank tb;
  tb.language_code = "xx";
  tb.name = "random";
  for (int i = 0; i < n_sentences; ++i) {
    int n = 1 + static_cast<int>(rng.next_below(max_len));
    tb.sentences.push_back(random_sentence(rng, n));
  }
  return tb;
}

}  // namespace testutil
