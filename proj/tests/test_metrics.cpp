#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "udep/metrics.hpp"

using namespace udep;

namespace {

Treebank make_tb(const std::string& text) { return parse_conllu(text); }

// 3-token fixture: gold heads (2, 0, 2), labels (nsubj, root, obj)
const char* kGold3 =
    "1\ta\t_\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
    "2\tb\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
    "3\tc\t_\tNOUN\t_\t_\t2\tobj\t_\t_\n\n";

}  // namespace

TEST_CASE("perfect prediction scores 1.0 with zero margin") {
  Treebank gold = make_tb(kGold3);
  EvalReport r = attachment_scores(gold, gold);
  CHECK(r.uas == 1.0);
  CHECK(r.las == 1.0);
  CHECK(r.uas_moe == 0.0);
  CHECK(r.las_moe == 0.0);
  CHECK(r.n_words == 3);
  CHECK(r.n_sentences == 1);
}

TEST_CASE("hand-counted partial credit") {
  Treebank gold = make_tb(kGold3);
  // token 1: head wrong; token 2: head right, label right; token 3: head
  // right, label wrong -> UAS 2/3, LAS 1/3
  Treebank pred = make_tb(
      "1\ta\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
      "2\tb\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "3\tc\t_\tNOUN\t_\t_\t2\tobl\t_\t_\n\n");
  EvalReport r = attachment_scores(gold, pred);
  CHECK(r.uas == Catch::Approx(2.0 / 3.0));
  CHECK(r.las == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("labels are compared after subtype stripping") {
  Treebank gold = make_tb(
      "1\ta\t_\tNOUN\t_\t_\t2\tobl:tmod\t_\t_\n"
      "2\tb\t_\tVERB\t_\t_\t0\troot\t_\t_\n\n");
  Treebank pred = make_tb(
      "1\ta\t_\tNOUN\t_\t_\t2\tobl\t_\t_\n"
      "2\tb\t_\tVERB\t_\t_\t0\troot\t_\t_\n\n");
  EvalReport r = attachment_scores(gold, pred);
  CHECK(r.las == 1.0);
}

TEST_CASE("alignment mismatches name the offending sentence") {
  Treebank gold = make_tb(kGold3);
  Treebank shorter = make_tb(
      "# sent_id = s1\n"
      "1\ta\t_\tNOUN\t_\t_\t0\troot\t_\t_\n\n");
  CHECK_THROWS_AS(attachment_scores(gold, shorter), AlignmentError);
  Treebank two = gold;
  two.sentences.push_back(gold.sentences[0]);
  CHECK_THROWS_AS(attachment_scores(gold, two), AlignmentError);
}

TEST_CASE("margin_of_error reproduces hand arithmetic and published margins") {
  CHECK(margin_of_error(0.0, 50) == 0.0);
  CHECK(margin_of_error(1.0, 50) == 0.0);
  CHECK(margin_of_error(0.5, 100, 1.96) == Catch::Approx(0.098));
  // published example rows: 75.87 +- 2.21 and 84.80 +- 1.85 at n = 1434
  CHECK(margin_of_error(0.7587, 1434) == Catch::Approx(0.0221).margin(0.0002));
  CHECK(margin_of_error(0.848, 1434) == Catch::Approx(0.0186).margin(0.0002));
  CHECK_THROWS_AS(margin_of_error(1.5, 10), ContractError);
  CHECK_THROWS_AS(margin_of_error(0.5, 0), ContractError);
}

TEST_CASE("margin_of_error peaks at one half and shrinks with n") {
  for (double p : {0.1, 0.3, 0.49}) CHECK(margin_of_error(p, 200) < margin_of_error(0.5, 200));
  for (long n : {10L, 100L, 1000L}) CHECK(margin_of_error(0.3, n * 10) < margin_of_error(0.3, n));
}

TEST_CASE("las never exceeds uas on randomized predictions") {
  Rng rng(404);
  for (int trial = 0; trial < 30; ++trial) {
    Treebank gold = testutil::random_treebank(trial + 1, 10);
    Treebank pred = gold;
    for (auto& s : pred.sentences) {
      int n = static_cast<int>(s.tokens.size());
      for (auto& t : s.tokens) {
        if (rng.next_double() < 0.4) {
          int h = static_cast<int>(rng.next_below(n + 1));
          if (h != t.id) t.head = h;
        }
        if (rng.next_double() < 0.4) t.deprel = "dep" + std::to_string(rng.next_below(4));
      }
    }
    EvalReport r = attachment_scores(gold, pred);
    CHECK(r.las <= r.uas);
  }
}

TEST_CASE("attachment_scores ignores sentence order permutations") {
  Treebank gold = testutil::random_treebank(9, 20);
  Treebank pred = gold;
  for (auto& s : pred.sentences)
    for (auto& t : s.tokens)
      if (t.head == 0) t.deprel = "root";  // keep valid but tweak nothing else
  EvalReport direct = attachment_scores(gold, pred);

  Treebank gold_rev = gold, pred_rev = pred;
  std::reverse(gold_rev.sentences.begin(), gold_rev.sentences.end());
  std::reverse(pred_rev.sentences.begin(), pred_rev.sentences.end());
  EvalReport reversed = attachment_scores(gold_rev, pred_rev);
  CHECK(direct.uas == reversed.uas);
  CHECK(direct.las == reversed.las);
  CHECK(direct.n_words == reversed.n_words);
}

TEST_CASE("label_confusion counts mismatches and ranks them") {
  SECTION("perfect prediction yields an empty table") {
    Treebank gold = make_tb(kGold3);
    CHECK(label_confusion(gold, gold, 10).empty());
  }
  SECTION("hand-built confusions sort by count then pair") {
    std::string gold_text, pred_text;
    auto add = [](std::string& out, int id, const std::string& rel, int head) {
      out += std::to_string(id) + "\tw" + std::to_string(id) + "\t_\tNOUN\t_\t_\t" +
             std::to_string(head) + "\t" + rel + "\t_\t_\n";
    };
    // 5 tokens: 3x obl->obj, 1x nmod->flat, plus the root
    add(gold_text, 1, "obl", 5);
    add(pred_text, 1, "obj", 5);
    add(gold_text, 2, "obl", 5);
    add(pred_text, 2, "obj", 5);
    add(gold_text, 3, "obl", 5);
    add(pred_text, 3, "obj", 5);
    add(gold_text, 4, "nmod", 5);
    add(pred_text, 4, "flat", 5);
    add(gold_text, 5, "root", 0);
    add(pred_text, 5, "root", 0);
    gold_text += "\n";
    pred_text += "\n";
    auto table = label_confusion(make_tb(gold_text), make_tb(pred_text), 10);
    REQUIRE(table.size() == 2);
    CHECK(table[0].gold == "obl");
    CHECK(table[0].predicted == "obj");
    CHECK(table[0].count == 3);
    CHECK(table[1].gold == "nmod");
    CHECK(table[1].predicted == "flat");
    CHECK(table[1].count == 1);

    auto top1 = label_confusion(make_tb(gold_text), make_tb(pred_text), 1);
    CHECK(top1.size() == 1);
  }
  SECTION("published-shape fixture: ten pairs led by (obl, obj, 17)") {
    // mirrors the shape of a published from-scratch error table
    std::vector<std::tuple<std::string, std::string, int>> pairs = {
        {"obl", "obj", 17}, {"obl", "nsubj", 7}, {"obj", "obl", 7},  {"advcl", "xcomp", 5},
        {"nmod", "flat", 4}, {"xcomp", "advcl", 4}, {"nmod", "obl", 3}, {"nsubj", "obj", 3},
        {"xcomp", "obl", 3}, {"obj", "nsubj", 2}};
    std::string gold_text, pred_text;
    for (const auto& [g, p, c] : pairs)
      for (int k = 0; k < c; ++k) {
        gold_text += "1\tw\t_\tNOUN\t_\t_\t0\t" + g + "\t_\t_\n\n";
        pred_text += "1\tw\t_\tNOUN\t_\t_\t0\t" + p + "\t_\t_\n\n";
      }
    auto table = label_confusion(parse_conllu(gold_text), parse_conllu(pred_text), 10);
    REQUIRE(table.size() == 10);
    CHECK(table[0].gold == "obl");
    CHECK(table[0].predicted == "obj");
    CHECK(table[0].count == 17);
    for (std::size_t i = 1; i < table.size(); ++i) CHECK(table[i].count <= table[i - 1].count);
  }
  SECTION("confusion counts sum to the number of label mismatches") {
    Rng rng(55);
    Treebank gold = testutil::random_treebank(77, 15);
    Treebank pred = gold;
    long mismatches = 0;
    for (auto& s : pred.sentences)
      for (auto& t : s.tokens)
        if (rng.next_double() < 0.3) {
          std::string nl = "alt" + std::to_string(rng.next_below(3));
          if (simplify_label(nl) != simplify_label(t.deprel)) ++mismatches;
          t.deprel = nl;
        }
    auto table = label_confusion(gold, pred, -1);
    long total = 0;
    for (const auto& e : table) total += e.count;
    CHECK(total == mismatches);
  }
}
