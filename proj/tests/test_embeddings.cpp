#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "udep/embeddings.hpp"

using namespace udep;

TEST_CASE("parse_vectors reads header and computes the mean unk vector") {
  std::string text =
      "2 3\n"
      "abc 1.0 2.0 3.0\n"
      "def 3.0 4.0 7.0\n";
  EmbeddingTable t = parse_vectors(text);
  CHECK(t.dim == 3);
  CHECK(t.entries.size() == 2);
  CHECK(t.unk == std::vector<double>{2.0, 3.0, 5.0});
}

TEST_CASE("parse_vectors with one vector: unk equals it") {
  EmbeddingTable t = parse_vectors("1 3\nsolo 0.5 -1.0 2.5\n");
  CHECK(t.unk == std::vector<double>{0.5, -1.0, 2.5});
}

TEST_CASE("parse_vectors without a header infers the dimension") {
  EmbeddingTable t = parse_vectors("abc 1 2\ndef 3 4\n");
  CHECK(t.dim == 2);
  CHECK(t.entries.size() == 2);
}

TEST_CASE("parse_vectors reports dimension mismatches with line numbers") {
  std::string text =
      "2 3\n"
      "abc 1.0 2.0 3.0\n"
      "bad 1.0 2.0\n";
  CHECK_THROWS_MATCHES(parse_vectors(text), ParseError,
                       Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("line 3")));
}

TEST_CASE("parse_vectors keeps the first occurrence of a duplicate word") {
  EmbeddingTable t = parse_vectors("dup 1 1\ndup 9 9\n");
  CHECK(t.entries.at("dup") == std::vector<double>{1.0, 1.0});
  // unk averages only stored vectors
  CHECK(t.unk == std::vector<double>{1.0, 1.0});
}

TEST_CASE("lookup falls back to lowercase and then unk") {
  EmbeddingTable t = parse_vectors("mangan 1 2\nAku 3 4\n");
  CHECK(lookup(t, "mangan") == std::vector<double>{1.0, 2.0});
  CHECK(lookup(t, "Mangan") == std::vector<double>{1.0, 2.0});
  CHECK(lookup(t, "absent") == t.unk);
  CHECK(lookup(t, "Aku") == std::vector<double>{3.0, 4.0});
}

TEST_CASE("lookup always returns a vector of length dim") {
  EmbeddingTable t = parse_vectors("a 1 2 3\n");
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    std::string w;
    for (int j = 0; j < 1 + static_cast<int>(rng.next_below(6)); ++j)
      w += static_cast<char>('a' + rng.next_below(26));
    CHECK(lookup(t, w).size() == 3);
  }
}

TEST_CASE("build_vocab covers observed tags plus the reserved ROOT tag") {
  Treebank tb = parse_conllu(testutil::two_token_fixture());
  Vocab v = build_vocab({tb});
  CHECK(v.num_upos() == 3);  // <root>, PRON, VERB
  CHECK(v.upos_id(Vocab::kRootTag) == 0);
  CHECK(v.num_labels() == 2);  // nsubj, root
  CHECK(v.label_id("nsubj") >= 0);
}

TEST_CASE("build_vocab over an empty list has only the ROOT tag") {
  Vocab v = build_vocab(std::span<const Treebank>{});
  CHECK(v.num_upos() == 1);
  CHECK(v.num_labels() == 0);
}

TEST_CASE("build_vocab unions label sets across treebanks") {
  std::string jv =
      "1\ta\t_\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
      "2\tb\t_\tVERB\t_\t_\t0\troot\t_\t_\n\n";
  std::string id =
      "1\tc\t_\tADJ\t_\t_\t2\tamod\t_\t_\n"
      "2\td\t_\tNOUN\t_\t_\t0\troot\t_\t_\n\n";
  Vocab v = build_vocab({parse_conllu(jv), parse_conllu(id)});
  CHECK(v.num_labels() == 3);  // amod, nsubj, root
  CHECK(v.label_id("amod") == 0);
  CHECK(v.label_id("nsubj") == 1);
  CHECK(v.label_id("root") == 2);
}

TEST_CASE("build_vocab on the full-size corpus matches the published inventories") {
  Treebank tb = load_treebank(testutil::repo_root() / "data" / "jv" / "jv_csui-ud-standin.conllu");
  Vocab v = build_vocab({tb});
  CHECK(v.num_upos() == 18);    // 17 observed tags plus the reserved ROOT tag
  CHECK(v.num_labels() == 32);  // 46 relation types collapse to 32 after simplification
}

TEST_CASE("build_vocab is order-independent") {
  Treebank a = testutil::random_treebank(31, 20);
  Treebank b = testutil::random_treebank(32, 20);
  std::vector<Treebank> fwd = {a, b};
  std::vector<Treebank> rev = {b, a};
  Vocab v1 = build_vocab(fwd);
  Vocab v2 = build_vocab(rev);
  CHECK(v1.upos_index == v2.upos_index);
  CHECK(v1.label_index == v2.label_index);
}

TEST_CASE("encode_sentence aligns vectors, tags, heads, and labels") {
  Treebank tb = parse_conllu(testutil::two_token_fixture());
  EmbeddingTable t = parse_vectors("aku 1 0\nmangan 0 1\n");
  Vocab v = build_vocab({tb});
  EncodedSentence enc = encode_sentence(tb.sentences[0], t, v);
  CHECK(enc.n == 2);
  CHECK(enc.word_dim == 2);
  // "Aku" hits via lowercase fallback
  CHECK(enc.word_vectors == std::vector<double>{1, 0, 0, 1});
  CHECK(enc.gold_heads == std::vector<int>{2, 0});
  CHECK(enc.pos_ids.size() == 2);
  CHECK(enc.gold_label_ids == std::vector<int>{v.label_id("nsubj"), v.label_id("root")});
}

TEST_CASE("encode_sentence: single token and OOV cases") {
  std::string one = "1\tzzz\t_\tNOUN\t_\t_\t0\troot\t_\t_\n\n";
  Treebank tb = parse_conllu(one);
  EmbeddingTable t = parse_vectors("other 5 5 5\n");
  Vocab v = build_vocab({tb});
  EncodedSentence enc = encode_sentence(tb.sentences[0], t, v);
  CHECK(enc.n == 1);
  CHECK(enc.gold_heads == std::vector<int>{0});
  CHECK(enc.word_vectors == t.unk);  // OOV row is the unk vector
}

TEST_CASE("encode_sentence rejects tags and labels missing from the vocab") {
  Treebank tb = parse_conllu(testutil::two_token_fixture());
  EmbeddingTable t = parse_vectors("x 1 1\n");
  Vocab empty = build_vocab(std::span<const Treebank>{});
  CHECK_THROWS_MATCHES(encode_sentence(tb.sentences[0], t, empty), ValidationError,
                       Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("token 1")));
  // prediction-time encoding still needs UPOS but not labels
  Treebank labelless = tb;
  labelless.sentences[0].tokens[0].deprel = "never-seen";
  Vocab v = build_vocab({tb});
  CHECK_NOTHROW(encode_for_prediction(labelless.sentences[0], t, v));
  CHECK_THROWS_AS(encode_sentence(labelless.sentences[0], t, v), ValidationError);
}

TEST_CASE("encode_sentence output lengths match the token count") {
  Rng rng(77);
  EmbeddingTable t = parse_vectors("w1 1 2\nw2 3 4\nw3 5 6\n");
  for (int i = 0; i < 30; ++i) {
    int n = 1 + static_cast<int>(rng.next_below(10));
    Sentence s = testutil::random_sentence(rng, n);
    Treebank tb;
    tb.sentences.push_back(s);
    Vocab v = build_vocab({tb});
    EncodedSentence enc = encode_sentence(s, t, v);
    CHECK(enc.pos_ids.size() == static_cast<std::size_t>(n));
    CHECK(enc.gold_heads.size() == static_cast<std::size_t>(n));
    CHECK(enc.gold_label_ids.size() == static_cast<std::size_t>(n));
    CHECK(enc.word_vectors.size() == static_cast<std::size_t>(n) * 2);
  }
}
