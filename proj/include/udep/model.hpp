#pragma once

// The parser model: a self-attention encoder with clipped relative positional
// representations over concatenated word+POS inputs, followed by two biaffine
// heads. One produces the (n+1)x(n+1) arc score matrix (ROOT at index 0), the
// other scores labels for each dependent at its assigned head. Word vectors
// are inputs, never parameters; a learned projection maps them into the
// model, which is what keeps every trainable tensor transferable across
// languages.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "udep/autodiff.hpp"
#include "udep/decoder.hpp"
#include "udep/embeddings.hpp"
#include "udep/errors.hpp"
#include "udep/optim.hpp"
#include "udep/rng.hpp"

namespace udep {

struct ModelConfig {
  int word_dim = 300;
  int pos_dim = 32;
  int d_model = 128;
  int num_layers = 4;
  int num_heads = 8;
  int ffn_dim = 256;
  int arc_mlp_dim = 128;
  int label_mlp_dim = 64;
  double dropout_p = 0.2;
  int rel_pos_clip = 8;
  int num_labels = 0;  // filled from the vocab
  int num_upos = 0;    // filled from the vocab, reserved ROOT tag included

  int head_dim() const { return d_model / num_heads; }

  void validate() const {
    if (num_heads < 1 || d_model < 1 || d_model % num_heads != 0)
      throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by num_heads (" +
                        std::to_string(num_heads) + ")");
    if (word_dim < 1 || pos_dim < 1 || num_layers < 1 || ffn_dim < 1 || arc_mlp_dim < 1 ||
        label_mlp_dim < 1)
      throw ConfigError("model dimensions must be >= 1");
    if (pos_dim >= d_model) throw ConfigError("pos_dim must be smaller than d_model");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (rel_pos_clip < 0) throw ConfigError("rel_pos_clip must be >= 0");
    if (num_labels < 1 || num_upos < 1) throw ConfigError("num_labels and num_upos must be set from a vocab");
  }
};

// Arc scores (head index x dependent index, -1e18 on the diagonal) and label
// scores (label x dependent) for one sentence, plus the heads the label
// scorer was conditioned on: gold in training, decoded at inference.
struct ScoreMatrices {
  ad::Tensor arc_scores;
  ad::Tensor label_scores;
  std::vector<int> heads_used;
};

// Finite stand-in for -infinity: softmax maps it to an exact zero without
// producing NaNs.
inline constexpr double kNegInf = -1e18;

namespace detail_model {

inline ad::Tensor linear_init(Rng& rng, int rows, int cols) {
  double bound = std::sqrt(6.0 / (rows + cols));
  ad::Tensor t(rows, cols);
  for (auto& e : t.v) e = rng.uniform(-bound, bound);
  t.requires_grad = true;
  return t;
}

inline ad::Tensor embed_init(Rng& rng, int rows, int cols) {
  ad::Tensor t(rows, cols);
  for (auto& e : t.v) e = rng.normal(0.0, 0.02);
  t.requires_grad = true;
  return t;
}

inline ad::Tensor zeros_param(int rows, int cols) {
  ad::Tensor t(rows, cols);
  t.requires_grad = true;
  return t;
}

inline ad::Tensor ones_param(int rows, int cols) {
  ad::Tensor t = ad::Tensor::full(rows, cols, 1.0);
  t.requires_grad = true;
  return t;
}

}  // namespace detail_model

// Deterministic initialization: linear weights uniform over
// +-sqrt(6/(fan_in+fan_out)), biases zero, norm gains one, embedding-style
// tables normal(0, 0.02). Parameters are created in a fixed order so a given
// (config, seed) pair always yields bit-identical stores.
inline ParamStore init_model(const ModelConfig& cfg, std::uint64_t seed) {
  using namespace detail_model;
  cfg.validate();
  Rng rng(seed);
  ParamStore p;
  int dm = cfg.d_model, dh = cfg.head_dim(), proj_dim = cfg.d_model - cfg.pos_dim;
  int rel_rows = 2 * cfg.rel_pos_clip + 1;

  p["input.proj.weight"] = linear_init(rng, cfg.word_dim, proj_dim);
  p["input.proj.bias"] = zeros_param(1, proj_dim);
  p["input.pos_embed"] = embed_init(rng, cfg.num_upos, cfg.pos_dim);
  p["input.root"] = embed_init(rng, 1, dm);

  for (int l = 0; l < cfg.num_layers; ++l) {
    std::string base = "enc.L" + std::to_string(l) + ".";
    for (int h = 0; h < cfg.num_heads; ++h) {
      std::string hb = base + "attn.h" + std::to_string(h) + ".";
      p[hb + "wq"] = linear_init(rng, dm, dh);
      p[hb + "bq"] = zeros_param(1, dh);
      p[hb + "wk"] = linear_init(rng, dm, dh);
      p[hb + "bk"] = zeros_param(1, dh);
      p[hb + "wv"] = linear_init(rng, dm, dh);
      p[hb + "bv"] = zeros_param(1, dh);
    }
    p[base + "attn.rel_keys"] = embed_init(rng, rel_rows, dh);
    p[base + "attn.rel_values"] = embed_init(rng, rel_rows, dh);
    p[base + "attn.out.weight"] = linear_init(rng, dm, dm);
    p[base + "attn.out.bias"] = zeros_param(1, dm);
    p[base + "norm1.gain"] = ones_param(1, dm);
    p[base + "norm1.bias"] = zeros_param(1, dm);
    p[base + "ffn.w1"] = linear_init(rng, dm, cfg.ffn_dim);
    p[base + "ffn.b1"] = zeros_param(1, cfg.ffn_dim);
    p[base + "ffn.w2"] = linear_init(rng, cfg.ffn_dim, dm);
    p[base + "ffn.b2"] = zeros_param(1, dm);
    p[base + "norm2.gain"] = ones_param(1, dm);
    p[base + "norm2.bias"] = zeros_param(1, dm);
  }

  p["arc.head_mlp.weight"] = linear_init(rng, dm, cfg.arc_mlp_dim);
  p["arc.head_mlp.bias"] = zeros_param(1, cfg.arc_mlp_dim);
  p["arc.dep_mlp.weight"] = linear_init(rng, dm, cfg.arc_mlp_dim);
  p["arc.dep_mlp.bias"] = zeros_param(1, cfg.arc_mlp_dim);
  p["arc.bilinear"] = linear_init(rng, cfg.arc_mlp_dim, cfg.arc_mlp_dim);
  p["arc.head_bias"] = linear_init(rng, cfg.arc_mlp_dim, 1);

  p["label.head_mlp.weight"] = linear_init(rng, dm, cfg.label_mlp_dim);
  p["label.head_mlp.bias"] = zeros_param(1, cfg.label_mlp_dim);
  p["label.dep_mlp.weight"] = linear_init(rng, dm, cfg.label_mlp_dim);
  p["label.dep_mlp.bias"] = zeros_param(1, cfg.label_mlp_dim);
  p["label.bilinear"] = linear_init(rng, cfg.num_labels * cfg.label_mlp_dim, cfg.label_mlp_dim);
  p["label.head_weight"] = linear_init(rng, cfg.num_labels, cfg.label_mlp_dim);
  p["label.dep_weight"] = linear_init(rng, cfg.num_labels, cfg.label_mlp_dim);
  p["label.bias"] = zeros_param(1, cfg.num_labels);
  return p;
}

inline long param_count(const ParamStore& p) {
  long total = 0;
  for (const auto& [name, t] : p) total += t.numel();
  return total;
}

// One tape shared by parameter leaves and any number of sentence graphs, so
// batched losses backpropagate into a single gradient read-out.
class ModelRun {
 public:
  ModelRun(const ParamStore& params, const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    for (const auto& [name, t] : params) leaves_[name] = tape_.leaf(t);
  }

  ad::Tape& tape() { return tape_; }

  struct SentenceScores {
    ad::Var arc_scores;
    ad::Var label_scores;
    std::vector<int> heads_used;
  };

  // Builds the full forward graph for one sentence. In train mode the label
  // scorer is conditioned on gold heads and dropout is active (seeded per
  // call); otherwise heads are decoded from the arc scores first.
  SentenceScores score(const EncodedSentence& enc, bool train_mode,
                       std::uint64_t dropout_seed = 0,
                       const std::vector<int>* heads_override = nullptr) {
    if (enc.n < 1) throw ContractError("score: empty sentence");
    if (enc.word_dim != cfg_.word_dim)
      throw ShapeError("word vectors have dim " + std::to_string(enc.word_dim) +
                       " but the model expects " + std::to_string(cfg_.word_dim));
    ad::Tape& t = tape_;
    const int n = enc.n;
    const int m = n + 1;
    const int dh = cfg_.head_dim();
    dropout_calls_ = 0;
    const double p = train_mode ? cfg_.dropout_p : 0.0;
    auto drop = [&](ad::Var x) {
      if (p == 0.0) return x;
      return t.dropout(x, p, derive_seed(dropout_seed, ++dropout_calls_));
    };

    ad::Tensor words(n, cfg_.word_dim, enc.word_vectors);
    ad::Var proj = t.add(t.matmul(t.constant(std::move(words)), leaf("input.proj.weight")),
                         leaf("input.proj.bias"));
    ad::Var pos = t.gather_rows(leaf("input.pos_embed"), enc.pos_ids);
    ad::Var h = t.concat_rows(leaf("input.root"), t.concat_cols(proj, pos));
    h = drop(h);

    for (int l = 0; l < cfg_.num_layers; ++l) {
      std::string base = "enc.L" + std::to_string(l) + ".";
      ad::Var heads_cat;
      for (int hd = 0; hd < cfg_.num_heads; ++hd) {
        std::string hb = base + "attn.h" + std::to_string(hd) + ".";
        ad::Var q = t.add(t.matmul(h, leaf(hb + "wq")), leaf(hb + "bq"));
        ad::Var k = t.add(t.matmul(h, leaf(hb + "wk")), leaf(hb + "bk"));
        ad::Var v = t.add(t.matmul(h, leaf(hb + "wv")), leaf(hb + "bv"));
        ad::Var logits = t.add(t.matmul(q, t.transpose(k)),
                               t.rel_attn_bias(q, leaf(base + "attn.rel_keys"), cfg_.rel_pos_clip));
        logits = t.scale(logits, 1.0 / std::sqrt(static_cast<double>(dh)));
        ad::Var probs = drop(t.softmax_rows(logits));
        ad::Var ctx = t.add(t.matmul(probs, v),
                            t.rel_attn_values(probs, leaf(base + "attn.rel_values"), cfg_.rel_pos_clip));
        heads_cat = (hd == 0) ? ctx : t.concat_cols(heads_cat, ctx);
      }
      ad::Var attn = t.add(t.matmul(heads_cat, leaf(base + "attn.out.weight")),
                           leaf(base + "attn.out.bias"));
      h = norm(t.add(h, drop(attn)), base + "norm1");
      ad::Var ff = t.add(t.matmul(t.relu(t.add(t.matmul(h, leaf(base + "ffn.w1")), leaf(base + "ffn.b1"))),
                                  leaf(base + "ffn.w2")),
                         leaf(base + "ffn.b2"));
      h = norm(t.add(h, drop(ff)), base + "norm2");
    }

    ad::Var arc_head = drop(t.relu(t.add(t.matmul(h, leaf("arc.head_mlp.weight")), leaf("arc.head_mlp.bias"))));
    ad::Var arc_dep = drop(t.relu(t.add(t.matmul(h, leaf("arc.dep_mlp.weight")), leaf("arc.dep_mlp.bias"))));
    ad::Var arcs = t.add(t.matmul(t.matmul(arc_head, leaf("arc.bilinear")), t.transpose(arc_dep)),
                         t.matmul(arc_head, leaf("arc.head_bias")));
    ad::Tensor mask(m, m);
    for (int i = 0; i < m; ++i) mask.at(i, i) = kNegInf;
    arcs = t.add(arcs, t.constant(std::move(mask)));

    SentenceScores out;
    out.arc_scores = arcs;
    if (heads_override != nullptr) {
      out.heads_used = *heads_override;
    } else if (train_mode) {
      out.heads_used = enc.gold_heads;
    } else {
      out.heads_used = decode_heads(ArcGraph::from_scores(t.val(arcs)));
    }
    if (static_cast<int>(out.heads_used.size()) != n)
      throw ContractError("score: conditioning heads length mismatch");

    ad::Var lab_head = drop(t.relu(t.add(t.matmul(h, leaf("label.head_mlp.weight")), leaf("label.head_mlp.bias"))));
    ad::Var lab_dep = drop(t.relu(t.add(t.matmul(h, leaf("label.dep_mlp.weight")), leaf("label.dep_mlp.bias"))));
    std::vector<int> dep_ids(n);
    for (int j = 0; j < n; ++j) dep_ids[j] = j + 1;
    ad::Var head_repr = t.gather_rows(lab_head, out.heads_used);
    ad::Var dep_repr = t.gather_rows(lab_dep, dep_ids);
    out.label_scores = t.label_biaffine(head_repr, dep_repr, leaf("label.bilinear"),
                                        leaf("label.head_weight"), leaf("label.dep_weight"),
                                        leaf("label.bias"));
    return out;
  }

  // Mean head cross-entropy plus mean label cross-entropy over dependents.
  ad::Var loss(const SentenceScores& s, const std::vector<int>& gold_heads,
               const std::vector<int>& gold_label_ids) {
    const int n = tape_.val(s.label_scores).cols;
    if (static_cast<int>(gold_heads.size()) != n || static_cast<int>(gold_label_ids.size()) != n)
      throw ContractError("loss: gold annotation length mismatch");
    std::vector<int> dep_ids(n);
    for (int j = 0; j < n; ++j) dep_ids[j] = j + 1;
    ad::Var dep_logits = tape_.gather_rows(tape_.transpose(s.arc_scores), dep_ids);
    ad::Var arc_loss = tape_.cross_entropy(dep_logits, gold_heads);
    ad::Var label_loss = tape_.cross_entropy(tape_.transpose(s.label_scores), gold_label_ids);
    return tape_.add(arc_loss, label_loss);
  }

  GradMap param_grads() const {
    GradMap g;
    for (const auto& [name, var] : leaves_) g[name] = tape_.grad(var);
    return g;
  }

 private:
  ModelConfig cfg_;
  ad::Tape tape_;
  std::map<std::string, ad::Var> leaves_;
  int dropout_calls_ = 0;

  ad::Var leaf(const std::string& name) {
    auto it = leaves_.find(name);
    if (it == leaves_.end()) throw ContractError("missing model parameter '" + name + "'");
    return it->second;
  }

  ad::Var norm(ad::Var x, const std::string& base) {
    return tape_.add(tape_.mul(tape_.layer_norm_rows(x), leaf(base + ".gain")), leaf(base + ".bias"));
  }
};

// Values-only forward pass matching the training/inference conditioning rule.
inline ScoreMatrices forward(const ParamStore& params, const EncodedSentence& enc,
                             const ModelConfig& cfg, bool train_mode,
                             std::uint64_t dropout_seed = 0) {
  ModelRun run(params, cfg);
  auto s = run.score(enc, train_mode, dropout_seed);
  return {run.tape().val(s.arc_scores), run.tape().val(s.label_scores), s.heads_used};
}

// Loss evaluated on plain score matrices (no gradient); used by tests with
// hand-built scores.
inline double loss_value(const ScoreMatrices& scores, const std::vector<int>& gold_heads,
                         const std::vector<int>& gold_label_ids) {
  ad::Tape t;
  const int n = scores.label_scores.cols;
  std::vector<int> dep_ids(n);
  for (int j = 0; j < n; ++j) dep_ids[j] = j + 1;
  ad::Var arcs = t.constant(scores.arc_scores);
  ad::Var labels = t.constant(scores.label_scores);
  ad::Var arc_loss = t.cross_entropy(t.gather_rows(t.transpose(arcs), dep_ids), gold_heads);
  ad::Var label_loss = t.cross_entropy(t.transpose(labels), gold_label_ids);
  return t.val(t.add(arc_loss, label_loss)).v[0];
}

// Full prediction: decode heads from the arc scores, then labels from the
// head-conditioned label scores.
inline DependencyTree predict(const ParamStore& params, const EncodedSentence& enc,
                              const ModelConfig& cfg) {
  ScoreMatrices s = forward(params, enc, cfg, /*train_mode=*/false);
  DependencyTree tree;
  tree.heads = s.heads_used;
  tree.label_ids = decode_labels(s.label_scores, tree.heads);
  return tree;
}

}  // namespace udep
