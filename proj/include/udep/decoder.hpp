#pragma once

// Tree decoding: Chu-Liu-Edmonds maximum spanning arborescence with a
// single-root constraint, the exhaustive oracle it is tested against,
// per-dependent label argmax, and tree assembly back into a Sentence.

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <functional>
#include <limits>
#include <vector>

#include "udep/autodiff.hpp"
#include "udep/conllu.hpp"
#include "udep/embeddings.hpp"
#include "udep/errors.hpp"

namespace udep {

// Dense arc scores over nodes {0..n}, node 0 = ROOT. Entry (i, j) scores head
// i for dependent j. The diagonal and column 0 are never read.
struct ArcGraph {
  int n = 0;
  std::vector<double> w;  // (n+1)^2, row-major

  ArcGraph() = default;
  explicit ArcGraph(int words)
      : n(words), w(static_cast<std::size_t>(words + 1) * (words + 1), 0.0) {}

  double weight(int i, int j) const { return w[static_cast<std::size_t>(i) * (n + 1) + j]; }
  void set_weight(int i, int j, double x) { w[static_cast<std::size_t>(i) * (n + 1) + j] = x; }

  static ArcGraph from_scores(const ad::Tensor& M) {
    if (M.rows != M.cols || M.rows < 2) throw ShapeError("arc graph needs a square score matrix of size >= 2");
    ArcGraph g(M.rows - 1);
    g.w = M.v;
    return g;
  }
};

struct DependencyTree {
  std::vector<int> heads;      // heads[j-1] = head of word j, 0 = ROOT
  std::vector<int> label_ids;  // aligned with heads
};

// Total weight of a head assignment, summed in fixed dependent order so the
// decoder and the brute-force oracle compare identical doubles.
inline double tree_weight(const ArcGraph& g, const std::vector<int>& heads) {
  double s = 0;
  for (int j = 1; j <= g.n; ++j) s += g.weight(heads[j - 1], j);
  return s;
}

inline bool lex_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

namespace detail {

using bigint = boost::multiprecision::cpp_int;

// Doubles compare exactly once lifted to integers at a common power-of-two
// scale: w = mantissa * 2^(exp - 53), so (w - s_min) bits of left shift make
// every permitted weight integral. Totals summed this way are free of
// floating-point rounding, which is what makes tie handling well defined.
struct ExactScale {
  int min_exp = 0;
};

inline ExactScale exact_scale(const ArcGraph& g) {
  ExactScale s;
  bool any = false;
  for (int i = 0; i <= g.n; ++i)
    for (int j = 1; j <= g.n; ++j) {
      if (i == j) continue;
      double w = g.weight(i, j);
      if (w == 0.0) continue;
      int e = 0;
      std::frexp(w, &e);
      if (!any || e - 53 < s.min_exp) s.min_exp = e - 53;
      any = true;
    }
  return s;
}

inline bigint lift_exact(double w, const ExactScale& s) {
  if (w == 0.0) return 0;
  int e = 0;
  double mant = std::frexp(w, &e);
  auto m = static_cast<long long>(std::ldexp(mant, 53));  // integral by construction
  bigint out = m;
  out <<= (e - 53) - s.min_exp;
  return out;
}

// Weight for the exact pass: exact score first, then a big-integer key that
// encodes the head list base (n+1), most significant digit first. A larger
// key means a lexicographically smaller head list, so the unique maximum
// under this order is the lex-min maximum arborescence.
struct ExactWeight {
  bigint value;
  bigint key;

  ExactWeight operator+(const ExactWeight& o) const { return {value + o.value, key + o.key}; }
  ExactWeight operator-(const ExactWeight& o) const { return {value - o.value, key - o.key}; }
  bool operator<(const ExactWeight& o) const {
    return value < o.value || (value == o.value && key < o.key);
  }
};

// Stored in-arc-major (indexed dependent-then-head) so the per-dependent
// argmax scans contiguous memory.
template <class W>
struct CleProblem {
  int m = 0;  // node count including root 0
  std::vector<W> w;
  std::vector<char> ok;

  void resize(int nodes) {
    m = nodes;
    w.assign(static_cast<std::size_t>(m) * m, W{});
    ok.assign(static_cast<std::size_t>(m) * m, 0);
  }
  const W& wt(int u, int v) const { return w[static_cast<std::size_t>(v) * m + u]; }
  W& wt(int u, int v) { return w[static_cast<std::size_t>(v) * m + u]; }
  bool has(int u, int v) const { return ok[static_cast<std::size_t>(v) * m + u] != 0; }
  void set(int u, int v, W x) {
    wt(u, v) = std::move(x);
    ok[static_cast<std::size_t>(v) * m + u] = 1;
  }
  void clear(int u, int v) { ok[static_cast<std::size_t>(v) * m + u] = 0; }
};

// Chu-Liu-Edmonds (maximisation). Returns, for each node 1..m-1, its chosen
// head. Contractions happen in place on one matrix: each cycle folds into its
// first member, dead nodes drop out of the active set, and a record stack
// drives the expansion. Greedy argmax ties keep the smallest head index; the
// ExactWeight instantiation never ties.
template <class W>
std::vector<int> cle_solve(const CleProblem<W>& input) {
  CleProblem<W> g = input;  // contraction scratch
  const int m = g.m;
  std::vector<char> active(m, 1);
  std::vector<int> best(m, -1);  // cached best in-arc head per dependent

  auto recompute_best = [&](int v) {
    int b = -1;
    for (int u = 0; u < m; ++u) {
      if (!active[u] || u == v || !g.has(u, v)) continue;
      if (b < 0 || g.wt(b, v) < g.wt(u, v)) b = u;
    }
    if (b < 0) throw ContractError("cle: node " + std::to_string(v) + " has no incoming arc");
    best[v] = b;
  };
  for (int v = 1; v < m; ++v) recompute_best(v);

  struct Record {
    int rep;
    std::vector<int> members;     // the cycle, rep included
    std::vector<int> member_par;  // cycle arc head per member
    std::vector<int> enter_choice;  // head u -> member its folded in-arc enters
    std::vector<int> leave_choice;  // dependent v -> member supplying the folded out-arc
  };
  std::vector<Record> records;

  while (true) {
    // One cycle per round; caches stay exact across contractions.
    std::vector<int> cycle;
    {
      std::vector<int> color(m, 0);
      color[0] = 2;
      for (int s = 1; s < m && cycle.empty(); ++s) {
        if (!active[s] || color[s]) continue;
        int v = s;
        std::vector<int> path;
        while (v != 0 && color[v] == 0) {
          color[v] = 1;
          path.push_back(v);
          v = best[v];
        }
        if (v != 0 && color[v] == 1) {
          auto it = std::find(path.begin(), path.end(), v);
          cycle.assign(it, path.end());
        }
        for (int p : path) color[p] = 2;
      }
    }
    if (cycle.empty()) break;

    Record rec;
    rec.rep = cycle[0];
    rec.members = cycle;
    for (int v : cycle) rec.member_par.push_back(best[v]);
    rec.enter_choice.assign(m, -1);
    rec.leave_choice.assign(m, -1);
    std::vector<char> in_c(m, 0);
    for (int v : cycle) in_c[v] = 1;
    int rep = rec.rep;

    // Folded out-arcs: best member source per external dependent.
    std::vector<W> outw(m);
    std::vector<char> outok(m, 0);
    for (int v = 1; v < m; ++v) {
      if (!active[v] || in_c[v]) continue;
      int bx = -1;
      for (int x : cycle) {
        if (!g.has(x, v)) continue;
        if (bx < 0 || g.wt(bx, v) < g.wt(x, v)) bx = x;
      }
      if (bx >= 0) {
        outw[v] = g.wt(bx, v);
        outok[v] = 1;
        rec.leave_choice[v] = bx;
      }
    }
    // Folded in-arcs: entering at member v displaces the cycle arc into v.
    std::vector<W> inw(m);
    std::vector<char> inok(m, 0);
    for (int u = 0; u < m; ++u) {
      if (!active[u] || in_c[u]) continue;
      bool any = false;
      W bw{};
      int bv = -1;
      for (std::size_t k = 0; k < cycle.size(); ++k) {
        int v = cycle[k];
        if (!g.has(u, v)) continue;
        W cand = g.wt(u, v) - g.wt(rec.member_par[k], v);
        if (!any || bw < cand) {
          any = true;
          bw = std::move(cand);
          bv = v;
        }
      }
      if (any) {
        inw[u] = std::move(bw);
        inok[u] = 1;
        rec.enter_choice[u] = bv;
      }
    }

    for (int v = 1; v < m; ++v) {
      if (!active[v] || in_c[v]) continue;
      if (outok[v]) g.set(rep, v, std::move(outw[v]));
      else g.clear(rep, v);
    }
    for (int u = 0; u < m; ++u) {
      if (!active[u] || in_c[u]) continue;
      if (inok[u]) g.set(u, rep, std::move(inw[u]));
      else g.clear(u, rep);
    }
    for (int v : cycle)
      if (v != rep) active[v] = 0;

    recompute_best(rep);
    for (int v = 1; v < m; ++v) {
      if (!active[v] || v == rep) continue;
      if (in_c[best[v]]) recompute_best(v);
      else if (g.has(rep, v) && g.wt(best[v], v) < g.wt(rep, v)) best[v] = rep;
    }
    records.push_back(std::move(rec));
  }

  std::vector<int> heads(m, -1);
  for (int v = 1; v < m; ++v)
    if (active[v]) heads[v] = best[v];

  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    const Record& rec = *it;
    for (int v = 1; v < m; ++v)
      if (v != rec.rep && heads[v] == rec.rep) heads[v] = rec.leave_choice[v];
    int u = heads[rec.rep];
    int entered = rec.enter_choice[u];
    for (std::size_t k = 0; k < rec.members.size(); ++k) {
      int v = rec.members[k];
      heads[v] = (v == entered) ? u : rec.member_par[k];
    }
  }
  return heads;
}

// Full problem with every permitted arc; ROOT out-arcs are narrowed per
// candidate root afterwards.
template <class W, class F>
CleProblem<W> lift_problem(const ArcGraph& g, F&& lift) {
  CleProblem<W> p;
  p.resize(g.n + 1);
  for (int j = 1; j <= g.n; ++j)
    for (int i = 0; i <= g.n; ++i) {
      if (i == j) continue;
      p.set(i, j, lift(i, j));
    }
  return p;
}

template <class W>
void set_single_root(CleProblem<W>& p, int root_word) {
  for (int j = 1; j < p.m; ++j)
    p.ok[static_cast<std::size_t>(j) * p.m] = (j == root_word) ? 1 : 0;
}

}  // namespace detail

// Maximum spanning arborescence rooted at 0 with exactly one arc out of ROOT,
// realized as one CLE run per candidate root word. Totals are compared in
// exact arithmetic; equal-total solutions resolve to the lexicographically
// smallest head list. A fast double pass narrows the candidate roots, then an
// exact (lifted-integer score, tie key) pass decides among roots whose double
// totals land within rounding distance of the maximum.
inline std::vector<int> decode_heads(const ArcGraph& g) {
  using detail::bigint;
  using detail::ExactWeight;
  if (g.n < 1) throw ContractError("decode_heads: empty sentence");
  if (g.n == 1) return {0};

  double best_total = -std::numeric_limits<double>::infinity();
  double wmax = 0;
  std::vector<double> totals(g.n + 1, 0.0);
  for (int i = 0; i <= g.n; ++i)
    for (int j = 1; j <= g.n; ++j)
      if (i != j) wmax = std::max(wmax, std::fabs(g.weight(i, j)));

  auto base = detail::lift_problem<double>(g, [&](int i, int j) { return g.weight(i, j); });
  for (int r = 1; r <= g.n; ++r) {
    detail::set_single_root(base, r);
    auto heads = detail::cle_solve(base);
    std::vector<int> h(heads.begin() + 1, heads.end());
    totals[r] = tree_weight(g, h);
    best_total = std::max(best_total, totals[r]);
  }
  double tol = 1e-9 * (1.0 + wmax) * g.n;

  detail::ExactScale scale = detail::exact_scale(g);
  std::vector<bigint> pow(g.n + 1);
  pow[g.n] = 1;
  for (int j = g.n - 1; j >= 1; --j) pow[j] = pow[j + 1] * (g.n + 1);
  auto lifted = [&](int i, int j) {
    return ExactWeight{detail::lift_exact(g.weight(i, j), scale), -pow[j] * i};
  };

  std::vector<int> best_h;
  ExactWeight best_exact;
  bool have_best = false;
  detail::CleProblem<ExactWeight> exact_base;
  for (int r = 1; r <= g.n; ++r) {
    if (totals[r] < best_total - tol) continue;
    if (exact_base.m == 0) exact_base = detail::lift_problem<ExactWeight>(g, lifted);
    detail::set_single_root(exact_base, r);
    auto heads = detail::cle_solve(exact_base);
    std::vector<int> h(heads.begin() + 1, heads.end());
    ExactWeight total{};
    for (int j = 1; j <= g.n; ++j) total = total + lifted(h[j - 1], j);
    if (!have_best || best_exact < total) {
      have_best = true;
      best_exact = std::move(total);
      best_h = std::move(h);
    }
  }
  return best_h;
}

// Exhaustive oracle: every head assignment over {0..n}^n, filtered to
// single-root arborescences, maximum exact total with the same lexicographic
// tie-break. Exponential; callers must keep n small. Totals whose doubles
// land within rounding distance are re-compared in exact arithmetic, so the
// oracle and decode_heads define "maximum" identically.
inline std::vector<int> brute_force_heads(const ArcGraph& g) {
  using detail::bigint;
  if (g.n < 1) throw ContractError("brute_force_heads: empty sentence");
  if (g.n > 8) throw SizeError("brute_force_heads: n = " + std::to_string(g.n) + " exceeds the n <= 8 bound");

  double wmax = 0;
  for (int i = 0; i <= g.n; ++i)
    for (int j = 1; j <= g.n; ++j)
      if (i != j) wmax = std::max(wmax, std::fabs(g.weight(i, j)));
  double tol = 1e-9 * (1.0 + wmax) * g.n;
  detail::ExactScale scale = detail::exact_scale(g);
  std::vector<bigint> lifted(static_cast<std::size_t>(g.n + 1) * (g.n + 1));
  for (int i = 0; i <= g.n; ++i)
    for (int j = 1; j <= g.n; ++j)
      if (i != j)
        lifted[static_cast<std::size_t>(i) * (g.n + 1) + j] = detail::lift_exact(g.weight(i, j), scale);
  auto exact_total = [&](const std::vector<int>& heads) {
    bigint t = 0;
    for (int j = 1; j <= g.n; ++j) t += lifted[static_cast<std::size_t>(heads[j - 1]) * (g.n + 1) + j];
    return t;
  };

  std::vector<int> h(g.n, 0);
  std::vector<int> best;
  double best_dbl = -std::numeric_limits<double>::infinity();
  bigint best_exact;

  auto valid = [&]() {
    int roots = 0;
    for (int j = 1; j <= g.n; ++j) {
      if (h[j - 1] == j) return false;
      if (h[j - 1] == 0) ++roots;
    }
    if (roots != 1) return false;
    for (int j = 1; j <= g.n; ++j) {
      int v = j, steps = 0;
      while (v != 0 && steps <= g.n) {
        v = h[v - 1];
        ++steps;
      }
      if (v != 0) return false;  // cycle
    }
    return true;
  };

  // Odometer in lexicographic order of the head list, so the first maximum
  // found is the lexicographically smallest.
  while (true) {
    if (valid()) {
      double total = tree_weight(g, h);
      if (best.empty() || total > best_dbl + tol) {
        best_dbl = total;
        best_exact = exact_total(h);
        best = h;
      } else if (total >= best_dbl - tol) {
        bigint exact = exact_total(h);
        if (best_exact < exact) {
          best_dbl = total;
          best_exact = std::move(exact);
          best = h;
        }
      }
    }
    int k = g.n - 1;
    while (k >= 0 && h[k] == g.n) {
      h[k] = 0;
      --k;
    }
    if (k < 0) break;
    ++h[k];
  }
  return best;
}

// Per-dependent argmax over label scores; ties take the smallest label id.
inline std::vector<int> decode_labels(const ad::Tensor& label_scores, const std::vector<int>& heads) {
  if (label_scores.cols != static_cast<int>(heads.size()))
    throw ShapeError("decode_labels: " + std::to_string(heads.size()) + " heads for scores " +
                     label_scores.shape_str());
  std::vector<int> out(label_scores.cols, 0);
  for (int j = 0; j < label_scores.cols; ++j) {
    int best = 0;
    for (int l = 1; l < label_scores.rows; ++l)
      if (label_scores.at(l, j) > label_scores.at(best, j)) best = l;
    out[j] = best;
  }
  return out;
}

// Substitutes predicted heads and labels into a copy of the sentence. The
// result must pass tree validation; anything else is a decoder bug.
inline Sentence assemble(const std::vector<int>& heads, const std::vector<int>& label_ids,
                         const Sentence& s, const Vocab& vocab) {
  if (heads.size() != s.tokens.size() || label_ids.size() != s.tokens.size())
    throw ContractError("assemble: length mismatch with sentence");
  Sentence out = s;
  for (std::size_t j = 0; j < heads.size(); ++j) {
    out.tokens[j].head = heads[j];
    if (label_ids[j] < 0 || label_ids[j] >= static_cast<int>(vocab.label_names.size()))
      throw ContractError("assemble: label id out of range");
    out.tokens[j].deprel = vocab.label_names[label_ids[j]];
  }
  try {
    validate_sentence(out);
  } catch (const ValidationError& e) {
    throw ContractError(std::string("assemble: decoder produced an invalid tree: ") + e.what());
  }
  return out;
}

}  // namespace udep
