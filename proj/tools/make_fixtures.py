#!/usr/bin/env python3
"""Regenerates everything under data/.

Two fixture families:

  * data/synthetic + data/vectors: three tiny artificial languages that share
    one deterministic grammar (identical templates, disjoint surface vocab),
    used by the desk-scale training scenarios and the transfer tests.

  * data/jv: a stand-in corpus with the same published summary statistics as
    UD_Javanese-CSUI (sentence/word/unique-word counts, average length, tag
    and relation inventories). The original treebank is not bundled; this
    file exists so the `stats` command and its tests have a full-size target
    with known numbers.

Deterministic: fixed seeds, stable iteration order. Run from the repo root:

    python3 tools/make_fixtures.py
"""

import os
import random

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def token_line(tid, form, upos, head, deprel):
    lemma = form.lower()
    return f"{tid}\t{form}\t{lemma}\t{upos}\t_\t_\t{head}\t{deprel}\t_\t_"


# ---------------------------------------------------------------- synthetic

TEMPLATES = [
    # (upos sequence, heads, deprels) -- heads are 1-based, 0 = root
    (["DET", "NOUN", "VERB", "PUNCT"],
     [2, 3, 0, 3],
     ["det", "nsubj", "root", "punct"]),
    (["DET", "NOUN", "VERB", "DET", "NOUN", "PUNCT"],
     [2, 3, 0, 5, 3, 3],
     ["det", "nsubj", "root", "det", "obj", "punct"]),
    (["NOUN", "VERB", "ADP", "DET", "NOUN", "PUNCT"],
     [2, 0, 5, 5, 2, 2],
     ["nsubj", "root", "case", "det", "obl", "punct"]),
    (["DET", "ADJ", "NOUN", "VERB", "ADV", "PUNCT"],
     [3, 3, 4, 0, 4, 4],
     ["det", "amod", "nsubj", "root", "advmod", "punct"]),
    (["PRON", "VERB", "SCONJ", "PRON", "VERB", "PUNCT"],
     [2, 0, 5, 5, 2, 2],
     ["nsubj", "root", "mark", "nsubj", "advcl", "punct"]),
]

SYLLABLES = {
    "synta": ["ka", "mo", "tu", "ri", "pe", "sa", "lo", "ni"],
    "syntb": ["ve", "da", "zu", "go", "mi", "ra", "fo", "le"],
    "syntc": ["bi", "no", "she", "ta", "ku", "we", "po", "ga"],
}

POS_POOL_SIZE = {"NOUN": 8, "VERB": 8, "ADJ": 5, "ADV": 5, "DET": 4,
                 "ADP": 4, "PRON": 4, "SCONJ": 3}


def synth_vocab(lang):
    rng = random.Random(f"vocab:{lang}")
    sylls = SYLLABLES[lang]
    seen = set()
    pools = {}
    for pos, count in sorted(POS_POOL_SIZE.items()):
        pool = []
        while len(pool) < count:
            w = "".join(rng.choice(sylls) for _ in range(rng.randint(2, 3)))
            if w not in seen:
                seen.add(w)
                pool.append(w)
        pools[pos] = pool
    pools["PUNCT"] = ["."]
    return pools


def synth_sentences(lang, split, count):
    rng = random.Random(f"sent:{lang}:{split}")
    pools = synth_vocab(lang)
    blocks = []
    for i in range(count):
        upos_seq, heads, rels = TEMPLATES[rng.randrange(len(TEMPLATES))]
        forms = [rng.choice(pools[p]) for p in upos_seq]
        lines = [f"# sent_id = {lang}-{split}-{i + 1:03d}",
                 "# text = " + " ".join(forms)]
        for t, (form, upos, head, rel) in enumerate(zip(forms, upos_seq, heads, rels), 1):
            lines.append(token_line(t, form, upos, head, rel))
        blocks.append("\n".join(lines) + "\n\n")
    return "".join(blocks)


def synth_vec_file(lang, dim=16):
    pools = synth_vocab(lang)
    words = sorted({w for pool in pools.values() for w in pool})
    lines = [f"{len(words)} {dim}"]
    for w in words:
        rng = random.Random(f"vec:{lang}:{w}")
        vals = " ".join(f"{rng.uniform(-0.5, 0.5):.4f}" for _ in range(dim))
        lines.append(f"{w} {vals}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- jv stand-in

TARGET_SENTENCES = 1000
TARGET_WORDS = 14344
TARGET_UNIQUE = 3793
TARGET_MWT = 24  # 14344 words over 14320 surface tokens: mean length 14.32

UPOS_COUNTS = {
    "NOUN": 1353, "VERB": 700, "PROPN": 600, "ADJ": 380, "ADV": 250,
    "NUM": 180, "PRON": 60, "ADP": 50, "PART": 40, "DET": 40, "AUX": 30,
    "SCONJ": 30, "CCONJ": 25, "INTJ": 20, "X": 15, "SYM": 10,
}
PUNCT_FORMS = [".", ",", "!", "?", ";", ":", '"', "(", ")", "-"]

UNIVERSAL_RELS = [
    "root", "punct", "nsubj", "obj", "iobj", "obl", "nmod", "amod", "advmod",
    "advcl", "acl", "aux", "cop", "case", "det", "mark", "cc", "conj",
    "compound", "flat", "appos", "nummod", "xcomp", "ccomp", "csubj", "fixed",
    "parataxis", "discourse", "vocative", "dep", "list", "goeswith",
]
SUBTYPED_RELS = [
    "acl:relcl", "aux:pass", "nsubj:pass", "csubj:pass", "obl:agent",
    "obl:tmod", "nmod:poss", "nmod:tmod", "compound:prt", "compound:plur",
    "det:predet", "flat:name", "flat:foreign", "cc:preconj",
]


def jv_vocab(rng):
    onsets = ["k", "s", "t", "n", "m", "b", "g", "l", "r", "w", "j", "p",
              "d", "c", "h", "ng", "ny", ""]
    vowels = ["a", "i", "u", "e", "o"]
    assert sum(UPOS_COUNTS.values()) + len(PUNCT_FORMS) == TARGET_UNIQUE
    seen = set(PUNCT_FORMS)
    vocab = []  # (form, upos)
    for upos, count in sorted(UPOS_COUNTS.items()):
        made = 0
        while made < count:
            w = "".join(rng.choice(onsets) + rng.choice(vowels)
                        for _ in range(rng.randint(2, 4)))
            if len(w) < 2:
                continue
            if upos == "PROPN":
                w = w.capitalize()
            if w in seen:
                continue
            seen.add(w)
            vocab.append((w, upos))
            made += 1
    vocab.extend((p, "PUNCT") for p in PUNCT_FORMS)
    return vocab


def jv_lengths(rng):
    lengths = [max(3, min(45, round(rng.gauss(TARGET_WORDS / TARGET_SENTENCES, 5.0))))
               for _ in range(TARGET_SENTENCES)]
    while sum(lengths) != TARGET_WORDS:
        i = rng.randrange(TARGET_SENTENCES)
        if sum(lengths) < TARGET_WORDS and lengths[i] < 45:
            lengths[i] += 1
        elif sum(lengths) > TARGET_WORDS and lengths[i] > 3:
            lengths[i] -= 1
    return lengths


def jv_random_tree(rng, k, punct_last):
    # attach-to-earlier over a permutation; keep the final punctuation mark
    # off the root slot
    while True:
        order = list(range(1, k + 1))
        rng.shuffle(order)
        if not (punct_last and order[0] == k):
            break
    heads = [0] * (k + 1)
    for idx in range(1, k):
        heads[order[idx]] = order[rng.randrange(idx)]
    return heads


def make_jv():
    rng = random.Random("jv-standin-1")
    vocab = jv_vocab(rng)
    word_only = [(w, p) for (w, p) in vocab if p != "PUNCT"]

    lengths = jv_lengths(rng)
    # Sentence-final tokens are punctuation: one slot per sentence. The other
    # slots come from a stream holding each non-punct form once plus weighted
    # extra draws, so the unique count lands exactly.
    final_puncts = [PUNCT_FORMS[i] if i < len(PUNCT_FORMS) else
                    PUNCT_FORMS[0] if rng.random() < 0.7 else rng.choice(PUNCT_FORMS[1:3])
                    for i in range(TARGET_SENTENCES)]
    n_body = TARGET_WORDS - TARGET_SENTENCES
    stream = list(word_only)
    ranked = list(word_only)
    rng.shuffle(ranked)
    weights = [1.0 / (r + 10) for r in range(len(ranked))]
    stream += rng.choices(ranked, weights=weights, k=n_body - len(stream))
    rng.shuffle(stream)
    assert len(stream) == n_body

    rel_weights = {r: (40 if r in ("nsubj", "obj", "obl", "nmod", "case", "advmod",
                                   "amod", "det", "conj", "cc", "compound", "flat")
                       else 12) for r in UNIVERSAL_RELS if r not in ("root", "punct")}
    rel_weights.update({r: 2 for r in SUBTYPED_RELS})
    rel_names = sorted(rel_weights)
    rel_w = [rel_weights[r] for r in rel_names]

    mwt_sentences = set()
    while len(mwt_sentences) < TARGET_MWT:
        i = rng.randrange(TARGET_SENTENCES)
        if lengths[i] >= 5:
            mwt_sentences.add(i)

    pos_stream = 0
    blocks = []
    all_tokens = []  # (sentence_index, token_index) for label patching
    sentences = []
    for i in range(TARGET_SENTENCES):
        k = lengths[i]
        body = stream[pos_stream:pos_stream + k - 1]
        pos_stream += k - 1
        toks = [(w, p) for (w, p) in body] + [(final_puncts[i], "PUNCT")]
        heads = jv_random_tree(rng, k, punct_last=True)
        rels = []
        for t in range(1, k + 1):
            if heads[t] == 0:
                rels.append("root")
            elif t == k:
                rels.append("punct")
            else:
                rels.append(rng.choices(rel_names, weights=rel_w, k=1)[0])
                all_tokens.append((i, t - 1))
        sentences.append((toks, heads, rels, i in mwt_sentences))
    assert pos_stream == n_body

    # every relation type must appear at least once
    counts = {}
    for (_, _, rels, _) in sentences:
        for r in rels:
            counts[r] = counts.get(r, 0) + 1
    want = set(UNIVERSAL_RELS) | set(SUBTYPED_RELS)
    missing = sorted(want - set(counts))
    patch_rng = random.Random("jv-standin-patch")
    for rel in missing:
        while True:
            si, ti = all_tokens[patch_rng.randrange(len(all_tokens))]
            old = sentences[si][2][ti]
            if old in ("root", "punct") or counts.get(old, 0) <= 1:
                continue
            sentences[si][2][ti] = rel
            counts[old] -= 1
            counts[rel] = 1
            break

    for i, (toks, heads, rels, has_mwt) in enumerate(sentences):
        k = len(toks)
        mwt_at = 0
        if has_mwt:
            mwt_at = patch_rng.randrange(1, k - 1)  # covers tokens mwt_at, mwt_at+1
        surface = []
        t = 1
        while t <= k:
            if has_mwt and t == mwt_at:
                surface.append(toks[t - 1][0] + toks[t][0])
                t += 2
            else:
                surface.append(toks[t - 1][0])
                t += 1
        lines = [f"# sent_id = jvx-{i + 1:04d}", "# text = " + " ".join(surface)]
        for t in range(1, k + 1):
            if has_mwt and t == mwt_at:
                form = toks[t - 1][0] + toks[t][0]
                lines.append(f"{t}-{t + 1}\t{form}\t_\t_\t_\t_\t_\t_\t_\t_")
            lines.append(token_line(t, toks[t - 1][0], toks[t - 1][1], heads[t], rels[t - 1]))
        blocks.append("\n".join(lines) + "\n\n")
    return "".join(blocks)


def verify_jv(text):
    sentences = [b for b in text.split("\n\n") if b.strip()]
    assert len(sentences) == TARGET_SENTENCES, len(sentences)
    words = 0
    surface = 0
    forms = set()
    upos = set()
    rels = set()
    for block in sentences:
        token_lines = [ln for ln in block.split("\n") if ln and not ln.startswith("#")]
        covered = 0
        for ln in token_lines:
            cols = ln.split("\t")
            assert len(cols) == 10, cols
            if "-" in cols[0]:
                a, b = cols[0].split("-")
                covered += int(b) - int(a) + 1
                surface += 1
                continue
            words += 1
            surface += 1
            forms.add(cols[1])
            upos.add(cols[3])
            rels.add(cols[7])
        surface -= covered
        # tree check
        heads = {int(c[0]): int(c[6]) for c in
                 (ln.split("\t") for ln in token_lines) if "-" not in c[0]}
        roots = [t for t, h in heads.items() if h == 0]
        assert len(roots) == 1, block[:80]
        for t in heads:
            seen, v = set(), t
            while v != 0:
                assert v not in seen
                seen.add(v)
                v = heads[v]
    uni = {r for r in rels if ":" not in r}
    sub = {r for r in rels if ":" in r}
    stats = (len(sentences), words, len(forms), surface / len(sentences),
             len(upos), len(uni), len(sub), len(rels))
    expect = (1000, 14344, 3793, 14.32, 17, 32, 14, 46)
    assert stats == expect, (stats, expect)
    print("jv stand-in verified:", stats)


def write(path, text):
    full = os.path.join(ROOT, path)
    os.makedirs(os.path.dirname(full), exist_ok=True)
    with open(full, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    print(f"wrote {path} ({len(text)} bytes)")


def main():
    for lang, splits in [("synta", [("train", 20), ("dev", 20), ("test", 20)]),
                         ("syntb", [("train", 60), ("dev", 15)]),
                         ("syntc", [("train", 60), ("dev", 15)])]:
        for split, count in splits:
            write(f"data/synthetic/{lang}-{split}.conllu", synth_sentences(lang, split, count))
        write(f"data/vectors/{lang}.vec", synth_vec_file(lang))
    jv = make_jv()
    verify_jv(jv)
    write("data/jv/jv_csui-ud-standin.conllu", jv)


if __name__ == "__main__":
    main()
