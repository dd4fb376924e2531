#!/usr/bin/env python3
"""Generate the small synthetic corpus used by the test suite.

Text comes from a seeded stochastic grammar: documents stay on one topic,
subjects agree with verbs in number, and word choice within each class is
Zipf-like, so an LSTM has real structure to find beyond unigram frequency.
Output is one sentence per line, PTB style (lower case, no punctuation
other than a few function tokens).
"""

import argparse
import pathlib
import random

SYLLABLES = [
    "ba", "ko", "ri", "tan", "mel", "so", "vi", "dra", "pe", "lu", "gor", "fen",
    "ta", "mi", "sel", "no", "ka", "dun", "re", "phi", "zo", "bel", "quo", "ash",
]

FUNCTION = {
    "det": ["the", "a", "this", "that", "every", "some"],
    "prep": ["in", "on", "near", "under", "with", "behind", "across", "from"],
    "conj": ["and", "but", "because", "while"],
    "adv": ["quickly", "slowly", "often", "rarely", "again", "never", "still"],
    "pron_sg": ["it", "she", "he"],
    "pron_pl": ["they", "we"],
}


def make_words(rng, n, used, min_syl=2, max_syl=3):
    out = []
    while len(out) < n:
        w = "".join(rng.choice(SYLLABLES) for _ in range(rng.randint(min_syl, max_syl)))
        if w not in used:
            used.add(w)
            out.append(w)
    return out


def zipf_pick(rng, items, s=1.1):
    weights = [1.0 / (i + 1) ** s for i in range(len(items))]
    return rng.choices(items, weights=weights, k=1)[0]


class Grammar:
    def __init__(self, rng, topics, nouns, verbs, adjs):
        used = set(sum(FUNCTION.values(), []))
        self.rng = rng
        self.topics = []
        for _ in range(topics):
            self.topics.append({
                "noun": make_words(rng, nouns, used),
                "verb": make_words(rng, verbs, used, 2, 2),
                "adj": make_words(rng, adjs, used, 2, 2),
            })
        self.shared_nouns = make_words(rng, nouns, used)
        self.shared_verbs = make_words(rng, verbs, used, 2, 2)

    def noun(self, topic, plural):
        rng = self.rng
        pool = topic["noun"] if rng.random() < 0.8 else self.shared_nouns
        n = zipf_pick(rng, pool)
        return n + "s" if plural else n

    def verb(self, topic, plural):
        rng = self.rng
        pool = topic["verb"] if rng.random() < 0.8 else self.shared_verbs
        v = zipf_pick(rng, pool)
        return v if plural else v + "s"

    def noun_phrase(self, topic, plural):
        rng = self.rng
        det = "the" if plural else zipf_pick(rng, FUNCTION["det"])
        if plural and rng.random() < 0.3:
            det = "some"
        words = [det]
        if rng.random() < 0.4:
            words.append(zipf_pick(rng, topic["adj"]))
        words.append(self.noun(topic, plural))
        return words

    def clause(self, topic, subject=None):
        rng = self.rng
        plural = rng.random() < 0.4
        if subject is not None and rng.random() < 0.5:
            words = [rng.choice(FUNCTION["pron_pl" if subject else "pron_sg"])]
            plural = subject
        else:
            words = self.noun_phrase(topic, plural)
        if rng.random() < 0.2:
            words.append(zipf_pick(rng, FUNCTION["adv"]))
        words.append(self.verb(topic, plural))
        words += self.noun_phrase(topic, rng.random() < 0.4)
        if rng.random() < 0.35:
            words.append(zipf_pick(rng, FUNCTION["prep"]))
            words += self.noun_phrase(topic, rng.random() < 0.4)
        return words, plural

    def sentence(self, topic, prev_plural):
        words, plural = self.clause(topic, prev_plural)
        if self.rng.random() < 0.25:
            more, plural = self.clause(topic, plural)
            words += [zipf_pick(self.rng, FUNCTION["conj"])] + more
        return words, plural


def generate(seed, tokens, topics, nouns, verbs, adjs):
    rng = random.Random(seed)
    g = Grammar(rng, topics=topics, nouns=nouns, verbs=verbs, adjs=adjs)
    lines, count = [], 0
    while count < tokens:
        topic = rng.choice(g.topics)
        prev = None
        for _ in range(rng.randint(4, 12)):
            words, prev = g.sentence(topic, prev)
            lines.append(" ".join(words))
            count += len(words) + 1
    return lines


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/tiny")
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--train", type=int, default=80000, help="approximate tokens")
    ap.add_argument("--valid", type=int, default=10000)
    ap.add_argument("--test", type=int, default=10000)
    ap.add_argument("--topics", type=int, default=12)
    ap.add_argument("--nouns", type=int, default=40, help="nouns per topic")
    ap.add_argument("--verbs", type=int, default=18, help="verbs per topic")
    ap.add_argument("--adjs", type=int, default=12, help="adjectives per topic")
    args = ap.parse_args()

    lines = generate(args.seed, args.train + args.valid + args.test,
                     args.topics, args.nouns, args.verbs, args.adjs)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    splits, i = {}, 0
    for name, budget in (("train", args.train), ("valid", args.valid), ("test", args.test)):
        chunk, n = [], 0
        while i < len(lines) and (n < budget or name == "test"):
            chunk.append(lines[i])
            n += len(lines[i].split()) + 1
            i += 1
        splits[name] = chunk
    for name, chunk in splits.items():
        (out / f"{name}.txt").write_text(" " + "\n ".join(chunk) + "\n")
        print(f"{name}: {len(chunk)} lines, {sum(len(l.split()) + 1 for l in chunk)} tokens")


if __name__ == "__main__":
    main()
