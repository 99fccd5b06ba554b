"""Generate the bundled toy corpus under src/depswap/data/toy.

Source sentences follow a head-final-ish order (subject, time, locative PP,
verb, object) while the English side puts the PP and time after the object,
so a monotone decoder gets the order wrong and the dependency features have
something to learn. Output is fully determined by ``--seed``.

    python3 scripts/make_toy_corpus.py [--seed 7] [--out src/depswap/data/toy]
"""

import argparse
import os
import random

SUBJECTS = [("佐科威", "NR", ["Jokowi"]), ("总统", "NN", ["the", "president"]),
            ("部长", "NN", ["the", "minister"]), ("记者", "NN", ["the", "reporter"]),
            ("学生", "NN", ["the", "student"]), ("老师", "NN", ["the", "teacher"]),
            ("李明", "NR", ["Li", "Ming"])]
TIMES = [("昨天", ["yesterday"]), ("今天", ["today"]), ("明天", ["tomorrow"]),
         ("上午", ["in", "the", "morning"]), ("晚上", ["at", "night"])]
PLACES = [("北京", "NR", ["Beijing"]), ("上海", "NR", ["Shanghai"]), ("学校", "NN", ["the", "school"]),
          ("会议", "NN", ["the", "meeting"]), ("公园", "NN", ["the", "park"])]
VERBS = [("发表", ["made"]), ("访问", ["visited"]), ("看到", ["saw"]), ("写", ["wrote"]),
         ("介绍", ["introduced"])]
OBJECTS = [("讲话", ["a", "speech"]), ("报告", ["a", "report"]), ("书", ["a", "book"]),
           ("朋友", ["a", "friend"]), ("城市", ["the", "city"]), ("计划", ["a", "plan"])]
# verb translations that depend on the object
VERB_BY_OBJECT = {("发表", "讲话"): ["gave"], ("发表", "报告"): ["published"], ("写", "计划"): ["drafted"],
                  ("看到", "朋友"): ["met"], ("介绍", "城市"): ["showed"]}
PREP_BY_PLACE = {"会议": ["at"], "学校": ["at"]}
ADJECTIVES = [("重要", ["important"]), ("新", ["new"]), ("长", ["long"]), ("好", ["good"])]


class Builder:
    """Accumulates source tokens, target tokens and links for one sentence."""

    def __init__(self):
        self.src = []       # [form, pos, label, head-name]
        self.names = {}
        self.tgt = []
        self.links = []

    def add_src(self, name, form, pos, label, head):
        self.names[name] = len(self.src)
        self.src.append([form, pos, label, head])

    def emit(self, words, name=None, align=None):
        """Append target ``words``; link them to source token ``name`` (all, or only ``align`` offsets)."""
        start = len(self.tgt)
        self.tgt.extend(words)
        if name is not None:
            for k in range(len(words)):
                if align is None or k in align:
                    self.links.append((self.names[name], start + k))

    def conll(self):
        lines = []
        for k, (form, pos, label, head) in enumerate(self.src, 1):
            h = 0 if head is None else self.names[head] + 1
            lines.append(f"{k}\t{form}\t{pos}\t{h}\t{label}")
        return "\n".join(lines) + "\n"


def sentence(rng: random.Random):
    b = Builder()
    subj = rng.choice(SUBJECTS)
    time = rng.choice(TIMES) if rng.random() < 0.7 else None
    place = rng.choice(PLACES) if rng.random() < 0.7 else None
    verb = rng.choice(VERBS)
    obj = rng.choice(OBJECTS)
    adj = rng.choice(ADJECTIVES) if rng.random() < 0.35 else None
    fronted = time is not None and rng.random() < 0.25

    if fronted:
        b.add_src("time", time[0], "NT", "tmod", "verb")
        b.add_src("comma", "，", "PU", "punct", "verb")
    b.add_src("subj", subj[0], subj[1], "nsubj", "verb")
    if time and not fronted:
        b.add_src("time", time[0], "NT", "tmod", "verb")
    if place:
        b.add_src("prep", "在", "P", "prep", "verb")
        b.add_src("place", place[0], place[1], "pobj", "prep")
    b.add_src("verb", verb[0], "VV", "root", None)
    if adj:
        b.add_src("adj", adj[0], "JJ", "amod", "obj")
        b.add_src("de", "的", "DEG", "assm", "adj")
    b.add_src("obj", obj[0], "NN", "dobj", "verb")
    b.add_src("stop", "。", "PU", "punct", "verb")

    if fronted:
        b.emit(time[1], "time")
        b.emit([","], "comma")
    b.emit(subj[2], "subj")
    b.emit(VERB_BY_OBJECT.get((verb[0], obj[0]), verb[1]), "verb")
    if adj:
        # "a" + adjective + noun; the determiner belongs to the noun
        b.emit(obj[1][:1], "obj")
        b.emit(adj[1], "adj")
        b.emit(obj[1][1:], "obj")
    else:
        b.emit(obj[1], "obj")
    if place:
        b.emit(PREP_BY_PLACE.get(place[0], ["in"]), "prep")
        b.emit(place[2], "place")
    if time and not fronted:
        b.emit(time[1], "time")
    b.emit(["."], "stop")
    # alternative reference with the time expression first
    alt = list(b.tgt)
    if time and not fronted:
        t = time[1]
        body = alt[:len(alt) - len(t) - 1]
        alt = t + [","] + body + ["."]
    return b, alt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "src", "depswap", "data", "toy"))
    ap.add_argument("--train", type=int, default=200)
    ap.add_argument("--dev", type=int, default=20)
    ap.add_argument("--test", type=int, default=20)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    os.makedirs(args.out, exist_ok=True)

    def path(name):
        return os.path.join(args.out, name)

    with open(path("train.src"), "w", encoding="utf-8") as fs, \
            open(path("train.tgt"), "w", encoding="utf-8") as ft, \
            open(path("train.align"), "w", encoding="utf-8") as fa:
        for _ in range(args.train):
            b, _ = sentence(rng)
            fs.write(" ".join(t[0] for t in b.src) + "\n")
            ft.write(" ".join(b.tgt) + "\n")
            fa.write(" ".join(f"{i}-{j}" for i, j in sorted(b.links)) + "\n")
    for split, count in (("dev", args.dev), ("test", args.test)):
        with open(path(f"{split}.conll"), "w", encoding="utf-8") as fc, \
                open(path(f"{split}.ref0"), "w", encoding="utf-8") as r0, \
                open(path(f"{split}.ref1"), "w", encoding="utf-8") as r1:
            for k in range(count):
                b, alt = sentence(rng)
                if k:
                    fc.write("\n")
                fc.write(b.conll())
                r0.write(" ".join(b.tgt) + "\n")
                r1.write(" ".join(alt) + "\n")


if __name__ == "__main__":
    main()
