"""Regenerates conll_edge.txt and conll_edge.expected.

Expected scores come from the `conlleval` package (a line-for-line port of
the CoNLL-2000 perl script): pip install conlleval==0.2
"""
import random
import sys

import conlleval

TYPES = ["fromloc.city_name", "toloc.city_name", "depart_time.time", "airline_name", "city_name"]


def handmade():
    return [
        # I after O starts a chunk; chunk runs to the end of the sentence
        [("a", "O", "O"), ("b", "I-city_name", "I-city_name"), ("c", "I-city_name", "I-city_name")],
        # type switch without B
        [("a", "B-fromloc.city_name", "B-fromloc.city_name"), ("b", "I-toloc.city_name", "I-fromloc.city_name")],
        # adjacent B-B of the same type
        [("a", "B-airline_name", "B-airline_name"), ("b", "B-airline_name", "I-airline_name"), ("c", "O", "O")],
        # predicted chunk too long / too short
        [("a", "O", "B-depart_time.time"), ("b", "B-depart_time.time", "I-depart_time.time"),
         ("c", "I-depart_time.time", "O")],
        # single-token chunk at the end
        [("a", "O", "O"), ("b", "B-toloc.city_name", "B-toloc.city_name")],
        # I of another type directly after B
        [("a", "B-city_name", "B-city_name"), ("b", "I-airline_name", "I-airline_name"), ("c", "O", "I-city_name")],
    ]


def random_sentence(rng):
    n = rng.randint(3, 12)
    tags = []
    i = 0
    while i < n:
        if rng.random() < 0.55:
            tags.append("O")
            i += 1
            continue
        t = rng.choice(TYPES)
        length = min(n - i, rng.choice([1, 1, 2, 3]))
        tags.append("B-" + t)
        tags.extend("I-" + t for _ in range(length - 1))
        i += length
    pred = []
    for tag in tags:
        r = rng.random()
        if r < 0.75:
            pred.append(tag)
        elif r < 0.82:
            pred.append("O")
        elif r < 0.90:
            pred.append(rng.choice(["B-", "I-"]) + rng.choice(TYPES))
        else:
            pred.append(tag.replace("B-", "I-") if tag.startswith("B-") else tag.replace("I-", "B-"))
    return [("w%d" % k, g, p) for k, (g, p) in enumerate(zip(tags, pred))]


def main(out_dir):
    rng = random.Random(20180415)
    sentences = handmade() + [random_sentence(rng) for _ in range(40)]
    lines = []
    for s in sentences:
        lines.extend(" ".join(t) for t in s)
        lines.append("")
    with open(out_dir + "/conll_edge.txt", "w") as f:
        f.write("\n".join(lines))
    result = conlleval.evaluate(lines)
    with open(out_dir + "/conll_edge.expected", "w") as f:
        o = result["overall"]
        f.write("tokens %d\n" % o["tags"]["stats"]["gold"])
        f.write("accuracy %.2f\n" % (100.0 * o["tags"]["stats"]["correct"] / o["tags"]["stats"]["gold"]))

        def line(name, d):
            s, e = d["stats"], d["evals"]
            assert s["pred"] > 0, name
            f.write("%s %d %d %d %.2f %.2f %.2f\n" % (name, s["gold"], s["pred"], s["correct"],
                                                     100 * e["prec"], 100 * e["rec"], 100 * e["f1"]))

        line("overall", o["chunks"])
        for slot in sorted(result["slots"]["chunks"]):
            line(slot, result["slots"]["chunks"][slot])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")
