#!/usr/bin/env python3
"""Regenerates the builtin tagger tables and the shipped data fixtures.

Outputs are committed; rerun only when the vocabulary changes:

    python3 scripts/gen_fixtures.py
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"
RES = ROOT / "crates" / "core" / "resources"

# ---------------------------------------------------------------- vocabulary

ASPECT_NOUNS = {
    "products": ["breakfast", "bread", "pizza", "pasta", "burger", "salad", "coffee",
                 "dessert", "soup", "steak", "sushi", "food", "sandwich", "cake"],
    "price": ["price", "bill", "deal", "cost", "value"],
    "service": ["staff", "waiter", "waitress", "service", "server", "host", "manager",
                "bartender"],
    "environment": ["atmosphere", "decor", "music", "patio", "place", "area", "room",
                    "view", "lighting", "ambiance"],
}
PLURAL_NOUNS = {
    "products": ["wings", "fries", "tacos", "noodles"],
    "price": ["prices"],
    "service": ["waiters", "servers"],
    "environment": ["tables", "flowers"],
}
ASPECT_ADJS = {
    "products": ["delicious", "tasty", "fresh", "bland", "stale", "yummy", "flavorful",
                 "soggy", "greasy", "juicy"],
    "price": ["cheap", "expensive", "pricey", "affordable", "overpriced", "reasonable",
              "costly"],
    "service": ["friendly", "rude", "attentive", "slow", "helpful", "polite", "careless"],
    "environment": ["cozy", "noisy", "clean", "quiet", "dirty", "spacious", "crowded",
                    "loud", "charming"],
}
GENERIC_ADJS = ["good", "great", "nice", "bad", "terrible", "amazing", "excellent",
                "awesome", "decent", "awful", "horrible", "fantastic", "lovely"]
ADVERBS = ["really", "very", "pretty", "super", "quite", "so", "too", "rather"]
LOCATIONS = ["Houston", "California", "Chicago", "Austin", "Denver"]
PERSONS = ["Alice", "Maria", "John", "Sarah", "Omar"]
DAYS = ["Monday", "Friday", "Sunday"]

LABEL_COLORS = [
    ("price", "Price", "#e67e22"),
    ("service", "Service", "#2e86de"),
    ("environment", "Environment", "#27ae60"),
    ("products", "Products", "#c0392b"),
]

# ---------------------------------------------------------------- tagger

def tagger_tables():
    pos = {}
    for w in ["the", "a", "an", "this", "that", "these", "those", "to", "with", "for", "of",
              "in", "on", "at", "over", "by", "from", "and", "but", "or", "as", "than",
              "if", "because", "while", "about"]:
        pos[w] = "OTHER"
    for w in ["be", "was", "were", "is", "are", "am", "been", "being", "do", "does", "did",
              "can", "could", "will", "would", "should", "might", "must"]:
        pos[w] = "AUX"
    for w in ["i", "we", "they", "she", "he", "it", "you", "me", "us", "them", "her", "him",
              "everything", "nothing", "everyone", "something", "our", "my", "their"]:
        pos[w] = "PRON"
    for w in ADVERBS + ["not", "never", "always", "also", "here", "there", "well", "overall",
                        "again", "just", "really", "much", "definitely"]:
        pos[w] = "ADV"
    for w in ["have", "has", "had", "begin", "weep", "shop", "visit", "love", "hate",
              "enjoy", "recommend", "stand", "frighten", "mourn", "come", "go", "leave",
              "fly", "eat", "taste", "say", "said", "order", "wait", "return", "sense",
              "dread", "pay"]:
        pos[w] = "VERB"
    nouns = ["child", "sister", "place", "taste", "flavour", "deliciousness", "option",
             "plan", "breakdown", "help", "purchase", "pricing", "flower", "table", "week",
             "wing", "fry", "taco", "noodle", "meal", "dish", "time", "night", "experience",
             "restaurant", "menu", "portion", "drink", "wine", "beer", "tip", "visit",
             "money", "bargain", "check", "tab", "employee", "ambience", "seat"]
    for ns in ASPECT_NOUNS.values():
        nouns += ns
    for w in nouns:
        pos[w] = "NOUN"
    adjs = GENERIC_ADJS + ["many", "other", "better", "best", "worst", "little", "small",
                           "high", "low", "fair", "frightened", "scared", "afraid",
                           "fearful", "sad", "happy", "priced", "inexpensive", "worth",
                           "impolite", "fine", "okay", "perfect", "poor", "ambient"]
    for a in ASPECT_ADJS.values():
        adjs += a
    for w in adjs:
        pos[w] = "ADJ"
    for w in ["one", "two", "three", "ten", "twenty"]:
        pos[w] = "NUM"
    for w in LOCATIONS + PERSONS + DAYS + ["TX", "Yelp", "Starbucks"]:
        pos[w.lower()] = "PROPN"

    exceptions = {
        "was": "be", "were": "be", "is": "be", "are": "be", "am": "be", "been": "be",
        "being": "be", "has": "have", "had": "have", "having": "have", "did": "do",
        "does": "do", "began": "begin", "ate": "eat", "went": "go", "left": "leave",
        "flew": "fly", "children": "child", "said": "say", "loved": "love",
        "hated": "hate", "enjoyed": "enjoy", "visited": "visit", "ordered": "order",
        "waited": "wait", "returned": "return", "priced": "price", "paid": "pay",
        "frightened": "frightened", "wept": "weep", "stood": "stand", "came": "come",
        "tasted": "taste", "mourned": "mourn", "fries": "fry", "ambiance": "ambiance",
    }
    suffix_rules = [
        {"suffix": "ies", "replace": "y", "min_stem": 2},
        {"suffix": "sses", "replace": "ss", "min_stem": 1},
        {"suffix": "ss", "replace": "ss", "min_stem": 1},
        {"suffix": "ous", "replace": "ous", "min_stem": 1},
        {"suffix": "us", "replace": "us", "min_stem": 1},
        {"suffix": "is", "replace": "is", "min_stem": 1},
        {"suffix": "s", "replace": "", "min_stem": 3},
    ]
    pos_suffix = [
        {"suffix": "ly", "pos": "ADV"},
        {"suffix": "ous", "pos": "ADJ"},
        {"suffix": "ful", "pos": "ADJ"},
        {"suffix": "ive", "pos": "ADJ"},
        {"suffix": "able", "pos": "ADJ"},
        {"suffix": "ible", "pos": "ADJ"},
        {"suffix": "ing", "pos": "VERB"},
        {"suffix": "ed", "pos": "VERB"},
        {"suffix": "tion", "pos": "NOUN"},
        {"suffix": "ment", "pos": "NOUN"},
        {"suffix": "ness", "pos": "NOUN"},
        {"suffix": "ity", "pos": "NOUN"},
    ]
    gazetteer = [{"phrase": l, "kind": "LOCATION"} for l in LOCATIONS]
    gazetteer += [{"phrase": "Houston, TX", "kind": "LOCATION"},
                  {"phrase": "New York", "kind": "LOCATION"}]
    gazetteer += [{"phrase": p, "kind": "PERSON"} for p in PERSONS]
    gazetteer += [{"phrase": d, "kind": "DATE"} for d in DAYS]
    gazetteer += [{"phrase": "last week", "kind": "DATE"}]
    gazetteer += [{"phrase": o, "kind": "ORG"} for o in ["Yelp", "Starbucks"]]
    return {
        "pos_lexicon": dict(sorted(pos.items())),
        "lemma_exceptions": dict(sorted(exceptions.items())),
        "lemma_suffix_rules": suffix_rules,
        "pos_suffix_rules": pos_suffix,
        "gazetteer": gazetteer,
    }


# ---------------------------------------------------------------- lexicon

def lexicon_records():
    recs = [{"head": "price", "members": ["purchase", "pricey", "cheap", "cost", "pricing"]}]
    groups = [
        ["good", "great", "nice", "pretty", "well", "fine", "excellent", "amazing", "awesome",
         "decent", "best", "worst", "perfect", "fantastic", "lovely"],
        ["bad", "terrible", "awful", "horrible", "poor", "worst"],
        ASPECT_NOUNS["products"] + ["wing", "fry", "taco", "noodle", "meal", "dish"],
        ["delicious", "tasty", "yummy", "flavorful", "fresh", "juicy"],
        ["bland", "stale", "soggy", "greasy"],
        ["cheap", "affordable", "reasonable", "inexpensive"],
        ["expensive", "pricey", "overpriced", "costly"],
        ["bill", "check", "tab", "cost"],
        ["deal", "value", "bargain"],
        ["staff", "waiter", "waitress", "server", "host", "manager", "bartender", "employee",
         "service"],
        ["friendly", "attentive", "helpful", "polite"],
        ["rude", "slow", "careless", "impolite"],
        ["atmosphere", "area", "decor", "ambiance", "music", "lighting", "view", "patio",
         "place", "room", "table", "flower"],
        ["cozy", "quiet", "clean", "spacious", "charming"],
        ["noisy", "loud", "crowded", "dirty"],
        ["frightened", "scared", "afraid", "fearful", "frighten"],
    ]
    seen = {"price"}
    for g in groups:
        for head in g:
            if head in seen:
                continue
            seen.add(head)
            recs.append({"head": head, "members": [m for m in g if m != head]})
    return recs


# ---------------------------------------------------------------- corpus

def cap(s):
    return s[0].upper() + s[1:]


def clause(rng, aspect, kind):
    """Returns (text, label) for one `the N was A` clause."""
    plural = rng.random() < 0.2 and PLURAL_NOUNS[aspect]
    noun = rng.choice(PLURAL_NOUNS[aspect] if plural else ASPECT_NOUNS[aspect])
    verb = "were" if plural else "was"
    if kind == "specific":
        adj, label = rng.choice(ASPECT_ADJS[aspect]), aspect
    elif kind == "generic":
        adj, label = rng.choice(GENERIC_ADJS), aspect
    else:  # price adjective on a non-price noun
        adj, label = rng.choice(ASPECT_ADJS["price"]), "price"
    adv = rng.choice(ADVERBS) + " " if rng.random() < 0.3 else ""
    return f"the {noun} {verb} {adv}{adj}", label


def sentence(rng):
    aspects = list(ASPECT_NOUNS)
    r = rng.random()
    if r < 0.40:
        a = rng.choice(aspects)
        c, l = clause(rng, a, "specific")
        return cap(c) + " .", {l}
    if r < 0.62:
        a = rng.choice(aspects)
        c, l = clause(rng, a, "generic")
        return cap(c) + " .", {l}
    if r < 0.72:
        a = rng.choice(["products", "service", "environment"])
        c, l = clause(rng, a, "cross")
        return cap(c) + " .", {l}
    if r < 0.86:
        a, b = rng.sample(aspects, 2)
        c1, l1 = clause(rng, a, rng.choice(["specific", "generic"]))
        c2, l2 = clause(rng, b, rng.choice(["specific", "generic"]))
        conj = rng.choice(["but", "and"])
        return f"{cap(c1)} {conj} {c2} .", {l1, l2}
    if r < 0.92:
        a = rng.choice(aspects)
        c, l = clause(rng, a, rng.choice(["specific", "generic"]))
        if rng.random() < 0.5:
            return f"We visited {rng.choice(LOCATIONS)} and {c} .", {l}
        return f"{rng.choice(PERSONS)} said {c} .", {l}
    if r < 0.96:
        a = rng.choice(["products", "service", "environment"])
        noun = rng.choice(ASPECT_NOUNS[a])
        verb = rng.choice(["loved", "enjoyed", "hated"])
        return f"I {verb} the {noun} .", {a}
    day = rng.choice(DAYS)
    return rng.choice([f"We came here on {day} .", f"We visited on {day} with my sister .",
                       "It was our first visit ."]), set()


def oracle_keywords():
    kw = {}
    for a in ASPECT_NOUNS:
        lem = set(ASPECT_NOUNS[a]) | set(ASPECT_ADJS[a])
        lem |= {p[:-1] if not p.endswith("ies") else p[:-3] + "y" for p in PLURAL_NOUNS[a]}
        kw[a] = sorted(lem)
    return kw


def main():
    RES.mkdir(parents=True, exist_ok=True)
    FIX.mkdir(parents=True, exist_ok=True)
    (RES / "tagger.json").write_text(json.dumps(tagger_tables(), indent=1) + "\n")

    with open(FIX / "lexicon.jsonl", "w") as f:
        for rec in lexicon_records():
            f.write(json.dumps(rec) + "\n")
    with open(FIX / "labels.jsonl", "w") as f:
        for key, display, color in LABEL_COLORS:
            f.write(json.dumps({"key": key, "display": display, "color": color}) + "\n")

    phrasebook = {
        "price": ["pretty cheap", "well priced", "worst deal", "good but overpriced",
                  "great prices", "nice deal", "really expensive"],
        "service": ["service was great", "friendly staff", "great service", "nice waiter",
                    "good server", "rude staff"],
        "environment": ["table had great flowers", "cozy atmosphere", "great decor",
                        "nice music", "good view", "noisy room"],
        "products": ["delicious food", "tasty pizza", "great burger", "good bread",
                     "fresh salad", "bland soup"],
    }
    with open(FIX / "phrasebook.jsonl", "w") as f:
        for label, phrases in phrasebook.items():
            f.write(json.dumps({"label": label, "phrases": phrases}) + "\n")

    with open(FIX / "oracle_keywords.json", "w") as f:
        json.dump(oracle_keywords(), f, indent=1)
        f.write("\n")

    rng = random.Random(20240917)
    rows, texts = [], set()
    while len(rows) < 160:
        text, labels = sentence(rng)
        if text in texts:
            continue
        texts.add(text)
        rows.append((text, labels))
    ids = list(range(1, 161))
    rng.shuffle(ids)
    with open(FIX / "yelp_synthetic.jsonl", "w") as f:
        for num, (text, labels) in sorted(zip(ids, rows)):
            f.write(json.dumps({"id": f"y{num:03d}", "text": text,
                                "labels": sorted(labels)}) + "\n")

    breakfast = [
        ("f01", "Breakfast was delicious", ["products"]),
        ("f02", "The bread was good", ["products"]),
        ("f03", "Breakfast was expensive", ["price"]),
        ("f04", "The bread was overpriced", ["price"]),
        ("f05", "The prices were too high", ["price"]),
        ("f06", "The waiter was rude", ["service"]),
        ("f07", "The staff was slow", ["service"]),
        ("f08", "The place was noisy", ["environment"]),
        ("f09", "The patio was cozy", ["environment"]),
        ("f10", "The wings were delicious .", None),
        ("f11", "Too many other places to shop with better prices .", None),
        ("f12", "We visited Houston, TX last week", None),
        ("f13", "she began to weep over the child", None),
        ("f14", "The coffee was good", None),
    ]
    with open(FIX / "breakfast_corpus.jsonl", "w") as f:
        for id_, text, labels in breakfast:
            rec = {"id": id_, "text": text}
            if labels:
                rec["labels"] = labels
            f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
