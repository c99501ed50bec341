"""Generates data/fixtures/corpus.jsonl: 10 WikiText-style documents of exactly
300 tokens each (whitespace + punctuation tokenization), three sections apiece."""
import json
import random
import re

TOPICS = [
    ("clevedon_pier", "Clevedon Pier", ["pier", "estuary", "toll", "planks", "Betjeman", "Severn", "harbour", "Victorian", "girders", "promenade"]),
    ("air_mata_iboe", "Air Mata Iboe", ["film", "Batavia", "studio", "actress", "director", "premiere", "soundtrack", "Malay", "audience", "reel"]),
    ("gpt_three", "GPT-3", ["model", "parameters", "tokens", "transformer", "context", "weights", "benchmark", "prompt", "corpus", "inference"]),
    ("kestrel_falcon", "Kestrel", ["falcon", "hover", "prey", "wingspan", "moorland", "nest", "plumage", "voles", "talons", "migration"]),
    ("basalt_columns", "Basalt columns", ["lava", "cooling", "hexagonal", "causeway", "fractures", "volcanic", "geologists", "crystals", "cliffs", "erosion"]),
    ("tram_network", "Tram network", ["trams", "depot", "tracks", "timetable", "overhead", "conductor", "junction", "fares", "carriages", "tramway"]),
    ("saffron_trade", "Saffron trade", ["saffron", "crocus", "stigmas", "merchants", "caravans", "dye", "harvest", "markets", "spice", "guild"]),
    ("lighthouse_keepers", "Lighthouse keepers", ["lamp", "lantern", "keeper", "reef", "fog", "signal", "beacon", "tower", "shipwrecks", "lens"]),
    ("orchard_cider", "Cider orchards", ["apples", "orchard", "press", "barrels", "fermentation", "wassail", "grafting", "blossom", "vat", "perry"]),
    ("glacier_survey", "Glacier survey", ["glacier", "moraine", "crevasse", "ice", "meltwater", "surveyors", "cirque", "snowfield", "retreat", "sediment"]),
]

PEOPLE = ["Thomas Hollyman", "Ada Pryce", "Jonah Whitcombe", "Marta Ilves", "Osric Dunmore", "Lena Farrow",
          "Piet Vandermeer", "Rosa Quintal", "Emrys Howell", "Nadia Sorel", "Callum Reid", "Ines Baptista"]
VERBS = ["documented", "rebuilt", "studied", "expanded", "restored", "measured", "described", "financed", "mapped", "praised"]
ADJ = ["northern", "celebrated", "fragile", "ancient", "remote", "crowded", "weathered", "modest", "famous", "quiet"]

TEMPLATES = [
    "In {year} , {person} {verb} the {adj} {w0} near the {w1} .",
    "The {w0} and the {w1} were {verb} by {person} during the {year} season .",
    "Records from {year} show that the {adj} {w0} attracted {n} visitors to the {w1} .",
    "{person} later wrote that the {w0} was the most {adj} {w1} in the region .",
    "After {n} years of work , the {w0} reopened beside the {adj} {w1} in {year} .",
    "Local accounts say the {w1} and its {w0} survived a storm in {year} .",
    "By {year} the {adj} {w0} had become linked with the {w1} , according to {person} .",
    "A study by {person} counted {n} {w0} along the {adj} {w1} .",
]

def tokenize(text):
    toks = []
    for word in text.split():
        cur = ""
        for i, c in enumerate(word):
            if c.isalnum() or c == "_":
                cur += c
                continue
            flanked = cur and i + 1 < len(word) and (cur[-1].isalnum() or cur[-1] == "_") and (word[i + 1].isalnum() or word[i + 1] == "_")
            if c in "-.'" and flanked:
                cur += c
                continue
            if cur:
                toks.append(cur)
            cur = ""
            toks.append(c)
        if cur:
            toks.append(cur)
    return toks

def detok(tokens):
    out = ""
    for i, t in enumerate(tokens):
        if i and not (len(t) == 1 and t in ",.;:!?)]}%") and not (len(tokens[i - 1]) == 1 and tokens[i - 1] in "([{"):
            out += " "
        out += t
    return out

def sentence(rng, words):
    w = rng.sample(words, 2)
    t = rng.choice(TEMPLATES).format(year=rng.randint(1820, 1995), person=rng.choice(PEOPLE), verb=rng.choice(VERBS),
                                     adj=rng.choice(ADJ), w0=w[0], w1=w[1], n=rng.randint(3, 900))
    return tokenize(t)

def make_doc(rng, title, words, total=300, sections=(100, 100, 100)):
    parts = []
    for size in sections:
        toks = []
        while len(toks) < size:
            toks += sentence(rng, words)
        toks = toks[:size]
        if toks[-1] != ".":
            toks[-1] = "."
        parts.append(detok(toks))
    text = "\n\n".join(parts)
    assert len(tokenize(text)) == total, len(tokenize(text))
    return text

def main():
    rng = random.Random(20231001)
    with open("data/fixtures/corpus.jsonl", "w") as f:
        for doc_id, title, words in TOPICS:
            f.write(json.dumps({"doc_id": doc_id, "text": make_doc(rng, title, words)}) + "\n")

if __name__ == "__main__":
    main()
