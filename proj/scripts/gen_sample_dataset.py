#!/usr/bin/env python3
"""Regenerates data/sample_dataset.jsonl from the sample router config.

Prompts are deterministic recombinations of each route's utterance
vocabulary (20 per category). The script mirrors the router's hashed
encoder and rejection-samples every prompt until it classifies to its own
category with a comfortable margin, so the shipped dataset routes cleanly.
Run from the repo root:

    python3 scripts/gen_sample_dataset.py
"""

import json
import math
import pathlib
import random
import re

import yaml

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIG = ROOT / "config" / "sample_router.yaml"
OUTPUT = ROOT / "data" / "sample_dataset.jsonl"

QUERIES_PER_CATEGORY = 20
DIMENSION = 256
MIN_SCORE = 0.30
MIN_MARGIN = 0.05

TEMPLATES = [
    "{a} and then {b}",
    "{a} considering {b}",
    "please {a}",
    "{a} step {b}",
    "question about {a} versus {b}",
    "{a}",
    "could you {a} given {b}",
    "regarding {a} also {b}",
]

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
MASK = (1 << 64) - 1


def tokens(text):
    return [t.lower() for t in re.findall(r"[0-9a-zA-Z]+", text)]


def fnv1a64(data):
    h = FNV_OFFSET
    for b in data.encode("utf-8"):
        h = ((h ^ b) * FNV_PRIME) & MASK
    return h


def embed(text):
    v = [0.0] * DIMENSION
    for t in tokens(text):
        h = fnv1a64(t)
        v[h % DIMENSION] += -1.0 if h >> 63 else 1.0
    norm = math.sqrt(sum(x * x for x in v))
    return [x / norm for x in v] if norm > 0 else v


def normalized_mean(vectors):
    mean = [sum(col) / len(vectors) for col in zip(*vectors)]
    norm = math.sqrt(sum(x * x for x in mean))
    return [x / norm for x in mean] if norm > 0 else mean


def main():
    config = yaml.safe_load(CONFIG.read_text())
    OUTPUT.parent.mkdir(parents=True, exist_ok=True)

    centroids = {
        r["name"]: normalized_mean([embed(u) for u in r["utterances"]])
        for r in config["routes"]
    }

    def classify(prompt):
        scores = {
            name: sum(a * b for a, b in zip(embed(prompt), centroid))
            for name, centroid in centroids.items()
        }
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[0], (ranked[1] if len(ranked) > 1 else (None, -1.0))

    # Tokens appearing in exactly one category anchor each prompt firmly to
    # its own route under a bag-of-words encoder.
    category_tokens = {
        r["name"]: {t for u in r["utterances"] for t in tokens(u)}
        for r in config["routes"]
    }
    counts = {}
    for vocab in category_tokens.values():
        for t in vocab:
            counts[t] = counts.get(t, 0) + 1

    lines = []
    for route in config["routes"]:
        name = route["name"]
        utterances = route["utterances"]
        distinctive = sorted(t for t in category_tokens[name] if counts[t] == 1)
        rng = random.Random(f"sample-{name}")
        for i in range(QUERIES_PER_CATEGORY):
            for _ in range(1000):
                base = rng.choice(utterances)
                pool = [t for t in distinctive if t not in tokens(base)]
                extra_a = " ".join(rng.sample(pool, k=min(4, len(pool))))
                extra_b = " ".join(rng.sample(pool, k=min(3, len(pool))))
                template = rng.choice(TEMPLATES)
                prompt = template.format(a=base, b=extra_a) + " " + extra_b
                (winner, score), (_, runner_up) = classify(prompt)
                if winner == name and score >= MIN_SCORE and \
                        score - runner_up >= MIN_MARGIN:
                    break
            else:
                raise SystemExit(f"could not build a clean prompt for {name}")
            lines.append(
                json.dumps(
                    {"id": f"{name}-{i:03d}", "category": name,
                     "prompt": prompt},
                    ensure_ascii=False,
                )
            )
    OUTPUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} queries to {OUTPUT}")


if __name__ == "__main__":
    main()
