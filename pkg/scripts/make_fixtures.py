"""Regenerate the bundled data files under src/qir/data/.

Everything is derived deterministically from fixed seeds; rerunning must
reproduce the committed files byte for byte.  The script verifies the
properties the test suite relies on (bake-off ordering, toy-session
cluster geometry) and fails loudly if a regeneration breaks them.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "qir" / "data"

MINI_DIM = 12
MINI_SEED = 20240613
ITEMS_PER_CATEGORY = 104


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def make_mini_corpus() -> None:
    """3-category labelled corpus for the clustering bake-off.

    Categories sit in Euclidean-separable blobs; two of them share a
    direction and differ mainly in magnitude, which cosine-based clustering
    cannot see.  That reproduces the published ranking with K-Means on top.
    """
    rng = np.random.default_rng(MINI_SEED)

    symptom_words = [
        "fever", "chill", "cough", "nausea", "fatigue", "dizzy", "itch",
        "cramp", "swelling", "rash", "ache", "tingle", "stiffness", "tremor",
        "wheeze", "blur", "numbness", "soreness", "throb", "burn",
    ] + [f"{a}-{b}" for a in ("head", "chest", "back", "joint", "throat",
                              "skin", "eye", "ear", "nose", "muscle")
         for b in ("ache", "pain", "burn", "itch")]
    disease_words = [f"{a}{b}" for a in ("arthr", "bronch", "dermat", "gastr",
                                         "hepat", "nephr", "neur", "sinus",
                                         "tonsill", "vascul")
                     for b in ("itis", "osis", "opathy", "algia")] + [
        "anemia", "asthma", "diabetes", "eczema", "influenza", "malaria",
        "measles", "migraine", "pneumonia", "psoriasis", "sciatica", "vertigo",
        "angina", "colitis", "glaucoma", "lupus", "rosacea", "shingle",
        "tetanus", "typhoid",
    ]
    medicine_words = [f"{a}{b}" for a in ("amo", "cefa", "doxi", "eryth",
                                          "keto", "lisino", "meto", "ateno",
                                          "predni", "rani")
                      for b in ("cillin", "mycin", "zole", "pril", "olol",
                                "statin")]

    u = np.zeros(MINI_DIM)
    u[0] = 1.0
    v = np.zeros(MINI_DIM)
    v[1] = 1.0
    w = np.zeros(MINI_DIM)
    w[2] = 1.0
    centers = {
        "symptom": 2.0 * u + 0.2 * w,
        "disease": 5.6 * u - 0.2 * w,     # same direction as symptom: cosine-blind
        "medicine": 3.5 * v,
    }
    sigma = 0.4

    sys.path.insert(0, str(DATA_DIR.parent.parent))
    from qir.corpus import preprocess

    # store vectors under lemma forms so the ingestion pipeline finds them
    vocab: dict[str, np.ndarray] = {}
    categories = {
        "symptom": symptom_words,
        "disease": disease_words,
        "medicine": medicine_words,
    }
    for category, words in categories.items():
        for word in words:
            lemma = preprocess(word)[0].lemma
            if lemma not in vocab:
                vocab[lemma] = centers[category] + rng.normal(0.0, sigma, MINI_DIM)

    items = []
    for category, words in categories.items():
        for _ in range(ITEMS_PER_CATEGORY):
            count = int(rng.integers(1, 4))
            chosen = list(rng.choice(words, size=count, replace=False))
            items.append({"text": " ".join(chosen), "category": category})
    order = rng.permutation(len(items))
    items = [items[i] for i in order]

    with open(DATA_DIR / "mini_corpus.jsonl", "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item, sort_keys=True) + "\n")
    with open(DATA_DIR / "mini_vectors.txt", "w", encoding="utf-8") as fh:
        for word in sorted(vocab):
            fh.write(word + " " + " ".join(_fmt(x) for x in vocab[word]) + "\n")
    print(f"mini corpus: {len(items)} items, vocab {len(vocab)}, dim {MINI_DIM}")


TOY_SEED = 912
TOY_DIM = 4

# word -> blob center; the "veld" sub-blob holds the planted target document
TOY_BLOBS = {
    "veldrin": (0.0, 8.0, 4.0, 0.0), "veldrox": (0.0, 8.0, 4.0, 0.0),
    "veldra": (0.0, 8.0, 4.0, 0.0),
    "morvek": (0.0, 8.0, -2.0, 1.0), "morvin": (0.0, 8.0, -2.0, 1.0),
    "morvax": (0.0, 8.0, -2.0, 1.0),
    "tharnel": (0.0, 8.0, -2.0, -1.0), "tharnok": (0.0, 8.0, -2.0, -1.0),
    "tharnix": (0.0, 8.0, -2.0, -1.0),
    "plumora": (1.0, 0.0, 0.0, 0.0), "plumrek": (1.0, 0.0, 0.0, 0.0),
    "plumvia": (1.0, 0.0, 0.0, 0.0), "plumnor": (1.0, 0.0, 0.0, 0.0),
    "plumtek": (1.0, 0.0, 0.0, 0.0), "plumzel": (1.0, 0.0, 0.0, 0.0),
    "crenith": (3.0, 0.0, 0.0, 0.0), "crenvok": (3.0, 0.0, 0.0, 0.0),
    "crenpol": (3.0, 0.0, 0.0, 0.0), "crenmur": (3.0, 0.0, 0.0, 0.0),
    "crenzia": (3.0, 0.0, 0.0, 0.0), "crentok": (3.0, 0.0, 0.0, 0.0),
}

TOY_DOCS = [
    ("veld-target", "veldrin veldrox veldra"),
    ("morv-1", "morvek morvin"),
    ("morv-2", "morvax morvek"),
    ("tharn-1", "tharnel tharnok"),
    ("tharn-2", "tharnix tharnel"),
    ("plum-1", "plumora plumrek"),
    ("plum-2", "plumvia plumnor"),
    ("plum-3", "plumtek plumzel"),
    ("plum-4", "plumora plumtek"),
    ("cren-1", "crenith crenvok"),
    ("cren-2", "crenpol crenmur"),
    ("cren-3", "crenzia crentok"),
]


def make_toy_session() -> None:
    """12-document corpus with a planted target and its question templates."""
    rng = np.random.default_rng(TOY_SEED)
    vocab = {w: np.array(c) + rng.normal(0.0, 0.03, TOY_DIM)
             for w, c in TOY_BLOBS.items()}

    with open(DATA_DIR / "toy_vectors.txt", "w", encoding="utf-8") as fh:
        for word in sorted(vocab):
            fh.write(word + " " + " ".join(_fmt(x) for x in vocab[word]) + "\n")
    with open(DATA_DIR / "toy_corpus.jsonl", "w", encoding="utf-8") as fh:
        for doc_id, text in TOY_DOCS:
            fh.write(json.dumps({"id": doc_id, "text": text}, sort_keys=True) + "\n")
    with open(DATA_DIR / "toy_train.jsonl", "w", encoding="utf-8") as fh:
        for _, text in TOY_DOCS:
            first = text.split()[0]
            fh.write(json.dumps({"answer": text,
                                 "question": f"do you have {first} ?"},
                                sort_keys=True) + "\n")
    print(f"toy session: {len(TOY_DOCS)} docs, vocab {len(vocab)}, dim {TOY_DIM}")


def verify() -> None:
    sys.path.insert(0, str(DATA_DIR.parent.parent))
    from qir.clustering import bakeoff
    from qir.corpus import preprocess
    from qir.embedding import embed_phrase, load_embeddings

    table = load_embeddings(DATA_DIR / "mini_vectors.txt")
    points, labels = [], []
    with open(DATA_DIR / "mini_corpus.jsonl", encoding="utf-8") as fh:
        for line in fh:
            item = json.loads(line)
            points.append(embed_phrase(preprocess(item["text"]), table))
            labels.append(item["category"])
    for seed in range(5):
        report = bakeoff(np.array(points), labels, k=3, seed=seed)
        if seed == 0:
            print(report.to_text())
        km = report.scores["kmeans"].f1
        for name, score in report.scores.items():
            if name != "kmeans" and km < score.f1 - 0.02:
                raise SystemExit(f"seed {seed}: bake-off ordering broken: "
                                 f"kmeans {km:.3f} < {name} {score.f1:.3f}")
        if km < report.scores["spherical"].f1 + 0.05:
            raise SystemExit(f"seed {seed}: expected a clear kmeans-over-spherical gap")
    print("bake-off ordering OK for seeds 0..4")


if __name__ == "__main__":
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    make_mini_corpus()
    make_toy_session()
    verify()
