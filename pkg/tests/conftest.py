from pathlib import Path

import pytest

from qir.corpus import LemmaTable, ingest
from qir.embedding import load_embeddings
from qir.qgen import (Hyperparams, Seq2SeqModel, TrainingCorpus, build_vocab,
                      save_checkpoint, train)
from qir.session import SessionContext

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "qir" / "data"

# the two scripted oracle answers for the bundled 12-document toy corpus:
# far-vocabulary words eliminate the plum/cren group first, then confirm the
# veld sub-cluster (scores precomputed in test_session/test_acceptance)
TOY_ORACLE_ANSWERS = (
    "plumora crenith plumvia crenpol",
    "crenith crenvok crenpol crenmur crenzia crentok",
)
# the 3-answer script shared by the end-to-end determinism check and the web
# UI fixture: an uninterpretable answer (re-prompt) followed by the oracle
TOY_SCRIPTED_ANSWERS = ("qqq zzz",) + TOY_ORACLE_ANSWERS
TOY_TARGET_DOC = "veld-target"


@pytest.fixture(scope="session")
def toy_table():
    return load_embeddings(DATA_DIR / "toy_vectors.txt")


@pytest.fixture(scope="session")
def toy_docs():
    return ingest(DATA_DIR / "toy_corpus.jsonl", "jsonl")


@pytest.fixture(scope="session")
def toy_pairs():
    return TrainingCorpus.load_jsonl(DATA_DIR / "toy_train.jsonl")


@pytest.fixture(scope="session")
def toy_model(toy_pairs):
    model = Seq2SeqModel(build_vocab(toy_pairs), embed_dim=12, hidden_dim=24, seed=5)
    train(model, toy_pairs, mode="sentence",
          hyper=Hyperparams(epochs=250, learning_rate=0.01))
    return model


@pytest.fixture(scope="session")
def toy_context(toy_table, toy_model):
    return SessionContext(table=toy_table, model=toy_model,
                          lemma_table=LemmaTable.bundled())


@pytest.fixture(scope="session")
def toy_checkpoint(toy_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "toy_model.json"
    save_checkpoint(toy_model, path)
    return path


@pytest.fixture(scope="session")
def service_dir(toy_checkpoint, tmp_path_factory):
    """Config + store directory for HTTP service tests."""
    root = tmp_path_factory.mktemp("service")
    store = root / "sessions"
    config = root / "qir.conf"
    config.write_text(
        f"corpus_path = {DATA_DIR / 'toy_corpus.jsonl'}\n"
        f"corpus_format = jsonl\n"
        f"embeddings_path = {DATA_DIR / 'toy_vectors.txt'}\n"
        f"model_path = {toy_checkpoint}\n"
        f"store_dir = {store}\n"
        f"delta = 0.8\n"
        f"seed = 0\n"
        f"result_size = 3\n",
        encoding="utf-8")
    return root
