"""Record the scripted session's API exchange for the web UI test suite.

Trains the bundled toy model, drives the same 3-answer scripted session the
acceptance suite uses, and writes every request/response pair (including the
full session view fetched after each step) to
frontend/test/fixtures/scripted_session.json.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = ROOT / "src" / "qir" / "data"
FIXTURE_PATH = ROOT / "frontend" / "test" / "fixtures" / "scripted_session.json"

SCRIPTED_ANSWERS = (
    "qqq zzz",
    "plumora crenith plumvia crenpol",
    "crenith crenvok crenpol crenmur crenzia crentok",
)


def main() -> None:
    sys.path.insert(0, str(ROOT / "src"))
    from fastapi.testclient import TestClient

    from qir.config import load_config
    from qir.qgen import (Hyperparams, Seq2SeqModel, TrainingCorpus,
                          build_vocab, save_checkpoint, train)
    from qir.service import build_app

    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        pairs = TrainingCorpus.load_jsonl(DATA_DIR / "toy_train.jsonl")
        model = Seq2SeqModel(build_vocab(pairs), embed_dim=12, hidden_dim=24, seed=5)
        train(model, pairs, mode="sentence",
              hyper=Hyperparams(epochs=250, learning_rate=0.01))
        ckpt = tmp_path / "toy_model.json"
        save_checkpoint(model, ckpt)

        conf = tmp_path / "qir.conf"
        conf.write_text(
            f"corpus_path = {DATA_DIR / 'toy_corpus.jsonl'}\n"
            f"corpus_format = jsonl\n"
            f"embeddings_path = {DATA_DIR / 'toy_vectors.txt'}\n"
            f"model_path = {ckpt}\n"
            f"store_dir = {tmp_path / 'sessions'}\n"
            f"delta = 0.8\nseed = 0\nresult_size = 3\n",
            encoding="utf-8")
        app = build_app(load_config(conf))

        exchanges = []

        def record(client, method, path, body=None):
            if method == "GET":
                response = client.get(path)
            else:
                response = client.post(path, json=body)
            exchanges.append({
                "method": method,
                "path": path,
                "request_body": body,
                "status": response.status_code,
                "response_body": response.json(),
            })
            return response.json()

        with TestClient(app) as client:
            started = record(client, "POST", "/sessions", {"query": "find the veld condition"})
            sid = started["session_id"]
            record(client, "GET", f"/sessions/{sid}")
            for answer in SCRIPTED_ANSWERS:
                record(client, "POST", f"/sessions/{sid}/answer", {"answer": answer})
                record(client, "GET", f"/sessions/{sid}")
            # one extra answer on a finished session: the 409 the UI must render
            record(client, "POST", f"/sessions/{sid}/answer", {"answer": "anything"})

    FIXTURE_PATH.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE_PATH.write_text(json.dumps(exchanges, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    print(f"wrote {FIXTURE_PATH} ({len(exchanges)} exchanges)")


if __name__ == "__main__":
    main()
