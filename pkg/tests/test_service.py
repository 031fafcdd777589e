import json
from pathlib import Path

import jsonschema
import pytest
from fastapi.testclient import TestClient

from conftest import DATA_DIR, TOY_ORACLE_ANSWERS, TOY_TARGET_DOC
from qir.config import ConfigError, load_config
from qir.service import build_app

SCHEMA_PATH = Path(__file__).resolve().parent.parent / "src" / "qir" / "schemas" / \
    "session_view.schema.json"


@pytest.fixture()
def client(service_dir):
    config = load_config(service_dir / "qir.conf")
    app = build_app(config)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


class TestConfig:
    def test_load_and_env_override(self, service_dir):
        config = load_config(service_dir / "qir.conf")
        assert config.delta == 0.8 and config.result_size == 3
        config = load_config(service_dir / "qir.conf", env={"QIR_DELTA": "0.5"})
        assert config.delta == 0.5

    def test_missing_path_rejected(self, service_dir, tmp_path):
        bad = tmp_path / "bad.conf"
        bad.write_text("corpus_path = /nonexistent\n"
                       f"embeddings_path = {DATA_DIR / 'toy_vectors.txt'}\n"
                       f"model_path = {DATA_DIR / 'toy_vectors.txt'}\n"
                       f"store_dir = {tmp_path}\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="corpus_path"):
            load_config(bad)

    def test_bad_delta_rejected(self, service_dir):
        with pytest.raises(ConfigError, match="delta"):
            load_config(service_dir / "qir.conf", env={"QIR_DELTA": "1.5"})

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.conf"
        bad.write_text("mystery = 1\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(bad)


class TestEndpoints:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}

    def test_start_session(self, client):
        response = client.post("/sessions", json={"query": "find my condition"})
        assert response.status_code == 200
        body = response.json()
        assert body["state"] == "awaiting_answer"
        assert body["question"]
        assert body["session_id"] == "s000001"

    def test_unknown_session_404(self, client):
        assert client.post("/sessions/nope/answer",
                           json={"answer": "x"}).status_code == 404
        assert client.get("/sessions/nope").status_code == 404

    def test_malformed_body_400(self, client):
        response = client.post("/sessions", json={"wrong": "field"})
        assert response.status_code == 400
        assert "error" in response.json()

    def test_answer_flow_and_wrong_phase_409(self, client):
        session_id = client.post("/sessions", json={"query": "q"}).json()["session_id"]
        for answer in TOY_ORACLE_ANSWERS:
            response = client.post(f"/sessions/{session_id}/answer",
                                   json={"answer": answer})
            assert response.status_code == 200
            body = response.json()
            assert body["turn"]["action"] in ("kept", "eliminated", "reclustered",
                                              "terminated")
        assert body["state"] == "converged"
        assert body["result"][0]["doc_id"] == TOY_TARGET_DOC
        response = client.post(f"/sessions/{session_id}/answer",
                               json={"answer": "more"})
        assert response.status_code == 409

    def test_full_view_matches_schema(self, client):
        schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
        session_id = client.post("/sessions", json={"query": "q"}).json()["session_id"]
        view = client.get(f"/sessions/{session_id}").json()
        jsonschema.validate(view, schema)
        assert view["crm"]["n"] == len(view["clusters"])
        assert len(view["crm"]["entries"]) == view["crm"]["n"] ** 2
        client.post(f"/sessions/{session_id}/answer",
                    json={"answer": TOY_ORACLE_ANSWERS[0]})
        view = client.get(f"/sessions/{session_id}").json()
        jsonschema.validate(view, schema)
        assert view["crm"]["n"] == len(view["clusters"])
        assert len(view["history"]) == 1

    def test_http_session_matches_in_process(self, client, toy_docs, toy_context):
        from qir.session import start_session, submit_answer
        reference = start_session(toy_docs, "q", toy_context, "ref",
                                  delta=0.8, seed=0)
        for answer in TOY_ORACLE_ANSWERS:
            reference = submit_answer(reference, answer, toy_context)
        session_id = client.post("/sessions", json={"query": "q"}).json()["session_id"]
        for answer in TOY_ORACLE_ANSWERS:
            body = client.post(f"/sessions/{session_id}/answer",
                               json={"answer": answer}).json()
        assert body["state"] == reference.phase
        assert body["result"] == reference.result
        view = client.get(f"/sessions/{session_id}").json()
        assert [t["score"] for t in view["history"]] == \
            [t.score for t in reference.history]

    def test_reprompt_turn_is_null(self, client):
        session_id = client.post("/sessions", json={"query": "q"}).json()["session_id"]
        body = client.post(f"/sessions/{session_id}/answer",
                           json={"answer": "!!!"}).json()
        assert body["turn"] is None
        assert body["state"] == "awaiting_answer"


class TestCli:
    def test_ingest_and_bakeoff_and_ask(self, toy_checkpoint, tmp_path):
        from click.testing import CliRunner
        from qir.cli import main

        runner = CliRunner()
        result = runner.invoke(main, ["ingest", "--path",
                                      str(DATA_DIR / "toy_corpus.jsonl"),
                                      "--format", "jsonl"])
        assert result.exit_code == 0
        assert "documents: 12" in result.output

        out = tmp_path / "report.json"
        result = runner.invoke(main, [
            "cluster-bakeoff", "--data", str(DATA_DIR / "mini_corpus.jsonl"),
            "--vectors", str(DATA_DIR / "mini_vectors.txt"), "--k", "3",
            "--json-out", str(out)])
        assert result.exit_code == 0, result.output
        assert "KMeans with Euclidean" in result.output
        report = json.loads(out.read_text(encoding="utf-8"))
        assert set(report["scores"]) == {"spherical", "kmeans", "ward", "gmm"}

        result = runner.invoke(main, ["ask", "--model", str(toy_checkpoint),
                                      "--input", "veldrin veldrox veldra"])
        assert result.exit_code == 0
        assert result.output.strip()

    def test_train_eval_round_trip(self, tmp_path):
        from click.testing import CliRunner
        from qir.cli import main

        data = tmp_path / "pairs.jsonl"
        data.write_text(
            '{"answer": "fever", "question": "do you have fever ?"}\n'
            '{"answer": "rash", "question": "is it itchy ?"}\n',
            encoding="utf-8")
        ckpt = tmp_path / "m.json"
        runner = CliRunner()
        result = runner.invoke(main, [
            "train", "--data", str(data), "--epochs", "3", "--embed-dim", "4",
            "--hidden-dim", "4", "--out", str(ckpt)])
        assert result.exit_code == 0, result.output
        assert "epoch   3" in result.output
        result = runner.invoke(main, ["eval", "--model", str(ckpt),
                                      "--data", str(data)])
        assert result.exit_code == 0, result.output
        assert "METEOR" in result.output

    def test_embed_command(self, tmp_path):
        from click.testing import CliRunner
        from qir.cli import main

        runner = CliRunner()
        out = tmp_path / "docvecs.txt"
        result = runner.invoke(main, [
            "embed", "--vectors", str(DATA_DIR / "toy_vectors.txt"),
            "--path", str(DATA_DIR / "toy_corpus.jsonl"), "--format", "jsonl",
            "--pca-dim", "2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "dimension 2" in result.output
        assert len(out.read_text(encoding="utf-8").splitlines()) == 12
