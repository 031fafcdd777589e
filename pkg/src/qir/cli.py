"""Command-line interface: one subcommand per pipeline stage."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import corpus as corpus_mod
from . import qgen, session as sess, texteval
from .clustering import bakeoff
from .config import load_config
from .embedding import embed_phrase, load_embeddings, pca_fit, pca_transform
from .service import load_context


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for every randomized step.")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Service config file (used by session/serve).")
@click.pass_context
def main(ctx, seed, config_path):
    """Interactive corpus retrieval through generated questions."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["config_path"] = config_path


@main.command()
@click.option("--path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["lines", "jsonl"]), default="lines",
              show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write normalized documents as JSONL.")
def ingest(path, fmt, out):
    """Read a corpus file and run the preprocessing pipeline."""
    docs = corpus_mod.ingest(path, fmt)
    n_sentences = sum(len(d.sentences) for d in docs)
    n_tokens = sum(len(list(d.tokens())) for d in docs)
    click.echo(f"documents: {len(docs)}  sentences: {n_sentences}  tokens: {n_tokens}")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            for d in docs:
                fh.write(json.dumps({"id": d.id, "lemmas": d.lemmas()}) + "\n")
        click.echo(f"wrote {out}")


@main.command()
@click.option("--vectors", required=True, type=click.Path(exists=True))
@click.option("--path", required=True, type=click.Path(exists=True),
              help="Corpus file to embed.")
@click.option("--format", "fmt", type=click.Choice(["lines", "jsonl"]), default="lines",
              show_default=True)
@click.option("--pca-dim", type=int, default=None, help="Reduce to this dimension.")
@click.option("--out", type=click.Path(), default=None,
              help="Write document vectors in word-vector text format.")
def embed(vectors, path, fmt, pca_dim, out):
    """Embed every document by mean-pooled word vectors, optionally with PCA."""
    table = load_embeddings(vectors)
    docs = corpus_mod.ingest(path, fmt)
    embedded = [(d.id, embed_phrase(d.lemmas(), table)) for d in docs]
    if pca_dim is not None:
        model = pca_fit([v for _, v in embedded], pca_dim)
        embedded = [(i, pca_transform(model, v)) for i, v in embedded]
    dim = len(embedded[0][1])
    click.echo(f"embedded {len(embedded)} documents at dimension {dim}")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            for doc_id, vec in embedded:
                fh.write(doc_id + " " + " ".join(f"{x:.17g}" for x in vec) + "\n")
        click.echo(f"wrote {out}")


@main.command("cluster-bakeoff")
@click.option("--data", required=True, type=click.Path(exists=True),
              help='Labelled JSONL: {"text": ..., "category": ...} per line.')
@click.option("--vectors", required=True, type=click.Path(exists=True))
@click.option("--k", type=int, default=3, show_default=True)
@click.option("--json-out", type=click.Path(), default=None)
@click.pass_context
def cluster_bakeoff(ctx, data, vectors, k, json_out):
    """Score all four clustering algorithms with BCubed on labelled data."""
    table = load_embeddings(vectors)
    points, labels = [], []
    with open(data, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            tokens = corpus_mod.preprocess(record["text"])
            points.append(embed_phrase(tokens, table))
            labels.append(record["category"])
    report = bakeoff(np.array(points), labels, k=k, seed=ctx.obj["seed"])
    click.echo(report.to_text())
    if json_out:
        Path(json_out).write_text(report.to_json(), encoding="utf-8")
        click.echo(f"wrote {json_out}")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True),
              help='Training pairs JSONL: {"answer": ..., "question": ...}.')
@click.option("--mode", type=click.Choice(["sentence", "word"]), default="sentence",
              show_default=True)
@click.option("--epochs", type=int, default=20, show_default=True)
@click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default="adam",
              show_default=True)
@click.option("--lr", type=float, default=0.01, show_default=True)
@click.option("--embed-dim", type=int, default=qgen.DEFAULT_EMBED_DIM, show_default=True)
@click.option("--hidden-dim", type=int, default=qgen.DEFAULT_HIDDEN_DIM, show_default=True)
@click.option("--min-count", type=int, default=1, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def train(ctx, data, mode, epochs, optimizer, lr, embed_dim, hidden_dim, min_count, out):
    """Train the question generator and save a checkpoint."""
    pairs = qgen.TrainingCorpus.load_jsonl(data)
    vocab = qgen.build_vocab(pairs, min_count=min_count)
    model = qgen.Seq2SeqModel(vocab, embed_dim=embed_dim, hidden_dim=hidden_dim,
                              seed=ctx.obj["seed"])
    hyper = qgen.Hyperparams(optimizer=optimizer, learning_rate=lr, epochs=epochs,
                             min_count=min_count)
    for stat in qgen.train(model, pairs, mode=mode, hyper=hyper):
        click.echo(f"epoch {stat.epoch:3d}  loss {stat.loss:10.4f}  "
                   f"perplexity {stat.perplexity:8.4f}  accuracy {stat.accuracy:.3f}")
    qgen.save_checkpoint(model, out)
    click.echo(f"wrote {out}")


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--json-out", type=click.Path(), default=None)
def eval_cmd(model_path, data, json_out):
    """Evaluate a checkpoint on labelled pairs: METEOR, BLEU, perplexity."""
    model = qgen.load_checkpoint(model_path)
    pairs = qgen.TrainingCorpus.load_jsonl(data)
    records = []
    for answer, question in pairs.pairs:
        predicted, token_nlls = qgen.score_for_eval(model, answer, question)
        records.append(texteval.PredictionRecord(
            predicted=tuple(predicted) if predicted else ("<empty>",),
            reference=question, token_nlls=tuple(token_nlls)))
    report = texteval.summarize(records)
    click.echo(report.to_text())
    if json_out:
        Path(json_out).write_text(report.to_json(), encoding="utf-8")
        click.echo(f"wrote {json_out}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--input", "text", required=True, help="Word or sentence to ask about.")
def ask(model_path, text):
    """Generate one question from a word or sentence."""
    model = qgen.load_checkpoint(model_path)
    tokens = text.lower().split()
    click.echo(" ".join(qgen.generate_question(model, tokens)))


@main.command()
@click.pass_context
def session(ctx):
    """Interactive terminal retrieval session (same loop as the HTTP API)."""
    config = _require_config(ctx)
    context, docs = load_context(config)
    query = click.prompt("query")
    s = sess.start_session(docs, query, context, "terminal",
                           delta=config.delta, seed=config.seed,
                           result_size=config.result_size)
    while s.phase == sess.AWAITING:
        click.echo(f"\nQ: {s.question}")
        answer = click.prompt("A")
        before = len(s.history)
        s = sess.submit_answer(s, answer, context)
        if len(s.history) == before:
            click.echo("(could not interpret that answer, try again)")
            continue
        turn = s.history[-1]
        click.echo(f"[{turn.action}] score {turn.score:.3f}  remaining {s.remaining()}")
    click.echo(f"\nsession {s.phase}")
    for row in s.result or []:
        click.echo(f"  {row['doc_id']}: {row['text']}  (score {row['score']:.3f})")


@main.command()
@click.pass_context
def serve(ctx):
    """Run the HTTP session API."""
    from .service import serve as run_service

    run_service(_require_config(ctx))


def _require_config(ctx):
    path = ctx.obj.get("config_path")
    if not path:
        click.echo("error: --config is required for this command", err=True)
        sys.exit(2)
    return load_config(path)


if __name__ == "__main__":
    main()
