"""Command line interface.

Progress goes to stderr; artifacts are written atomically.  Exit
codes: 0 success, 1 usage, 2 unreadable or malformed input (bundle
records, missing terminators, broken checkpoints), 3 model constraint
violations (vocabulary misses, shape conflicts).
"""

from __future__ import annotations

import json
import os
import sys
import tempfile

import click
import numpy as np

from .bundles import read_bundles
from .decoding import greedy_complete
from .errors import (BundleError, CtxLmError, MissingSumToken, ShapeMismatch,
                     VocabularyMiss)
from .model import (ENTITY_STATE_SOURCES, POOLING_MODES, ModelConfig,
                    load_model, save_model)
from .training import build_vocabulary, train_on_bundles


def _write_atomic(path: str, data: bytes) -> None:
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".ctxlm-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


@click.group()
def cli() -> None:
    """Train and run a toy completion model over prompt bundles."""


@cli.command("train")
@click.option("--bundles", "bundles_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Prompt bundle JSONL to train on.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Where to write the model checkpoint.")
@click.option("--steps", type=int, default=100, show_default=True,
              help="Optimizer steps (one bundle each).")
@click.option("--log-every", type=int, default=0, show_default=True,
              help="Checkpoint window; 0 means one pass over the data.")
@click.option("--lr", type=float, default=0.01, show_default=True,
              help="Peak learning rate; decays linearly to zero.")
@click.option("--layers", type=int, default=2, show_default=True,
              help="Transformer layers (1 or 2).")
@click.option("--d-model", type=int, default=48, show_default=True,
              help="Hidden width (at most 64).")
@click.option("--block-size", type=int, default=320, show_default=True,
              help="Longest token stream the model sees.")
@click.option("--max-entities", type=int, default=16, show_default=True,
              help="Entities consumed per bundle.")
@click.option("--entity-char-cap", type=int, default=256, show_default=True,
              help="Token cap per entity sequence.")
@click.option("--pooling", type=click.Choice(POOLING_MODES),
              default="sum_token", show_default=True,
              help="How an entity sequence becomes one vector.")
@click.option("--entity-states", type=click.Choice(ENTITY_STATE_SOURCES),
              default="final", show_default=True,
              help="Which encoder states feed the fusion layers.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Initialization seed.")
@click.option("--loss-log", "loss_log_path", default=None,
              type=click.Path(dir_okay=False),
              help="Optional JSONL of checkpoint losses.")
def train_cmd(bundles_path: str, out: str, steps: int, log_every: int,
              lr: float, layers: int, d_model: int, block_size: int,
              max_entities: int, entity_char_cap: int, pooling: str,
              entity_states: str, seed: int, loss_log_path) -> None:
    """Train a model on a bundle file and save a checkpoint."""
    bundles = read_bundles(bundles_path)
    vocab = build_vocabulary(bundles)
    try:
        config = ModelConfig(
            vocab_size=vocab.size, sum_token_id=vocab.sum_id,
            d_model=d_model, n_layers=layers, block_size=block_size,
            max_entities=max_entities, entity_char_cap=entity_char_cap,
            pooling=pooling, entity_states=entity_states, seed=seed)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc

    def report(step: int, loss: float) -> None:
        click.echo(f"step {step:>5}/{steps} | loss {loss:.4f}", err=True)

    model, log = train_on_bundles(bundles, config, vocab, steps=steps,
                                  lr=lr, log_every=log_every,
                                  on_checkpoint=report)
    save_model(out, model, vocab)
    if loss_log_path:
        lines = "".join(
            json.dumps({"step": step, "loss": loss}, sort_keys=True,
                       separators=(",", ":")) + "\n"
            for step, loss in log.checkpoints)
        _write_atomic(loss_log_path, lines.encode("utf-8"))
    n_params = sum(p.size for p in model.params.values())
    click.echo(f"trained {steps} steps over {len(bundles)} bundles "
               f"({n_params} params, vocab {vocab.size}) -> {out}", err=True)


@cli.command("predict")
@click.option("--bundles", "bundles_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Prompt bundle JSONL to complete.")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Checkpoint written by train.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Where to write the predictions JSONL.")
@click.option("--max-new-tokens", type=int, default=96, show_default=True,
              help="Generation cap per bundle.")
def predict_cmd(bundles_path: str, model_path: str, out: str,
                max_new_tokens: int) -> None:
    """Complete every bundle and write predictions."""
    bundles = read_bundles(bundles_path)
    try:
        model, vocab = load_model(model_path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise BundleError(f"cannot load checkpoint {model_path}: {exc}") \
            from exc
    rows = [(bundle.bundle_id,
             greedy_complete(model, vocab, bundle,
                             max_new_tokens=max_new_tokens))
            for bundle in bundles]
    lines = "".join(
        json.dumps({"bundle_id": bundle_id, "prediction": prediction},
                   sort_keys=True, ensure_ascii=False,
                   separators=(",", ":")) + "\n"
        for bundle_id, prediction in rows)
    _write_atomic(out, lines.encode("utf-8"))
    click.echo(f"wrote {len(rows)} predictions -> {out}", err=True)


def main(argv=None) -> int:
    """Entry point; returns an exit code instead of raising SystemExit."""
    try:
        cli.main(args=argv, standalone_mode=False,
                 auto_envvar_prefix="CTXLM")
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.exceptions.ClickException as exc:
        exc.show()
        return 1
    except (BundleError, MissingSumToken) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (VocabularyMiss, ShapeMismatch) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except CtxLmError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
