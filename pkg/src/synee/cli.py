"""Batch command-line surface: preprocess, train, predict, evaluate, ablate."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import pipeline
from .align import FeatureEncoder, FeatureSpace, read_records, write_records
from .annotate import AnnotationCache, annotate_sentences
from .config import RunConfig
from .corpus import load_schema, load_sentences, resplit_dev
from .errors import ConfigError, SyneeError
from .metrics import MetricsReport, score_dataset
from .model import VARIANT_ORDER, EventTagger

logger = logging.getLogger(__name__)

VARIANT_NAMES = [v.value for v in VARIANT_ORDER]
SPLITS = ("train", "validation", "test")


def load_config(config_path: str | None, **overrides) -> RunConfig:
    config = RunConfig.from_file(config_path) if config_path else RunConfig()
    config = config.apply_overrides(**overrides)
    logger.info("seed: %d", config.seed)
    return config


def require(path: Path | str, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


config_option = click.option("--config", "config_path", type=click.Path(), default=None,
                             help="YAML run configuration; flags override it.")
seed_option = click.option("--seed", type=int, default=None)
encoder_option = click.option("--encoder", type=str, default=None)
variant_option = click.option("--variant", type=click.Choice(VARIANT_NAMES), default=None)
subtask_option = click.option("--subtask", type=click.Choice(["trigger", "role"]), default=None)


@click.group()
@click.option("--verbose", is_flag=True, help="Log at DEBUG level.")
def cli(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@config_option
@seed_option
@encoder_option
@click.option("--out", type=click.Path(), default=None, help="Preprocessed output directory.")
def preprocess(config_path, seed, encoder, out):
    """Resplit, annotate (cached), align, and label-encode the corpus."""
    config = load_config(config_path, seed=seed, encoder=encoder)
    schema = load_schema(require(config.schema_file, "schema file"))
    click.echo(f"schema: {len(schema)} event types")
    train = load_sentences(require(config.train_file, "training corpus"), schema)
    dev = load_sentences(require(config.dev_file, "development corpus"), schema)
    validation, test = resplit_dev(dev)
    splits = {"train": train, "validation": validation, "test": test}

    annotator = config.make_annotator()
    out_dir = Path(out) if out else config.preprocessed_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    config.cache_dir.mkdir(parents=True, exist_ok=True)

    pairs_by_split = {}
    for split, sentences in splits.items():
        cache = AnnotationCache(config.cache_dir / f"{split}.jsonl")
        annotations, stats = annotate_sentences(
            sentences, annotator, cache, max_workers=config.annotator.workers
        )
        click.echo(
            f"{split}: {len(sentences)} sentences, cache hits {stats.cache_hits}, "
            f"annotator calls {stats.annotator_calls}, skipped {stats.skipped}"
        )
        pairs_by_split[split] = [
            (sentence, annotations[sentence.id])
            for sentence in sentences
            if sentence.id in annotations
        ]

    feature_encoder = FeatureEncoder(
        encoder_name=config.encoder, max_tokens=config.max_tokens, latin_chunk=config.latin_chunk
    )
    feature_encoder.fit(pairs_by_split["train"], schema=schema)
    feature_encoder.feature_space_.save(out_dir / "feature_space.json")
    for split, pairs in pairs_by_split.items():
        count = write_records(out_dir / f"{split}.jsonl", feature_encoder.transform(pairs))
        pipeline.write_predictions(out_dir / f"{split}.gold.jsonl", [s for s, _ in pairs])
        click.echo(f"{split}: wrote {count} records")


@cli.command()
@config_option
@seed_option
@encoder_option
@variant_option
@subtask_option
@click.option("--out", type=click.Path(), default=None, help="Checkpoint directory override.")
def train(config_path, seed, encoder, variant, subtask, out):
    """Train one subtask tagger and keep the best-validation checkpoint."""
    config = load_config(config_path, seed=seed, encoder=encoder, variant=variant, subtask=subtask)
    data_dir = require(config.preprocessed_dir, "preprocessed directory (run preprocess first)")
    feature_space = FeatureSpace.load(require(data_dir / "feature_space.json", "feature space"))
    records = read_records(require(data_dir / "train.jsonl", "train records"))
    validation = read_records(require(data_dir / "validation.jsonl", "validation records"))

    tagger = config.make_tagger()
    tagger.fit(records, feature_space, validation=validation)
    target = Path(out) if out else pipeline.checkpoint_path(
        config.checkpoint_dir, config.encoder, config.variant, config.subtask
    )
    tagger.save(target)
    summary = f"best epoch {tagger.best_epoch_}"
    if tagger.best_val_f1_ is not None:
        summary += f", validation F1 {tagger.best_val_f1_:.4f}"
    click.echo(f"saved checkpoint to {target} ({summary})")


@cli.command()
@config_option
@seed_option
@encoder_option
@variant_option
@click.option("--split", type=click.Choice(SPLITS), default="test")
@click.option("--out", type=click.Path(), required=True, help="Prediction file to write.")
def predict(config_path, seed, encoder, variant, split, out):
    """Run the two-stage pipeline over a preprocessed split."""
    config = load_config(config_path, seed=seed, encoder=encoder, variant=variant)
    schema = load_schema(require(config.schema_file, "schema file"))
    data_dir = require(config.preprocessed_dir, "preprocessed directory")
    records = read_records(require(data_dir / f"{split}.jsonl", f"{split} records"))
    taggers = {}
    for subtask in ("trigger", "role"):
        path = pipeline.checkpoint_path(config.checkpoint_dir, config.encoder, config.variant, subtask)
        require(path / "config.json", f"{subtask} checkpoint (train it first)")
        taggers[subtask] = EventTagger.load(path)
    events = pipeline.predict_events(taggers["trigger"], taggers["role"], records, schema)
    sentences = pipeline.events_as_sentences(events, records)
    pipeline.write_predictions(out, sentences)
    click.echo(f"wrote {len(sentences)} prediction records to {out}")


@cli.command()
@click.option("--gold", type=click.Path(), required=True)
@click.option("--predictions", type=click.Path(), required=True)
@click.option("--out", type=click.Path(), default=None, help="Write the report as JSON here.")
def evaluate(gold, predictions, out):
    """Token-level P/R/F1 of a prediction file against a gold file."""
    gold_sentences = load_sentences(require(gold, "gold file"))
    predicted_sentences = load_sentences(require(predictions, "prediction file"))
    report = MetricsReport(
        trigger=score_dataset(predicted_sentences, gold_sentences, "trigger"),
        role=score_dataset(predicted_sentences, gold_sentences, "role"),
    )
    click.echo("section\tprecision\trecall\tf1\ttp\tfp\tfn")
    for name in ("overall", "trigger", "role"):
        section = getattr(report, name)
        click.echo(
            f"{name}\t{section.precision:.4f}\t{section.recall:.4f}\t{section.f1:.4f}"
            f"\t{section.counts.tp}\t{section.counts.fp}\t{section.counts.fn}"
        )
    if out:
        import json

        Path(out).write_text(
            json.dumps(report.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8"
        )


@cli.command()
@config_option
@seed_option
@click.option("--encoder", "encoders", type=str, multiple=True,
              help="Encoder(s) to report on; defaults to the configured one.")
@click.option("--variant", "variants", type=click.Choice(VARIANT_NAMES), multiple=True,
              help="Variant subset; defaults to all five.")
@click.option("--train/--no-train", "do_train", default=False,
              help="Train any missing checkpoint before reporting.")
@click.option("--out", type=click.Path(), default=None, help="Report directory override.")
def ablate(config_path, seed, encoders, variants, do_train, out):
    """Emit the overall/trigger/role report tables across model variants."""
    config = load_config(config_path, seed=seed)
    schema = load_schema(require(config.schema_file, "schema file"))
    data_dir = require(config.preprocessed_dir, "preprocessed directory")
    feature_space = FeatureSpace.load(require(data_dir / "feature_space.json", "feature space"))
    records = read_records(require(data_dir / f"test.jsonl", "test records"))
    encoders = list(encoders) or [config.encoder]
    variants = list(variants) or VARIANT_NAMES

    if do_train:
        train_records = read_records(require(data_dir / "train.jsonl", "train records"))
        validation = read_records(require(data_dir / "validation.jsonl", "validation records"))
        for encoder in encoders:
            for variant in variants:
                for subtask in ("trigger", "role"):
                    target = pipeline.checkpoint_path(config.checkpoint_dir, encoder, variant, subtask)
                    if (target / "config.json").exists():
                        continue
                    click.echo(f"training {encoder}/{variant}/{subtask} ...")
                    cell = config.apply_overrides(encoder=encoder, variant=variant, subtask=subtask)
                    tagger = cell.make_tagger()
                    tagger.fit(train_records, feature_space, validation=validation)
                    tagger.save(target)

    golds = load_sentences(require(data_dir / "test.gold.jsonl", "gold test file"))
    report = pipeline.run_ablation(
        config.checkpoint_dir, encoders, variants, records, golds, schema
    )
    out_dir = Path(out) if out else config.report_dir
    report.write(out_dir)
    click.echo(report.to_tsv("overall"))
    click.echo(f"reports written to {out_dir}")


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except SyneeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
