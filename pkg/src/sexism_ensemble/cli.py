"""Command-line entry point: ``train``, ``predict``, ``evaluate``, ``simulate`` (and ``synth``).

Settings come from a ``key = value`` config file (``--config``); flags
override file values. Exit status: 0 ok, 1 input or training-data error,
2 internal error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Optional, Sequence

from . import corpus, ensemble, evaluation, pipeline, synthetic, tokenizer
from .errors import AlignmentError, ConfigError, InputError, TrainingError
from .io import atomic_write_text, parse_key_values
from .textprep import mask_mentions_urls
from .trainer import TrainConfig


def _int_list(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in value.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected a list of integers, got {value!r}") from None


_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}
_TYPES: dict[str, Any] = {
    "epochs": int, "train_fraction": float, "batch_size": int, "learning_rate": float,
    "adam_beta1": float, "adam_beta2": float, "adam_epsilon": float, "seeds": _int_list,
    "max_len": int, "split_seed": int, "d_model": int, "n_heads": int, "n_layers": int,
    "d_ff": int, "dropout_rate": float,
    "train_tsv": str, "input_tsv": str, "gold_tsv": str, "predictions": str,
    "model_dir": str, "out": str, "format": str,
    "vocab_size": int, "min_frequency": int, "workers": int, "seed": int,
    "k": _int_list, "p": float, "correlation": float, "trials": int,
    "n_per_language": int, "test_per_language": int,
}
_DEFAULTS: dict[str, Any] = {
    "vocab_size": 2000, "min_frequency": 1, "workers": 1, "seed": 0, "format": "text",
    "k": (1, 3, 5, 7), "p": 0.76, "correlation": 0.0, "trials": 100_000,
    "n_per_language": 200, "test_per_language": 50,
}


class RunConfig(dict):
    """Typed settings merged from defaults, config file and flags."""

    @classmethod
    def build(cls, config_path: Optional[str], overrides: dict[str, str]) -> "RunConfig":
        cfg = cls(_DEFAULTS)
        raw: list[tuple[str, str]] = []
        if config_path:
            try:
                text = Path(config_path).read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                raise ConfigError(f"cannot read config {config_path}: {exc}") from None
            raw += parse_key_values(text, config_path)
        raw += list(overrides.items())
        for key, value in raw:
            if key not in _TYPES:
                raise ConfigError(f"unknown setting {key!r}")
            try:
                cfg[key] = _TYPES[key](value)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        return cfg

    def train_config(self) -> TrainConfig:
        kwargs = {k: v for k, v in self.items() if k in _TRAIN_KEYS}
        kwargs.setdefault("split_seed", self["seed"])
        tc = TrainConfig(**kwargs)
        try:
            tc.validate()
        except ConfigError as exc:
            raise ConfigError(f"invalid training settings: {exc}") from None
        return tc

    def path(self, key: str, must_exist: bool = True) -> Path:
        if key not in self:
            raise ConfigError(f"setting {key!r} is required for this command")
        p = Path(self[key])
        if must_exist and not p.exists():
            raise ConfigError(f"{key}: {p} does not exist")
        return p


# --- commands --------------------------------------------------------------


def cmd_train(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    tc = cfg.train_config()
    records = corpus.load_tsv(cfg.path("train_tsv"), expect_labels=True)
    for task in corpus.TASKS:
        corpus.require_labels(records, task)
    model_dir = Path(cfg.get("out") or cfg.path("model_dir", must_exist=False))
    languages = [lang for lang in corpus.LANGUAGES if corpus.filter_language(records, lang)]
    if not languages:
        raise InputError("training file has no records")
    for lang in languages:
        recs = corpus.filter_language(records, lang)
        vocab = tokenizer.build_vocab(
            [mask_mentions_urls(r.text) for r in recs], cfg["vocab_size"], cfg["min_frequency"]
        )
        vocab_file = f"vocab.{lang}.txt"
        vocab.save(model_dir / vocab_file)
        ens1, _ = ensemble.train_ensemble(recs, "task1", lang, vocab, tc, cfg["workers"], out)
        ensemble.save_ensemble(ens1, model_dir, vocab_file)
        tc2 = TrainConfig(**{**_train_kwargs(tc), "seeds": tc.seeds[:1]})
        ens2, _ = ensemble.train_ensemble(corpus.filter_sexist(recs), "task2", lang, vocab, tc2, 1, out)
        ensemble.save_ensemble(ens2, model_dir, vocab_file)
    print(f"wrote models for {', '.join(languages)} to {model_dir}", file=out)
    return 0


def _train_kwargs(tc: TrainConfig) -> dict:
    return {f.name: getattr(tc, f.name) for f in fields(tc)}


def cmd_predict(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    model = pipeline.load_pipeline(cfg.path("model_dir"))
    records = corpus.load_tsv(cfg.path("input_tsv"), expect_labels=False)
    rows = pipeline.predict_batch(model, records)
    target = cfg.path("predictions", must_exist=False) if "predictions" in cfg else None
    if target is None:
        target = Path(cfg.get("out") or ".") / "predictions.tsv"
    pipeline.write_predictions(rows, target)
    print(f"wrote {len(rows)} predictions to {target}", file=out)
    return 0


def cmd_evaluate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    gold = corpus.load_tsv(cfg.path("gold_tsv"), expect_labels=True)
    for task in corpus.TASKS:
        corpus.require_labels(gold, task)
    rows = pipeline.read_predictions(cfg.path("predictions"))
    by_id = {}
    for rid, l1, l2 in rows:
        if rid in by_id:
            raise AlignmentError(f"duplicate prediction id {rid!r}")
        by_id[rid] = (l1, l2)
    gold_ids = [r.id for r in gold]
    if len(set(gold_ids)) != len(gold_ids):
        raise AlignmentError("duplicate ids in gold file")
    missing = [i for i in gold_ids if i not in by_id]
    extra = sorted(set(by_id) - set(gold_ids))
    if missing or extra:
        raise AlignmentError(
            f"prediction ids do not match gold ids: {len(missing)} missing "
            f"(e.g. {missing[:3]}), {len(extra)} unexpected (e.g. {extra[:3]})"
        )
    fmt = cfg["format"]
    reports = {}
    for task, labels, col in (("task1", corpus.TASK1_LABELS, 0), ("task2", corpus.TASK2_LABELS, 1)):
        preds = [by_id[i][col] for i in gold_ids]
        reports[task] = evaluation.evaluate_task(gold, preds, task, labels)
    if fmt == "json":
        text = evaluation.render_json_map(reports)
    else:
        text = "\n".join(evaluation.render_report(r, fmt, t) for t, r in reports.items())
    out.write(text)
    if cfg.get("out"):
        atomic_write_text(Path(cfg["out"]) / f"report.{'json' if fmt == 'json' else 'txt'}", text)
    return 0


def cmd_simulate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    ks = cfg["k"]
    if not ks:
        raise ConfigError("k list is empty")
    for k in ks:
        if k < 1 or k % 2 == 0:
            raise ConfigError(f"k must be positive and odd, got {k}")
    lines = [f"# p={cfg['p']} correlation={cfg['correlation']} trials={cfg['trials']} seed={cfg['seed']}",
             "k\testimated_accuracy"]
    for k in ks:
        acc = ensemble.simulate_vote_accuracy(k, cfg["p"], cfg["correlation"], cfg["trials"], cfg["seed"])
        lines.append(f"{k}\t{acc:.6f}")
    text = "\n".join(lines) + "\n"
    out.write(text)
    if cfg.get("out"):
        atomic_write_text(Path(cfg["out"]) / "simulation.tsv", text)
    return 0


def cmd_synth(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    target = Path(cfg.get("out") or ".")
    train = synthetic.make_corpus(cfg["n_per_language"], seed=cfg["seed"], id_prefix="train")
    test = synthetic.make_corpus(cfg["test_per_language"], seed=cfg["seed"] + 1, id_prefix="test")
    corpus.write_tsv(train, target / "train.tsv")
    corpus.write_tsv(test, target / "test.tsv")
    print(f"wrote {len(train)} train and {len(test)} test records to {target}", file=out)
    return 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "synth": cmd_synth,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sexism-ensemble", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "train": "train per-language task1 ensembles and task2 classifiers",
        "predict": "run the cascade over a TSV and write id/task1/task2 predictions",
        "evaluate": "score a prediction TSV against gold labels",
        "simulate": "Monte-Carlo accuracy of k-member majority votes",
        "synth": "write a synthetic EXIST-format train/test corpus",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--seed", type=int, help="master seed (splits, simulation, synthetic data)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any setting; repeatable")
        if name == "train":
            p.add_argument("--train", dest="train_tsv")
            p.add_argument("--seeds", help="member seeds, e.g. 1,2,3")
            p.add_argument("--epochs")
        if name == "predict":
            p.add_argument("--model-dir", dest="model_dir")
            p.add_argument("--input", dest="input_tsv")
            p.add_argument("--predictions")
        if name == "evaluate":
            p.add_argument("--gold", dest="gold_tsv")
            p.add_argument("--predictions")
            p.add_argument("--format", choices=("text", "json"))
        if name == "simulate":
            p.add_argument("--k", help="odd ensemble sizes, e.g. 1,3,5,7")
            p.add_argument("--p", help="member accuracy")
            p.add_argument("--correlation")
            p.add_argument("--trials")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    overrides: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 1
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key, value in vars(args).items():
        if key in ("command", "config", "set") or value is None:
            continue
        overrides[key] = str(value)
    try:
        cfg = RunConfig.build(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except (InputError, TrainingError) as exc:
        # training errors come from data that cannot support the model, e.g. an empty class
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
