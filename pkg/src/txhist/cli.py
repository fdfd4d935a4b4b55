"""``txhist`` command line: cluster, extract, train, cv, importance, report.

Every option can also come from a TOML run config (``--config``); flags on
the command line win. Data goes to files or standard output, counters and
warnings to standard error.

Exit codes: 0 success, 1 usage error, 2 input validation error, 3 internal
invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import LabelConflict, build_entities, entity_labels
from .ingest import IngestError, IngestStats, iter_transactions, parse_labels, parse_rate_table
from .learn import (
    MODEL_KINDS,
    Dataset,
    Model,
    UnsupportedModel,
    config_hash,
    cross_validate,
    feature_importance,
    mask_columns,
    parse_mask,
    read_feature_csv,
    resolve_config,
    sample_weights,
    train,
    write_feature_csv,
)
from .model import FEATURE_NAMES, Category, Transaction
from .summarize import ContractViolation, summarize_subjects

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3

log = logging.getLogger("txhist")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# -- run configuration -----------------------------------------------------------


@dataclass
class RunConfig:
    transactions: str | None = None
    rates: str | None = None
    labels: str | None = None
    features_csv: str | None = None
    scheme: str = "address"
    features: str = "all"
    model: str = "forest"
    k: int = 10
    seed: int = 0
    out: str | None = None
    skip_invalid: bool = False
    max_tx: int | None = None
    label_conflict: str = "error"
    weighted: bool = True
    threads: int = 1
    learn: dict = field(default_factory=dict)

    def provenance(self) -> dict:
        """The config as recorded in outputs; the thread count and output
        location do not influence results, so they are left out."""
        d = asdict(self)
        d.pop("threads")
        d.pop("out")
        d["learn"] = {self.model: resolve_config(self.model, self.learn.get(self.model))}
        return d

    def hash(self) -> str:
        return config_hash(self.provenance())


_FIELDS = {f for f in RunConfig.__dataclass_fields__}


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    unknown = set(raw) - _FIELDS
    if unknown:
        raise UsageError(f"{path}: unknown config keys {', '.join(sorted(unknown))}")
    learn = raw.get("learn", {})
    if not isinstance(learn, dict) or any(not isinstance(v, dict) for v in learn.values()):
        raise UsageError(f"{path}: [learn.<model>] tables expected")
    return raw


def build_run_config(args: argparse.Namespace) -> RunConfig:
    values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    cfg = RunConfig(**values)
    if cfg.scheme not in ("address", "entity"):
        raise UsageError(f"scheme must be 'address' or 'entity', got {cfg.scheme!r}")
    if cfg.model not in MODEL_KINDS:
        raise UsageError(f"model must be one of {', '.join(MODEL_KINDS)}, got {cfg.model!r}")
    if cfg.label_conflict not in ("error", "majority"):
        raise UsageError("label-conflict must be 'error' or 'majority'")
    if cfg.threads < 1:
        raise UsageError("threads must be at least 1")
    if cfg.max_tx is not None and cfg.max_tx < 1:
        raise UsageError("max-tx must be positive")
    for kind in cfg.learn:
        if kind not in MODEL_KINDS:
            raise UsageError(f"unknown model table [learn.{kind}]")
    try:
        cfg.features = "+".join(parse_mask(cfg.features))
        for kind, overrides in cfg.learn.items():
            resolve_config(kind, overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


# -- input loading -----------------------------------------------------------------


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required input: {flags}")


def _open_binary(path: str):
    try:
        return open(path, "rb")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def load_transactions(path: str, skip_invalid: bool) -> list[Transaction]:
    """Parse, collapse repeated records and sort canonically."""
    stats = IngestStats()
    by_txid: dict[str, Transaction] = {}
    with _open_binary(path) as fh:
        for tx in iter_transactions(fh, skip_invalid=skip_invalid, stats=stats, source=path):
            prev = by_txid.setdefault(tx.txid, tx)
            if prev != tx:
                raise InputError(f"{path}: conflicting records for txid {tx.txid}")
    log.info("transactions: records=%d skipped_invalid=%d distinct=%d",
             stats.records, stats.skipped, len(by_txid))
    return sorted(by_txid.values(), key=lambda t: t.sort_key)


def load_rates(path: str):
    with _open_binary(path) as fh:
        return parse_rate_table(fh, source=path)


def load_labels(path: str) -> dict[str, Category]:
    with _open_binary(path) as fh:
        labels = parse_labels(fh, source=path)
    log.info("labels: addresses=%d", len(labels))
    return labels


def extract_rows(cfg: RunConfig) -> list[tuple[str, Category, object]]:
    """Feature rows ``(subject, category, FeatureVector)`` for every labeled
    subject with at least one transaction, in subject order."""
    _require(cfg, "transactions", "rates", "labels")
    txs = load_transactions(cfg.transactions, cfg.skip_invalid)
    rates = load_rates(cfg.rates)
    labels = load_labels(cfg.labels)
    if cfg.scheme == "address":
        subject_of = {a: a for a in labels}
        category_of = dict(labels)
    else:
        entities = build_entities(txs, labels)
        category_of = entity_labels(entities, labels, cfg.label_conflict)
        subject_of = {a: eid for eid in category_of for a in entities.members_of(eid)}
        log.info("entities: total=%d labeled=%d", len(entities), len(category_of))
    feats, missing = summarize_subjects(txs, subject_of, rates, max_tx=cfg.max_tx,
                                        workers=cfg.threads)
    dropped = len(category_of) - len(feats)
    log.info("subjects: extracted=%d dropped_without_transactions=%d missing_rate_lookups=%d",
             len(feats), dropped, missing)
    if dropped:
        log.warning("%d labeled subjects have no valid transactions and were dropped", dropped)
    return [(str(s), category_of[s], fv) for s, fv in feats.items()]


def rows_to_dataset(rows) -> Dataset:
    if not rows:
        raise InputError("no labeled subject has any transaction")
    return Dataset(
        np.array([fv.values for _, _, fv in rows], dtype=float).reshape(len(rows), len(FEATURE_NAMES)),
        np.array([int(c) for _, c, _ in rows], dtype=int),
        [s for s, _, _ in rows],
    )


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.features_csv is not None:
        try:
            with open(cfg.features_csv, newline="", encoding="utf-8") as fh:
                ds = read_feature_csv(fh)
        except OSError as exc:
            raise InputError(f"{cfg.features_csv}: {exc.strerror}") from None
        except ValueError as exc:
            raise InputError(f"{cfg.features_csv}: {exc}") from None
        if len(ds) == 0:
            raise InputError(f"{cfg.features_csv}: no rows")
        return ds
    return rows_to_dataset(extract_rows(cfg))


# -- output helpers -------------------------------------------------------------------


def _write_output(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def manifest(cfg: RunConfig, command: str, outputs: list[str]) -> str:
    doc = {
        "format": "txhist-manifest",
        "version": 1,
        "command": command,
        "txhist_version": __version__,
        "config": cfg.provenance(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "outputs": sorted(outputs),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write_with_manifest(cfg: RunConfig, command: str, text: str) -> None:
    _write_output(cfg.out, text)
    if cfg.out not in (None, "-"):
        _write_output(cfg.out + ".manifest.json", manifest(cfg, command, [os.path.basename(cfg.out)]))


# -- subcommands ----------------------------------------------------------------------


def cmd_cluster(cfg: RunConfig) -> int:
    _require(cfg, "transactions")
    txs = load_transactions(cfg.transactions, cfg.skip_invalid)
    extra = load_labels(cfg.labels) if cfg.labels else ()
    entities = build_entities(txs, extra)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["address", "entity_id"])
    for a in sorted(entities.entity_of):
        w.writerow([a, entities.entity_of[a]])
    _write_with_manifest(cfg, "cluster", buf.getvalue())
    hist = " ".join(f"{size}:{count}" for size, count in entities.size_histogram().items())
    log.info("entities: count=%d sizes=%s", len(entities), hist or "-")
    return EXIT_OK


def cmd_extract(cfg: RunConfig) -> int:
    rows = extract_rows(cfg)
    buf = io.StringIO()
    write_feature_csv(rows, buf)
    _write_with_manifest(cfg, "extract", buf.getvalue())
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    ds = load_dataset(cfg)
    cols = mask_columns(cfg.features.split("+"))
    w = sample_weights(ds.y.tolist()) if cfg.weighted else None
    model = train(cfg.model, ds.X[:, cols], ds.y, w, config=cfg.learn.get(cfg.model),
                  seed=cfg.seed, feature_names=[FEATURE_NAMES[j] for j in cols],
                  threads=cfg.threads)
    if model.degenerate:
        log.warning("training set has a single category; the model is a constant predictor")
    doc = model.to_dict()
    doc["metadata"] = {"config": cfg.provenance(), "config_hash": cfg.hash(), "seed": cfg.seed,
                       "n_samples": len(ds)}
    _write_output(cfg.out, json.dumps(doc, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_cv(cfg: RunConfig) -> int:
    ds = load_dataset(cfg)
    report = cross_validate(ds, cfg.model, cfg.learn.get(cfg.model), k=cfg.k, seed=cfg.seed,
                            features=tuple(cfg.features.split("+")), weighted=cfg.weighted,
                            threads=cfg.threads)
    report.metadata["run"] = {"config": cfg.provenance(), "config_hash": cfg.hash()}
    if report.degenerate_folds:
        log.warning("folds with a single training category: %s", report.degenerate_folds)
    log.info("cv: model=%s k=%d micro_f1=%.4f macro_f1=%.4f",
             cfg.model, cfg.k, report.micro_f1, report.macro_f1)
    out = Path(cfg.out or ".")
    files = {
        "report.json": report.to_json(),
        "confusion.csv": report.confusion_csv(),
        "confusion_normalized.csv": report.confusion_csv(normalized=True),
    }
    if report.importances is not None:
        files["importance.csv"] = report.importance_csv()
    for name, text in files.items():
        _write_output(str(out / name), text)
    _write_output(str(out / "manifest.json"), manifest(cfg, "cv", list(files)))
    return EXIT_OK


def _read_model(path: str) -> Model:
    try:
        with open(path, encoding="utf-8") as fh:
            return Model.from_dict(json.load(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a readable model file ({exc})") from None


def cmd_importance(args: argparse.Namespace) -> int:
    model = _read_model(args.model_file)
    try:
        ranked = feature_importance(model)
    except UnsupportedModel as exc:
        raise InputError(str(exc)) from None
    buf = io.StringIO()
    buf.write("rank,feature,score\n")
    for r, (name, score) in enumerate(ranked, start=1):
        buf.write(f"{r},{name},{score!r}\n")
    _write_output(args.out, buf.getvalue())
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        with open(args.report, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"{args.report}: {exc.strerror}") from None
    except ValueError as exc:
        raise InputError(f"{args.report}: {exc}") from None
    if doc.get("format") != "txhist-report":
        raise InputError(f"{args.report}: not a txhist report")
    cfg = doc["metadata"]["config"]
    lines = [
        f"model {cfg['model']}  k={cfg['k']}  seed={cfg['seed']}  features={'+'.join(cfg['features'])}"
        f"  weighted={cfg['weighted']}",
        f"config hash {doc['metadata']['config_hash']}",
        f"micro-F1 {doc['micro_f1']:.4f}  macro-F1 {doc['macro_f1']:.4f}  (mean over folds)",
        "",
        f"{'category':<10} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>8}",
    ]
    for name in doc["categories"]:
        s = doc["per_class"][name]
        lines.append(f"{name:<10} {s['precision']:>9.4f} {s['recall']:>9.4f} {s['f1']:>9.4f} "
                     f"{s['support']:>8d}")
    if doc.get("importances"):
        lines += ["", f"top {args.top} features by information gain"]
        for r, item in enumerate(doc["importances"][: args.top], start=1):
            lines.append(f"{r:>3}. {item['feature']:<20} {item['score']:.6g}")
    _write_output(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, *names: str) -> None:
    """Options shared by the pipeline commands; defaults stay ``None`` so a
    config file can supply them."""
    p.add_argument("--config", help="TOML run config; command-line flags take precedence")
    opts = {
        "transactions": dict(help="transaction records, one JSON object per line"),
        "rates": dict(help="CSV date,usd_per_btc"),
        "labels": dict(help="CSV address,category"),
        "features_csv": dict(help="feature CSV written by 'extract' (instead of raw inputs)"),
        "scheme": dict(choices=("address", "entity"), help="summarize addresses or entities"),
        "features": dict(help="feature groups: all, or e.g. basic+moments"),
        "model": dict(choices=MODEL_KINDS, help="classifier kind"),
        "k": dict(type=int, help="number of folds"),
        "seed": dict(type=int, help="root random seed"),
        "out": dict(help="output file or directory"),
        "max_tx": dict(type=int, help="use only the first N transactions of each subject"),
        "label_conflict": dict(choices=("error", "majority"),
                               help="entity scheme: how to treat members with different labels"),
        "threads": dict(type=int, help="worker count; results do not depend on it"),
    }
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **opts[name])
    if "transactions" in names:
        p.add_argument("--skip-invalid", dest="skip_invalid", action="store_const", const=True,
                       default=None, help="count and skip invalid records instead of failing")
    if "model" in names:
        p.add_argument("--unweighted", dest="weighted", action="store_const", const=False,
                       default=None, help="disable class-balancing sample weights")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="txhist", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"txhist {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress counters on stderr")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("cluster", help="group addresses into entities (address,entity_id CSV)")
    _common(p, "transactions", "labels", "out", "seed", "threads")

    raw = ("transactions", "rates", "labels", "scheme", "max_tx", "label_conflict")
    p = sub.add_parser("extract", help="write the 64-column feature CSV")
    _common(p, *raw, "out", "seed", "threads")

    learn = ("features_csv", *raw, "features", "model", "seed", "out", "threads")
    p = sub.add_parser("train", help="train one model on all subjects (model JSON)")
    _common(p, *learn)

    p = sub.add_parser("cv", help="stratified k-fold evaluation (report directory)")
    _common(p, *learn, "k")

    p = sub.add_parser("importance", help="rank features of a trained tree model")
    p.add_argument("model_file", help="model JSON written by 'train'")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")

    p = sub.add_parser("report", help="print a readable summary of a report.json")
    p.add_argument("report", help="report.json written by 'cv'")
    p.add_argument("--top", type=int, default=10, help="number of features to list")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    return parser


COMMANDS = {"cluster": cmd_cluster, "extract": cmd_extract, "train": cmd_train, "cv": cmd_cv}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("txhist: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        if args.command == "importance":
            return cmd_importance(args)
        if args.command == "report":
            return cmd_report(args)
        return COMMANDS[args.command](build_run_config(args))
    except UsageError as exc:
        print(f"txhist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, IngestError, LabelConflict) as exc:
        print(f"txhist: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ContractViolation as exc:
        print(f"txhist: invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:  # remaining model/data checks reject the input
        print(f"txhist: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # anything else is a bug
        print(f"txhist: invariant failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
