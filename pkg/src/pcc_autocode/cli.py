"""Command-line entry point.

Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
errors (unparseable corpus files, too few instances, failed audit).
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig
from .corpus import Corpus, CorpusError, load_corpus
from .evaluation import InsufficientInstances, balanced_sample, cross_validate
from .experiments import (
    default_jobs,
    load_exp1_records,
    run_exp1,
    run_exp2,
    run_exp3,
)
from .preprocess import preprocess_line, write_instances
from .synth import InfeasibleConfig, audit, generate

log = logging.getLogger("pcc_autocode")

USAGE_ERROR = 1
DATA_ERROR = 2
CORPUS_FILES = ("transcripts.tsv", "annotations.tsv", "coders.tsv")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat 'section.key = value' config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    common.add_argument("--jobs", type=int, help="worker processes (default: available cores)")

    parser = _Parser(prog="pcc-autocode", description="Automatic coding of physician-patient transcripts.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-corpus", parents=[common], help="write a seeded synthetic corpus")
    p.add_argument("--out", required=True, help="directory for the three TSV files")

    for name, text in (
        ("ingest", "parse a corpus and print pool counts"),
        ("audit", "check that every experiment class has enough lines per group"),
        ("eval", "one balanced-sample cross-validation run"),
        ("exp1", "experiment 1: word-count groups"),
        ("exp2", "experiment 2: tracked group-C lines in group A/B datasets"),
        ("exp3", "experiment 3: coded lines with and without context"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("corpus", nargs="?", help="corpus directory (default: paths.corpus)")
        p.add_argument("--out", help="output directory (default: paths.out)")

    p = sub.add_parser("report", parents=[common], help="print the summaries found in an output directory")
    p.add_argument("out", nargs="?", help="output directory (default: paths.out)")
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _corpus_dir(args, cfg: RunConfig) -> Path:
    d = args.corpus or cfg["paths.corpus"]
    if not d:
        raise UsageError("no corpus directory given (argument or paths.corpus)")
    return Path(d)


def _out_dir(args, cfg: RunConfig, required=True) -> Path | None:
    d = args.out or cfg["paths.out"]
    if not d and required:
        raise UsageError("no output directory given (--out or paths.out)")
    return Path(d) if d else None


def _fingerprint(directory: Path) -> str:
    h = hashlib.sha256()
    for name in CORPUS_FILES:
        path = directory / name
        if path.exists():
            h.update(name.encode())
            h.update(path.read_bytes())
    return h.hexdigest()


def _load(directory: Path) -> Corpus:
    if not (directory / "transcripts.tsv").exists():
        raise DataError(f"{directory}: transcripts.tsv not found")
    if not (directory / "annotations.tsv").exists():
        raise DataError(f"{directory}: annotations.tsv not found")
    return load_corpus(directory)


def _pool(corpus: Corpus, cfg: RunConfig):
    return corpus.pool(cfg.scope(), cfg["corpus.majority"], cfg.context_mode())


def _corpus_echo(cfg: RunConfig, corpus_dir: Path) -> dict:
    return {
        "corpus.sha256": _fingerprint(corpus_dir),
        "corpus.scope": cfg["corpus.scope"],
        "corpus.majority": str(cfg["corpus.majority"]).lower(),
        "corpus.context_mode": cfg["corpus.context_mode"],
    }


def _stamp(report, cfg: RunConfig, corpus_dir: Path):
    report.config.update(_corpus_echo(cfg, corpus_dir))
    return report


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_corpus(args, cfg: RunConfig) -> int:
    out = Path(args.out)
    generated = generate(cfg.gen())
    generated.write(out)
    log.info("wrote %d lines, %d annotations to %s", len(generated.utterances), len(generated.annotations), out)
    return 0


def cmd_ingest(args, cfg: RunConfig) -> int:
    corpus_dir = _corpus_dir(args, cfg)
    pool = _pool(_load(corpus_dir), cfg)
    for code, n in pool.counts().items():
        print(f"{code.value}\t{n}")
    out = _out_dir(args, cfg, required=False)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        preprocess = cfg.preprocess()
        with open(out / "instances.tsv", "w", encoding="utf-8", newline="\n") as fh:
            write_instances((preprocess_line(cl, "single", preprocess) for cl in pool.lines()), fh)
    return 0


def cmd_audit(args, cfg: RunConfig) -> int:
    corpus_dir = _corpus_dir(args, cfg)
    pool = _pool(_load(corpus_dir), cfg)
    report = audit(pool, n_per_class=cfg["audit.n_per_class"], preprocess=cfg.preprocess())
    text = report.to_text()
    sys.stdout.write(text)
    out = _out_dir(args, cfg, required=False)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "audit.txt").write_text(text, encoding="utf-8")
    if not report.passed:
        for failure in report.failures:
            log.error("audit: %s", failure)
        return DATA_ERROR
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    corpus_dir = _corpus_dir(args, cfg)
    out = _out_dir(args, cfg)
    pool = _pool(_load(corpus_dir), cfg)
    classes = cfg["eval.classes"]
    lines = balanced_sample(pool, classes, cfg["eval.n_per_class"], cfg["eval.min_words"], cfg.seed,
                            cfg.preprocess())
    report = cross_validate(cfg["eval.algorithm"], lines, cfg.pipeline(), cfg["eval.k"], cfg.seed,
                            cfg["eval.variant"], classes)
    report.config["n_per_class"] = cfg["eval.n_per_class"]
    report.config["min_words"] = cfg["eval.min_words"]
    _stamp(report, cfg, corpus_dir).write(out / "eval", title=f"eval {cfg['eval.algorithm']}")
    print(f"accuracy\t{report.accuracy:.6f}")
    print(f"macro_f1\t{report.macro_f1:.6f}")
    return 0


def _jobs(args) -> int:
    return args.jobs if args.jobs is not None else default_jobs()


def cmd_exp1(args, cfg: RunConfig) -> int:
    corpus_dir = _corpus_dir(args, cfg)
    out = _out_dir(args, cfg)
    report = run_exp1(_pool(_load(corpus_dir), cfg), cfg.exp1(), _jobs(args))
    _stamp(report, cfg, corpus_dir).write(out / "exp1")
    return 0


def cmd_exp2(args, cfg: RunConfig) -> int:
    corpus_dir = _corpus_dir(args, cfg)
    out = _out_dir(args, cfg)
    pool = _pool(_load(corpus_dir), cfg)
    config = cfg.exp2()
    # reuse exp1 predictions only if they come from the same corpus and settings
    echo = {**config.exp1.echo(), **_corpus_echo(cfg, corpus_dir)}
    exp1 = load_exp1_records(out / "exp1", config, echo)
    if exp1 is None:
        log.info("exp2: re-running the %s-group exp1 cells", config.source_group)
    report = run_exp2(pool, config, exp1, _jobs(args))
    _stamp(report, cfg, corpus_dir).write(out / "exp2")
    return 0


def cmd_exp3(args, cfg: RunConfig) -> int:
    corpus_dir = _corpus_dir(args, cfg)
    out = _out_dir(args, cfg)
    report = run_exp3(_pool(_load(corpus_dir), cfg), cfg.exp3(), _jobs(args))
    _stamp(report, cfg, corpus_dir).write(out / "exp3")
    return 0


def cmd_report(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    found = [out / name / "summary.md" for name in ("exp1", "exp2", "exp3") if (out / name / "summary.md").exists()]
    if (out / "eval" / "summary.md").exists():
        found.insert(0, out / "eval" / "summary.md")
    if not found:
        raise DataError(f"{out}: no experiment summaries found")
    for path in found:
        sys.stdout.write(path.read_text(encoding="utf-8"))
        sys.stdout.write("\n")
    return 0


COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "ingest": cmd_ingest,
    "audit": cmd_audit,
    "eval": cmd_eval,
    "exp1": cmd_exp1,
    "exp2": cmd_exp2,
    "exp3": cmd_exp3,
    "report": cmd_report,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config(args)
        if args.jobs is not None and args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return USAGE_ERROR
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (CorpusError, InsufficientInstances, InfeasibleConfig, DataError, OSError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except ValueError as exc:
        # invalid settings that only surface when configs are built
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
