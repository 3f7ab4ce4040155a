"""Command-line entry point.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors (missing or
malformed files, bad configuration).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .config import Config, ConfigError, load_config
from .corpus import FAMILIES, Corpus, CorpusSpec, GenerationError, generate
from .evaluation import MalformedTask, run_ps_experiment, run_retrieval_experiment, score_solution
from .kb import KBError, default_taxonomy
from .macfac import load_library, read_case_file, retrieve_ranked
from .solver import ReportError, format_report, generate_suggestions, parse_report

EXIT_USAGE = 1
EXIT_DATA = 2

ABLATIONS = {
    "none": {},
    "no-partitions": {"partitions": False},
    "no-partitions-no-remap": {"partitions": False, "remap": False},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="analogon", description="Analogical retrieval and task suggestion over scenario cases.")
    p.add_argument("--config", help="JSON config file (defaults to $ANALOGON_CONFIG)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("retrieve", help="rank library precedents for a probe")
    r.add_argument("--library", required=True)
    r.add_argument("--probe", required=True)
    r.add_argument("--top", type=_positive, default=1)

    s = sub.add_parser("suggest", help="propose tasks for a probe from a precedent")
    s.add_argument("--library", required=True)
    s.add_argument("--probe", required=True)
    s.add_argument("--precedent", help="library id to use instead of the retrieved rank-1 case")
    s.add_argument("--no-partitions", action="store_true")
    s.add_argument("--no-remap", action="store_true")

    c = sub.add_parser("score", help="score a suggestion report against an expert solution")
    c.add_argument("--suggestions", required=True)
    c.add_argument("--expert", required=True)
    c.add_argument("--probe", help="problem case supplying unit collections, if not in the expert file")
    c.add_argument("--paper-normalizer", action="store_true", help="divide by 25 instead of 20")

    e = sub.add_parser("experiment", help="run the retrieval and problem-solving experiments")
    e.add_argument("--corpus", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--ablation", choices=sorted(ABLATIONS), default="none")
    e.add_argument("--paper-normalizer", action="store_true", help="divide by 25 instead of 20")

    g = sub.add_parser("gen-corpus", help="write a synthetic corpus")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--families", default=",".join(FAMILIES), help="comma-separated family names")
    g.add_argument("--variants", type=_positive, default=4)
    g.add_argument("--large", action="store_true")
    return p


def _retrieve(args, config: Config) -> int:
    library = load_library(args.library)
    probe = read_case_file(args.probe)
    hits = retrieve_ranked(probe, library, args.top, threshold=config.mac_threshold, cap=config.mac_cap)
    for n, h in enumerate(hits, 1):
        print(f"{n} {h.id} {h.similarity:.4f}")
    return 0


def _suggest(args, config: Config) -> int:
    library = load_library(args.library)
    probe = read_case_file(args.probe)
    config = config.with_(partitions=config.partitions and not args.no_partitions,
                          remap=config.remap and not args.no_remap)
    if args.precedent:
        entry = library.get(args.precedent) if args.precedent in library else None
        if entry is None:
            raise KBError(f"no case {args.precedent!r} in {args.library}")
    else:
        entry = retrieve_ranked(probe, library, 1, threshold=config.mac_threshold, cap=config.mac_cap)[0].entry
    suggestions, trace = generate_suggestions(probe, entry, config)
    print(config.header())
    print(f"# precedent {entry.id}")
    sys.stdout.write(format_report(suggestions, trace))
    return 0


def _score(args, config: Config) -> int:
    suggestions = parse_report(Path(args.suggestions).read_text(encoding="utf-8"))
    expert = read_case_file(args.expert)
    probe = read_case_file(args.probe) if args.probe else None
    normalizer = 25 if args.paper_normalizer else config.normalizer
    print(f"{score_solution(suggestions, expert, probe=probe, normalizer=normalizer):.4f}")
    return 0


def _experiment(args, config: Config) -> int:
    library = load_library(args.corpus)
    config = config.with_(**ABLATIONS[args.ablation])
    if args.paper_normalizer:
        config = config.with_(normalizer=25)
    started = time.perf_counter()
    taxonomy = default_taxonomy()
    retrieval = run_retrieval_experiment(library, config)
    report = run_ps_experiment(library, config, retrieval=retrieval, taxonomy=taxonomy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    print(f"wrote {out / 'report.txt'} and {out / 'report.csv'}")
    print(f"runtime {time.perf_counter() - started:.1f}s", file=sys.stderr)
    return 0


def _gen_corpus(args, config: Config) -> int:
    families = tuple(f.strip() for f in args.families.split(",") if f.strip())
    try:
        spec = CorpusSpec(seed=args.seed, families=families, variants=args.variants, large=args.large)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    corpus: Corpus = generate(spec)
    out = corpus.write(args.out)
    print(f"wrote {len(corpus.cases)} cases to {out}")
    return 0


COMMANDS = {
    "retrieve": _retrieve,
    "suggest": _suggest,
    "score": _score,
    "experiment": _experiment,
    "gen-corpus": _gen_corpus,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"analogon: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KBError, ConfigError, ReportError, MalformedTask, GenerationError, OSError, KeyError,
            ValueError) as exc:
        print(f"analogon: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
