"""Command-line entry point.

Exit codes: 0 success, 1 domain or usage error, 2 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import catalog
from .errors import ConfigError, ParseError, SpecsmithError
from .gateway import (
    DEFAULT_MODEL,
    DEFAULT_PARALLELISM,
    ENV_API_KEY,
    ENV_MODEL,
    Gateway,
    HttpBackend,
    MockBackend,
    RecordingBackend,
    ReplayBackend,
    load_cassette_dir,
)
from .ingest import DEFAULT_CHUNK_BUDGET, HeadingStyle, SplitPolicy, build_document, load_document_dir, read_source, write_document_dir
from .model import ProductType, SpecLevel
from .prompts import TemplateStore
from .workflows import (
    ReviewReport,
    annotations_from_json,
    apply_triage,
    generate_from_brief,
    generate_from_rtl,
    review_cross_level,
    review_section_by_section,
    review_whole_file,
)

log = logging.getLogger("specsmith")

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2

STRATEGIES = ("whole", "sections", "cross")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; here 2 is reserved for I/O problems
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class RunConfig:
    backend: str
    model_name: str = DEFAULT_MODEL
    chunk_budget: int = DEFAULT_CHUNK_BUDGET
    parallelism: int = DEFAULT_PARALLELISM
    cassette_dir: Optional[Path] = None
    rules: Optional[Path] = None
    record: Optional[Path] = None
    templates_dir: Optional[Path] = None
    output_dir: Path = Path(".")

    def __post_init__(self):
        if self.chunk_budget < 1 or self.parallelism < 1:
            raise UsageError("--chunk-budget and --parallelism must be positive")
        if self.backend == "replay" and self.cassette_dir is None:
            raise UsageError("--backend replay needs --cassette-dir")
        if self.backend == "mock" and self.rules is None:
            raise UsageError("--backend mock needs --rules")
        if self.backend == "live" and not os.environ.get(ENV_API_KEY):
            raise ConfigError(f"--backend live needs {ENV_API_KEY} in the environment")

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        return cls(
            backend=args.backend,
            model_name=args.model,
            chunk_budget=args.chunk_budget,
            parallelism=args.parallelism,
            cassette_dir=args.cassette_dir,
            rules=args.rules,
            record=args.record,
            templates_dir=args.templates_dir,
            output_dir=args.output_dir,
        )

    def gateway(self) -> Gateway:
        if self.backend == "replay":
            backend = ReplayBackend(load_cassette_dir(self.cassette_dir))
        elif self.backend == "mock":
            backend = MockBackend.load(self.rules)
        else:
            backend = HttpBackend.from_env()
        if self.record:
            backend = RecordingBackend(backend, self.record)
        return Gateway(backend, self.parallelism, self.model_name)

    def store(self):
        return TemplateStore(self.templates_dir) if self.templates_dir else None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# --- commands -------------------------------------------------------------------


def cmd_catalog_validate(args) -> int:
    path = Path(args.manifest or catalog.shipped_manifest_path())
    text = path.read_text(encoding="utf-8")
    try:
        entries, errors = catalog.check_manifest(json.loads(text))
    except json.JSONDecodeError as exc:
        entries, errors = [], [ParseError(f"{path}: {exc}")]
    if errors:
        for err in errors:
            print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_DOMAIN
    stats = catalog.manifest_stats(entries)
    print(f"entries: {stats.total}")
    print("by level:")
    for level, n in stats.by_level.items():
        print(f"  {level.value:<12} {n:>3}")
    print("by product type:")
    for ptype, n in stats.by_type.items():
        print(f"  {ptype.value:<12} {n:>3}")
    for e in catalog.cell_conflicts(entries):
        print(f"warning: {e.id} sits in an empty corpus cell ({e.level.value}, {e.product_type.value})", file=sys.stderr)
    return EXIT_OK


def cmd_catalog_check_links(args) -> int:
    entries = catalog.load_manifest(args.manifest or catalog.shipped_manifest_path())
    bad = 0
    for url, status in catalog.check_links(entries, timeout=args.timeout).items():
        ok = isinstance(status, int) and status < 400
        bad += not ok
        print(f"{'ok ' if ok else 'BAD'} {status} {url}")
    return EXIT_OK if not bad else EXIT_DOMAIN


def cmd_ingest(args) -> int:
    styles = frozenset(HeadingStyle(s) for s in (args.heading_style or [HeadingStyle.MARKDOWN_ATX.value]))
    policy = SplitPolicy(styles, args.min_section_chars)
    source = Path(args.file)
    doc = build_document(
        args.id, args.title or args.id, args.level, args.type, source.name, read_source(source), policy
    )
    root = write_document_dir(doc, args.output_dir)
    print(f"{doc.id}: {len(doc.sections)} sections, ~{doc.total_tokens} tokens -> {root}")
    return EXIT_OK


def _write_report(report: ReviewReport, cfg: RunConfig, strategy: str) -> None:
    stem = f"{report.doc_id}.{strategy}.report"
    json_path = cfg.output_dir / f"{stem}.json"
    _write(json_path, report.to_json())
    _write(cfg.output_dir / f"{stem}.md", report.to_markdown())
    s = report.stats
    print(
        f"{report.doc_id}: {len(report.findings)} findings, {s.sections_reviewed} sections reviewed, "
        f"{s.requests_made} requests -> {json_path}"
    )
    for d in s.degraded_sections:
        print(f"warning: section {d.section_index} degraded: {d.error}", file=sys.stderr)


def cmd_review(args) -> int:
    if args.strategy == "cross" and not args.higher:
        raise UsageError("--strategy cross needs --higher")
    if args.strategy != "cross" and args.higher:
        raise UsageError("--higher only applies to --strategy cross")
    cfg = RunConfig.from_args(args)
    doc = load_document_dir(args.doc_dir)
    higher = load_document_dir(args.higher) if args.higher else None
    gateway = cfg.gateway()
    store = cfg.store()
    if args.strategy == "whole":
        report = review_whole_file(doc, gateway, cfg.chunk_budget, store)
    elif args.strategy == "sections":
        report = review_section_by_section(doc, gateway, cfg.parallelism, cfg.chunk_budget, store)
    else:
        report = review_cross_level(higher, doc, gateway, cfg.parallelism, cfg.chunk_budget, store)
    _write_report(report, cfg, args.strategy)
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = RunConfig.from_args(args)
    gateway = cfg.gateway()
    if args.rtl:
        rtl_text = read_source(args.rtl)
        result = generate_from_rtl(rtl_text, gateway, args.module, cfg.store())
        name = args.name or Path(args.rtl).stem
    else:
        result = generate_from_brief(args.brief, args.level, gateway, cfg.store())
        name = args.name or "brief"
    spec_path = cfg.output_dir / f"{name}.{result.spec.level.value.lower()}.md"
    _write(spec_path, result.spec.to_markdown())
    _write(cfg.output_dir / f"{name}.validation.json", json.dumps(result.validation.to_dict(), indent=2) + "\n")
    v = result.validation
    print(f"{spec_path}: skeleton {'ok' if v.skeleton_ok else 'missing ' + ', '.join(v.missing_headings)}")
    if args.rtl:
        print(f"port issues: {len(v.port_issues)}")
    return EXIT_OK


def cmd_triage(args) -> int:
    report = ReviewReport.from_dict(json.loads(Path(args.report).read_text(encoding="utf-8")))
    annotations = annotations_from_json(json.loads(Path(args.annotations).read_text(encoding="utf-8")))
    triaged = apply_triage(report, annotations)
    out = Path(args.output) if args.output else Path(args.report).with_name(Path(args.report).name.replace(".report.json", "") + ".triaged.json")
    _write(out, triaged.to_json())
    print(f"retained: {len(triaged.findings)} of {len(report.findings)}")
    return EXIT_OK


def cmd_fixtures_coverage(args) -> int:
    from .fixtures import fixture_coverage_check, load_fixtures

    counts = fixture_coverage_check(load_fixtures())
    for kind, n in counts.items():
        print(f"{kind.value:<26} {n}")
    return EXIT_OK


def cmd_harness_score(args) -> int:
    from .fixtures import format_scores, load_fixture, score_findings

    report = ReviewReport.from_dict(json.loads(Path(args.report).read_text(encoding="utf-8")))
    fixture = load_fixture(args.fixture or report.doc_id)
    wanted = [d for d in fixture.defects if d.category.value != "CrossLevelInconsistency"]
    if report.strategy.value == "CrossLevel":
        wanted = [d for d in fixture.defects if d.category.value == "CrossLevelInconsistency"]
    print(format_scores(score_findings(report.findings, wanted)))
    return EXIT_OK


# --- parser ------------------------------------------------------------------------


def _backend_options(p):
    p.add_argument("--backend", choices=["live", "replay", "mock"], default="live")
    p.add_argument("--cassette-dir", type=Path)
    p.add_argument("--rules", type=Path, help="mock rule table (JSON)")
    p.add_argument("--record", type=Path, help="append every exchange to this cassette")
    p.add_argument("--model", default=os.environ.get(ENV_MODEL, DEFAULT_MODEL))
    p.add_argument("--chunk-budget", type=int, default=DEFAULT_CHUNK_BUDGET)
    p.add_argument("--parallelism", type=int, default=DEFAULT_PARALLELISM)
    p.add_argument("--templates-dir", type=Path)
    p.add_argument("--output-dir", type=Path, default=Path("."))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specsmith", description="Generate and review hardware architecture specifications.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cat = sub.add_parser("catalog", help="corpus manifest")
    cat_sub = cat.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = cat_sub.add_parser("validate")
    p.add_argument("--manifest", type=Path)
    p.set_defaults(func=cmd_catalog_validate)
    p = cat_sub.add_parser("check-links", help="HEAD every source URL (network)")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_catalog_check_links)

    p = sub.add_parser("ingest", help="split a specification into a document directory")
    p.add_argument("file")
    p.add_argument("--id", required=True)
    p.add_argument("--title")
    p.add_argument("--level", required=True, choices=[lv.value for lv in SpecLevel])
    p.add_argument("--type", required=True, choices=[pt.value for pt in ProductType])
    p.add_argument("--heading-style", action="append", choices=[s.value for s in HeadingStyle])
    p.add_argument("--min-section-chars", type=int, default=0)
    p.add_argument("--output-dir", type=Path, default=Path("."))
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("review", help="review an ingested document")
    p.add_argument("doc_dir", type=Path)
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument("--higher", type=Path, help="higher-level document directory (cross only)")
    _backend_options(p)
    p.set_defaults(func=cmd_review)

    p = sub.add_parser("generate", help="draft a MAS/LAS from a brief or LAS from RTL")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--brief")
    src.add_argument("--rtl", type=Path)
    p.add_argument("--level", choices=["MAS", "LAS"], default="MAS", help="brief only; RTL always yields LAS")
    p.add_argument("--module", help="RTL module to describe (default: first)")
    p.add_argument("--name", help="output file stem")
    _backend_options(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("triage", help="apply accept/reject verdicts to a report")
    p.add_argument("report")
    p.add_argument("annotations")
    p.add_argument("--output")
    p.set_defaults(func=cmd_triage)

    fx = sub.add_parser("fixtures", help="shipped test fixtures")
    fx_sub = fx.add_subparsers(dest="action", required=True, parser_class=_Parser)
    fx_sub.add_parser("coverage").set_defaults(func=cmd_fixtures_coverage)

    hs = sub.add_parser("harness", help="planted-defect scoring")
    hs_sub = hs.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = hs_sub.add_parser("score")
    p.add_argument("report")
    p.add_argument("--fixture", help="fixture id (default: the report's doc_id)")
    p.set_defaults(func=cmd_harness_score)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except SpecsmithError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ConfigError, OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
