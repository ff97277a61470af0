"""Synthetic specifications with planted defects, Verilog samples, mock rule
tables and the cassettes recorded from them.

Cassettes are regenerated with ``python3 -m specsmith.fixtures`` whenever a
template or fixture changes; the test suite checks they are current.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from ..errors import CoverageGap
from ..gateway import Gateway, MockBackend, RecordingBackend
from ..ingest import build_document, read_source
from ..model import DefectKind, ProductType, SpecDocument, SpecLevel
from ..workflows import review_cross_level, review_section_by_section, review_whole_file


def fixture_dir() -> Path:
    return Path(str(resources.files("specsmith") / "fixtures"))


def _index() -> dict:
    return json.loads((fixture_dir() / "index.json").read_text(encoding="utf-8"))


@dataclass(frozen=True)
class PlantedDefect:
    fixture_id: str
    category: DefectKind
    section_index: int
    excerpt: str
    description: str
    against: Optional[str] = None


@dataclass(frozen=True)
class Fixture:
    id: str
    title: str
    level: SpecLevel
    product_type: ProductType
    path: Path
    defects: tuple

    def document(self) -> SpecDocument:
        return build_document(
            self.id, self.title, self.level, self.product_type, f"fixtures/{self.path.name}", read_source(self.path)
        )


def load_fixtures() -> list[Fixture]:
    root = fixture_dir()
    out = []
    for raw in _index()["specs"]:
        sidecar = json.loads((root / raw["defects"]).read_text(encoding="utf-8"))
        defects = tuple(
            PlantedDefect(
                raw["id"], DefectKind(d["category"]), d["section_index"], d["excerpt"], d["description"], d.get("against")
            )
            for d in sidecar["defects"]
        )
        out.append(
            Fixture(raw["id"], raw["title"], SpecLevel(raw["level"]), ProductType(raw["product_type"]), root / raw["file"], defects)
        )
    return out


def load_fixture(fixture_id: str) -> Fixture:
    for fx in load_fixtures():
        if fx.id == fixture_id:
            return fx
    raise KeyError(fixture_id)


def fixture_coverage_check(fixtures) -> dict:
    """Planted-defect count per category kind; raises CoverageGap if any kind has none."""
    counts = {kind: 0 for kind in DefectKind}
    for fx in fixtures:
        for d in fx.defects:
            counts[d.category] += 1
    missing = [kind for kind, n in counts.items() if n == 0]
    if missing:
        raise CoverageGap(missing)
    return counts


def rtl_expectations() -> dict:
    return json.loads((fixture_dir() / _index()["rtl_expected"]).read_text(encoding="utf-8"))


# --- recall / precision harness --------------------------------------------------


def _squash(text: str) -> str:
    return " ".join(text.split()).lower()


def _matches(finding, defect) -> bool:
    if finding.section_index != defect.section_index or finding.category is not defect.category:
        return False
    a, b = _squash(finding.excerpt), _squash(defect.excerpt)
    return bool(a) and (a in b or b in a)


@dataclass(frozen=True)
class ScoreRow:
    category: DefectKind
    planted: int
    reported: int
    matched: int

    @property
    def recall(self) -> Optional[float]:
        return self.matched / self.planted if self.planted else None

    @property
    def precision(self) -> Optional[float]:
        return self.matched / self.reported if self.reported else None


def score_findings(findings, defects) -> list[ScoreRow]:
    """Match findings to planted defects one-to-one and tally per category.

    A finding matches a defect in the same section and category when either
    excerpt contains the other (whitespace and case ignored). The last row
    is the total, with ``category`` set to None.
    """
    unmatched = list(defects)
    hits = []
    for f in findings:
        for d in unmatched:
            if _matches(f, d):
                unmatched.remove(d)
                hits.append(d)
                break
    rows = []
    for kind in DefectKind:
        planted = sum(d.category is kind for d in defects)
        reported = sum(f.category is kind for f in findings)
        if planted or reported:
            rows.append(ScoreRow(kind, planted, reported, sum(d.category is kind for d in hits)))
    rows.append(ScoreRow(None, len(defects), len(findings), len(hits)))
    return rows


def format_scores(rows) -> str:
    def pct(x):
        return "-" if x is None else f"{x:.2f}"

    lines = [f"{'category':<26} {'planted':>7} {'reported':>8} {'matched':>7} {'recall':>6} {'precision':>9}"]
    for r in rows:
        name = r.category.value if r.category else "TOTAL"
        lines.append(f"{name:<26} {r.planted:>7} {r.reported:>8} {r.matched:>7} {pct(r.recall):>6} {pct(r.precision):>9}")
    return "\n".join(lines)


# --- cassette authoring --------------------------------------------------------------


def cassette_plan() -> list[dict]:
    return _index()["cassettes"]


def run_plan_entry(entry: dict, gateway: Gateway, fixtures=None):
    """Run the review an index entry describes, through ``gateway``."""
    by_id = {fx.id: fx for fx in (fixtures or load_fixtures())}
    doc = by_id[entry["doc"]].document()
    if entry["strategy"] == "sections":
        return review_section_by_section(doc, gateway)
    if entry["strategy"] == "whole":
        return review_whole_file(doc, gateway)
    return review_cross_level(by_id[entry["higher"]].document(), doc, gateway)


def build_cassettes(out_dir=None) -> list[Path]:
    """Record every planned cassette from its mock rule table."""
    root = fixture_dir()
    out_dir = Path(out_dir) if out_dir else root
    written = []
    for entry in cassette_plan():
        path = out_dir / entry["file"]
        path.unlink(missing_ok=True)
        backend = RecordingBackend(MockBackend.load(root / entry["rules"]), path)
        run_plan_entry(entry, Gateway(backend, parallelism=1))
        written.append(path)
    return written
