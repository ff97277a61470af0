"""End-to-end flows: generation from a brief or from RTL, and review of
existing specifications (whole file, section by section, across levels).

Every flow talks to the model only through a :class:`~specsmith.gateway.Gateway`,
so the same code runs live, against cassettes, or against a mock.
"""

from __future__ import annotations

import difflib
import json
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import (
    ContextOverflow,
    GatewayError,
    LevelOrderViolation,
    MalformedTable,
    NoModuleFound,
    NoPortTable,
    ParseFailed,
    StrategyRequiresSplit,
    UnknownFindingId,
    UnsupportedLevel,
)
from .gateway import (
    GENERATION_TEMPERATURE,
    REVIEW_TEMPERATURE,
    ChatMessage,
    Conversation,
    Gateway,
)
from .ingest import DEFAULT_CHUNK_BUDGET, MIN_CHUNK_BUDGET, chunk_sections, split_sections
from .model import (
    CATEGORIES,
    DefectKind,
    GeneratedSpec,
    GenerationSource,
    Provenance,
    ReviewFinding,
    ReviewStrategy,
    Scope,
    Section,
    Severity,
    SpecBodySection,
    SpecDocument,
    SpecLevel,
    Verdict,
    applicable_categories,
)
from .prompts import (
    render_brief_request,
    render_cross_level,
    render_generation_init,
    render_reask,
    render_review_init,
    render_rtl_request,
    render_section_detail_request,
    render_section_review,
    render_summary_request,
    render_whole_document,
)
from .rtl import (
    ConsistencyIssue,
    IssueKind,
    cross_check_ports,
    extract_spec_port_table,
    parse_verilog_interface,
)

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1


# --- finding extraction ---------------------------------------------------------


def _norm(text: str) -> str:
    return re.sub(r"[^a-z0-9]", "", text.lower())


def _alias_table() -> dict:
    table = {}
    for kind, cat in CATEGORIES.items():
        table[_norm(kind.value)] = kind
        table[_norm(cat.name)] = kind
    extra = {
        DefectKind.TYPOGRAPHICAL: ("typo", "typos", "typographic", "typographical", "spelling", "misspelling"),
        DefectKind.INCONSISTENCY_WITHIN_FILE: (
            "inconsistency", "inconsistence", "inconsistent", "contradiction", "contradictory",
            "inconsistencyorcontradiction", "inconsistenceorcontradiction",
        ),
        DefectKind.INCOMPLETE_OR_UNCLEAR: (
            "incomplete", "unclear", "ambiguous", "ambiguity", "incompleteorunclear", "missinginformation",
        ),
        DefectKind.COMBINATIONAL_LOOP: ("combinationalloop", "combinationalloops", "combinatorialloop"),
        DefectKind.UNINITIALIZED_REGISTER: (
            "uninitializedregister", "uninitialisedregister", "uninitializedregistervalue", "missingreset",
        ),
        DefectKind.MICRO_ARCH_IMPROVEMENT: (
            "microarchitecturalimprovement", "microarchitectureimprovement", "microarchimprovement",
            "improvementformicroarchitecturaldesign",
        ),
        DefectKind.ARCH_IMPROVEMENT: (
            "architecturalimprovement", "architectureimprovement", "archimprovement",
            "improvementforarchitecturaldesign",
        ),
        DefectKind.CROSS_LEVEL_INCONSISTENCY: (
            "crosslevelinconsistency", "crosslevel", "crosslevelcontradiction", "levelspanning",
            "inconsistencyacrosslevels", "inconsistenceorcontradictionacrossvariouslevels",
        ),
    }
    for kind, names in extra.items():
        for name in names:
            table[name] = kind
    return table


CATEGORY_ALIASES = _alias_table()


def normalize_category(name) -> Optional[DefectKind]:
    """Map a free-form category label to the nearest taxonomy kind, or None."""
    if not isinstance(name, str):
        return None
    key = _norm(name)
    if not key:
        return None
    if key in CATEGORY_ALIASES:
        return CATEGORY_ALIASES[key]
    trimmed = re.sub(r"(errors?|defects?|issues?)$", "", key)
    if trimmed in CATEGORY_ALIASES:
        return CATEGORY_ALIASES[trimmed]
    close = difflib.get_close_matches(key, list(CATEGORY_ALIASES), n=1, cutoff=0.8)
    return CATEGORY_ALIASES[close[0]] if close else None


_SEVERITY_WORDS = {
    "low": Severity.LOW, "minor": Severity.LOW, "info": Severity.LOW, "trivial": Severity.LOW,
    "medium": Severity.MEDIUM, "moderate": Severity.MEDIUM,
    "high": Severity.HIGH, "major": Severity.HIGH, "critical": Severity.HIGH, "severe": Severity.HIGH,
}


def normalize_severity(value) -> Severity:
    if isinstance(value, str):
        return _SEVERITY_WORDS.get(value.strip().lower(), Severity.MEDIUM)
    return Severity.MEDIUM


def _first_array(text: str):
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch != "[":
            continue
        try:
            value, _ = decoder.raw_decode(text, i)
        except ValueError:
            continue
        if isinstance(value, list) and (not value or any(isinstance(v, dict) for v in value)):
            return value
    return None


def find_json_array(text: str):
    """First JSON array of objects in ``text``: fenced blocks first, then bare."""
    for m in re.finditer(r"```[a-zA-Z]*[ \t]*\r?\n(.*?)```", text, re.DOTALL):
        found = _first_array(m.group(1))
        if found is not None:
            return found
    return _first_array(text)


_REQUIRED_FIELDS = ("category", "excerpt", "explanation", "suggestion")


class _NoArray(Exception):
    pass


def _extract(
    response: ChatMessage, doc_id, section_index, level, provenance, allowed=None, coerce=None
) -> tuple[list[ReviewFinding], int]:
    items = find_json_array(response.content)
    if items is None:
        raise _NoArray()
    level = SpecLevel(level)
    if allowed is None:
        allowed = {c.kind for c in applicable_categories(level, Scope.SINGLE_FILE)}
    findings = []
    dropped = 0
    for item in items:
        if not isinstance(item, dict) or any(k not in item for k in _REQUIRED_FIELDS):
            dropped += 1
            continue
        kind = normalize_category(item["category"])
        if kind is not None and coerce:
            kind = coerce.get(kind, kind)
        if kind is None or kind not in allowed or level not in CATEGORIES[kind].applicability:
            dropped += 1
            continue
        excerpt = item["excerpt"]
        findings.append(
            ReviewFinding(
                doc_id=doc_id,
                level=level,
                section_index=section_index,
                category=kind,
                severity=normalize_severity(item.get("severity")),
                excerpt="" if excerpt is None else str(excerpt),
                explanation=str(item["explanation"]),
                suggestion=str(item["suggestion"]),
                provenance=provenance,
            )
        )
    return findings, dropped


def parse_findings(
    response: ChatMessage,
    doc_id: str,
    section_index: int,
    level: SpecLevel,
    provenance: Optional[Provenance] = None,
) -> list[ReviewFinding]:
    """Findings in one model reply.

    Elements lacking a required key, or whose category is unknown or does not
    apply at ``level``, are dropped. A reply with no JSON array at all raises
    :class:`ParseFailed`; the re-ask protocol lives in the review flows.
    """
    provenance = provenance or Provenance("unknown", ReviewStrategy.SECTION_BY_SECTION, "")
    try:
        return _extract(response, doc_id, section_index, level, provenance)[0]
    except _NoArray:
        raise ParseFailed("response contains no JSON array of findings") from None


# --- reports ------------------------------------------------------------------------


@dataclass(frozen=True)
class DegradedSection:
    section_index: int
    error: str


@dataclass(frozen=True)
class ReviewStats:
    sections_reviewed: int = 0
    requests_made: int = 0
    context_overflows: int = 0
    degraded_sections: tuple = ()
    dropped_elements: int = 0
    unattributed_findings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "sections_reviewed": self.sections_reviewed,
            "requests_made": self.requests_made,
            "context_overflows": self.context_overflows,
            "degraded_sections": [{"section_index": d.section_index, "error": d.error} for d in self.degraded_sections],
            "dropped_elements": self.dropped_elements,
            "unattributed_findings": list(self.unattributed_findings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReviewStats":
        return cls(
            sections_reviewed=data["sections_reviewed"],
            requests_made=data["requests_made"],
            context_overflows=data["context_overflows"],
            degraded_sections=tuple(
                DegradedSection(d["section_index"], d["error"]) for d in data.get("degraded_sections", [])
            ),
            dropped_elements=data.get("dropped_elements", 0),
            unattributed_findings=tuple(data.get("unattributed_findings", [])),
        )


@dataclass(frozen=True)
class ReviewReport:
    doc_id: str
    strategy: ReviewStrategy
    summary: Optional[str]
    findings: tuple
    stats: ReviewStats

    def __post_init__(self):
        keys = [f.sort_key for f in self.findings]
        if keys != sorted(keys):
            raise ValueError("findings must be sorted by (section_index, category, finding_id)")

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "doc_id": self.doc_id,
            "strategy": self.strategy.value,
            "summary": self.summary,
            "stats": self.stats.to_dict(),
            "findings": [f.to_dict() for f in self.findings],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ReviewReport":
        if data.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        return cls(
            doc_id=data["doc_id"],
            strategy=ReviewStrategy(data["strategy"]),
            summary=data.get("summary"),
            findings=tuple(ReviewFinding.from_dict(f) for f in data["findings"]),
            stats=ReviewStats.from_dict(data["stats"]),
        )

    def to_markdown(self) -> str:
        lines = [f"# Review of `{self.doc_id}`", "", f"Strategy: {self.strategy.value}", ""]
        if self.summary:
            lines += ["## Summary", "", self.summary.strip(), ""]
        s = self.stats
        lines += [
            "## Statistics",
            "",
            "| metric | value |",
            "| --- | --- |",
            f"| sections reviewed | {s.sections_reviewed} |",
            f"| requests made | {s.requests_made} |",
            f"| context overflows | {s.context_overflows} |",
            f"| degraded sections | {', '.join(str(d.section_index) for d in s.degraded_sections) or 'none'} |",
            f"| dropped elements | {s.dropped_elements} |",
            f"| findings | {len(self.findings)} |",
            "",
        ]
        if s.degraded_sections:
            lines += ["## Degraded sections", ""]
            lines += [f"- section {d.section_index}: {d.error}" for d in s.degraded_sections]
            lines.append("")
        lines += ["## Findings", ""]
        if not self.findings:
            lines += ["No findings.", ""]
        unattributed = set(s.unattributed_findings)
        current = None
        for f in self.findings:
            if f.section_index != current:
                current = f.section_index
                lines += [f"### Section {current}", ""]
            flag = " (excerpt not found in this section)" if f.finding_id in unattributed else ""
            verdict = f" [{f.verdict.value}]" if f.verdict else ""
            lines.append(f"- **{f.severity.value}** {CATEGORIES[f.category].name} `{f.finding_id}`{verdict}{flag}")
            if f.excerpt:
                lines.append(f"  > {' '.join(f.excerpt.split())}")
            lines.append(f"  {f.explanation}")
            lines.append(f"  Suggestion: {f.suggestion}")
            if f.note:
                lines.append(f"  Note: {f.note}")
            lines.append("")
        return "\n".join(lines).rstrip("\n") + "\n"


def excerpt_in_section(excerpt: str, section: Section) -> bool:
    """Attribution check; whitespace runs are compared as single spaces."""
    if not excerpt:
        return True
    return " ".join(excerpt.split()) in " ".join(section.body.split())


def _assemble(doc, strategy, summary, findings, *, reviewed, requests, overflows, degraded, dropped) -> ReviewReport:
    unique = {}
    for f in findings:
        unique.setdefault(f.finding_id, f)
    ordered = tuple(sorted(unique.values(), key=lambda f: f.sort_key))
    unattributed = tuple(
        f.finding_id for f in ordered if not excerpt_in_section(f.excerpt, doc.sections[f.section_index])
    )
    if unattributed:
        logger.warning("%d finding(s) quote text not found in their section", len(unattributed))
    stats = ReviewStats(
        sections_reviewed=reviewed,
        requests_made=requests,
        context_overflows=overflows,
        degraded_sections=tuple(sorted(degraded, key=lambda d: d.section_index)),
        dropped_elements=dropped,
        unattributed_findings=unattributed,
    )
    return ReviewReport(doc.id, strategy, summary, ordered, stats)


# --- shared request/parse loop -----------------------------------------------------------


@dataclass
class _Exchange:
    conv: Conversation
    findings: list = field(default_factory=list)
    dropped: int = 0
    requests: int = 0
    overflows: int = 0
    error: Optional[str] = None


def _ask_for_findings(gateway, conv, doc, section_index, strategy, store, allowed=None, coerce=None) -> _Exchange:
    """Send ``conv``, parse findings, re-ask once if no JSON array came back.

    Gateway errors propagate; a second unparseable reply is recorded on the
    returned exchange rather than raised.
    """
    ex = _Exchange(conv)
    for attempt in range(2):
        reply = gateway.complete(ex.conv)
        ex.requests += 1
        provenance = Provenance(gateway.model_name, strategy, ex.conv.digest)
        ex.conv = ex.conv.extend(reply)
        try:
            ex.findings, ex.dropped = _extract(
                reply, doc.id, section_index, doc.level, provenance, allowed=allowed, coerce=coerce
            )
            return ex
        except _NoArray:
            if attempt == 0:
                ex.conv = ex.conv.extend(*render_reask(store).messages)
    ex.error = "ParseFailed: no JSON array after re-ask"
    return ex


@dataclass(frozen=True)
class _Unit:
    section_index: int
    section: Section
    label: str


def _units(doc, budget) -> list[_Unit]:
    units = []
    for section in doc.sections:
        if not section.body.strip():
            continue
        if section.token_estimate <= budget:
            units.append(_Unit(section.index, section, section.label))
            continue
        for chunk in chunk_sections([section], budget):
            k, m = chunk.part
            units.append(_Unit(section.index, chunk.sections[0], f"{section.label}, part {k} of {m}"))
    return units


def _run_units(doc, units, gateway, parallelism, budget, build_conv, strategy, store, allowed=None, coerce=None):
    """Review every unit in its own conversation; one failure never stops the rest."""

    def review(unit, depth=0) -> _Exchange:
        try:
            return _ask_for_findings(
                gateway, build_conv(unit), doc, unit.section_index, strategy, store, allowed, coerce
            )
        except ContextOverflow as exc:
            smaller = max(MIN_CHUNK_BUDGET, unit.section.token_estimate // 2)
            if depth > 0 or smaller >= unit.section.token_estimate:
                return _Exchange(build_conv(unit), requests=1, overflows=1, error=f"ContextOverflow: {exc}")
            merged = _Exchange(build_conv(unit), requests=1, overflows=1)
            parts = chunk_sections([unit.section], smaller)
            for chunk in parts:
                k, m = chunk.part if chunk.part else (1, 1)
                sub = review(_Unit(unit.section_index, chunk.sections[0], f"{unit.label}, re-split {k} of {m}"), depth + 1)
                merged.findings += sub.findings
                merged.dropped += sub.dropped
                merged.requests += sub.requests
                merged.overflows += sub.overflows
                merged.error = merged.error or sub.error
            return merged
        except GatewayError as exc:
            return _Exchange(build_conv(unit), requests=1, error=f"{type(exc).__name__}: {exc}")

    results = gateway.map(review, units, parallelism)

    findings, degraded = [], {}
    requests = overflows = dropped = 0
    covered = set()
    for unit, ex in zip(units, results):
        covered.add(unit.section_index)
        findings += ex.findings
        requests += ex.requests
        overflows += ex.overflows
        dropped += ex.dropped
        if ex.error and unit.section_index not in degraded:
            degraded[unit.section_index] = DegradedSection(unit.section_index, ex.error)
    reviewed = len(covered - degraded.keys())
    return findings, list(degraded.values()), reviewed, requests, overflows, dropped


def review_section_by_section(
    doc: SpecDocument,
    gateway: Gateway,
    parallelism: Optional[int] = None,
    budget: int = DEFAULT_CHUNK_BUDGET,
    store=None,
) -> ReviewReport:
    """Review each section in a fresh two-message conversation.

    Sections over ``budget`` are reviewed in parts. Gateway failures and
    unparseable replies mark the section degraded; the others still report.
    """
    init = render_review_init(doc.level, store)
    params = gateway.params(REVIEW_TEMPERATURE)

    def build(unit):
        prompt = render_section_review(unit.section, store, label=unit.label)
        return Conversation(init.messages + prompt.messages, params)

    findings, degraded, reviewed, requests, overflows, dropped = _run_units(
        doc, _units(doc, budget), gateway, parallelism, budget, build, ReviewStrategy.SECTION_BY_SECTION, store
    )
    return _assemble(
        doc,
        ReviewStrategy.SECTION_BY_SECTION,
        None,
        findings,
        reviewed=reviewed,
        requests=requests,
        overflows=overflows,
        degraded=degraded,
        dropped=dropped,
    )


def review_whole_file(
    doc: SpecDocument, gateway: Gateway, budget: int = DEFAULT_CHUNK_BUDGET, store=None
) -> ReviewReport:
    """One conversation: the whole document, a prose summary, then a detail
    request per section."""
    if doc.total_tokens > budget:
        raise StrategyRequiresSplit(
            f"{doc.id} is ~{doc.total_tokens} tokens, over the {budget}-token budget; "
            "use the section-by-section strategy"
        )
    params = gateway.params(REVIEW_TEMPERATURE)
    conv = Conversation(
        render_review_init(doc.level, store).messages
        + render_whole_document(doc.title, doc.text, store).messages
        + render_summary_request(store).messages,
        params,
    )
    strategy = ReviewStrategy.WHOLE_FILE
    try:
        summary = gateway.complete(conv)
        requests = 1
        conv = conv.extend(summary)
        findings, degraded = [], []
        reviewed = dropped = 0
        for section in doc.sections:
            if not section.body.strip():
                continue
            conv = conv.extend(*render_section_detail_request(section, store).messages)
            ex = _ask_for_findings(gateway, conv, doc, section.index, strategy, store)
            conv = ex.conv
            requests += ex.requests
            dropped += ex.dropped
            findings += ex.findings
            if ex.error:
                degraded.append(DegradedSection(section.index, ex.error))
            else:
                reviewed += 1
    except ContextOverflow as exc:
        raise ContextOverflow(f"{exc}; retry with the section-by-section strategy") from exc
    return _assemble(
        doc,
        strategy,
        summary.content.strip(),
        findings,
        reviewed=reviewed,
        requests=requests,
        overflows=0,
        degraded=degraded,
        dropped=dropped,
    )


def higher_context(doc: SpecDocument, budget: int) -> str:
    """Full text when it fits ``budget``, else each heading plus its first paragraph."""
    if doc.total_tokens <= budget:
        return doc.text
    parts = []
    for section in doc.sections:
        lines = section.body.splitlines()
        head, rest = (lines[:1], lines[1:]) if section.heading else ([], lines)
        paragraph = []
        for line in rest:
            if not line.strip():
                if paragraph:
                    break
                continue
            paragraph.append(line)
        parts.append("\n".join(head + paragraph))
    return "\n\n".join(p for p in parts if p.strip()) + "\n"


_CROSS_COERCE = {
    DefectKind.INCONSISTENCY_WITHIN_FILE: DefectKind.CROSS_LEVEL_INCONSISTENCY,
}


def review_cross_level(
    higher_doc: SpecDocument,
    lower_doc: SpecDocument,
    gateway: Gateway,
    parallelism: Optional[int] = None,
    budget: int = DEFAULT_CHUNK_BUDGET,
    store=None,
) -> ReviewReport:
    """Check every section of ``lower_doc`` against ``higher_doc``."""
    if higher_doc.level.rank <= lower_doc.level.rank:
        raise LevelOrderViolation(
            f"{higher_doc.id} ({higher_doc.level.value}) does not outrank "
            f"{lower_doc.id} ({lower_doc.level.value}); expected HAS > MAS > LAS"
        )
    context = higher_context(higher_doc, budget)
    params = gateway.params(REVIEW_TEMPERATURE)

    def build(unit):
        prompt = render_cross_level(
            context, unit.section, store, higher_level=higher_doc.level, lower_level=lower_doc.level, label=unit.label
        )
        return Conversation(prompt.messages, params)

    findings, degraded, reviewed, requests, overflows, dropped = _run_units(
        lower_doc,
        _units(lower_doc, budget),
        gateway,
        parallelism,
        budget,
        build,
        ReviewStrategy.CROSS_LEVEL,
        store,
        allowed={DefectKind.CROSS_LEVEL_INCONSISTENCY},
        coerce=_CROSS_COERCE,
    )
    return _assemble(
        lower_doc,
        ReviewStrategy.CROSS_LEVEL,
        f"Checked against {higher_doc.id} ({higher_doc.level.value}).",
        findings,
        reviewed=reviewed,
        requests=requests,
        overflows=overflows,
        degraded=degraded,
        dropped=dropped,
    )


# --- triage --------------------------------------------------------------------------


@dataclass(frozen=True)
class TriageAnnotation:
    finding_id: str
    verdict: Verdict
    note: Optional[str] = None


def annotations_from_json(data) -> list[TriageAnnotation]:
    if not isinstance(data, list):
        raise ValueError("annotations must be a JSON array")
    out = []
    for item in data:
        out.append(TriageAnnotation(item["finding_id"], Verdict(str(item["verdict"]).strip().lower()), item.get("note")))
    return out


def apply_triage(report: ReviewReport, annotations) -> ReviewReport:
    """Drop rejected findings and attach the verdict to the rest."""
    by_id = {a.finding_id: a for a in annotations}
    known = {f.finding_id for f in report.findings}
    unknown = sorted(set(by_id) - known)
    if unknown:
        raise UnknownFindingId(f"annotations reference unknown finding ids: {', '.join(unknown)}")
    kept = []
    for f in report.findings:
        a = by_id.get(f.finding_id)
        if a is None:
            kept.append(f)
        elif a.verdict is not Verdict.REJECTED:
            kept.append(replace(f, verdict=a.verdict, note=a.note))
    return replace(report, findings=tuple(kept))


# --- generation ----------------------------------------------------------------------


SKELETON_SYNONYMS = {
    "Overview": ("overview", "introduction", "summary", "general description"),
    "Interface/Ports": ("interface", "ports", "port list", "i/o", "pin description", "signals"),
    "Functional Description": (
        "functional description", "functionality", "function", "operation", "behavior", "behaviour",
    ),
    "State Machines": ("state machine", "fsm", "state diagram", "state transition"),
}


def required_headings(level: SpecLevel) -> tuple:
    base = ("Overview", "Interface/Ports", "Functional Description")
    return base + ("State Machines",) if SpecLevel(level) is SpecLevel.LAS else base


@dataclass(frozen=True)
class GenerationValidation:
    skeleton_ok: bool
    missing_headings: tuple = ()
    port_issues: tuple = ()
    port_table_error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "skeleton_ok": self.skeleton_ok,
            "missing_headings": list(self.missing_headings),
            "port_issues": [i.to_dict() for i in self.port_issues],
            "port_table_error": self.port_table_error,
        }


@dataclass(frozen=True)
class GenerationResult:
    spec: GeneratedSpec
    validation: GenerationValidation
    raw_response: str

    def __post_init__(self):
        if self.spec.source is GenerationSource.FROM_BRIEF and self.validation.port_issues:
            raise ValueError("brief-based generation has no RTL to cross-check")


def parse_generated(text: str) -> tuple[Optional[str], tuple]:
    """Split a markdown reply into (title, body sections).

    The first level-1 heading supplies the title; if nothing follows it
    before the next heading, it is not kept as a section. Text with no
    headings at all becomes one untitled section.
    """
    if not text.strip():
        return None, (SpecBodySection("", ""),)
    title = None
    sections = []
    for sec in split_sections(text):
        lines = sec.body.split("\n", 1)
        body = lines[1] if sec.heading is not None and len(lines) > 1 else ("" if sec.heading else sec.body)
        if sec.heading is None and not body.strip():
            continue
        if title is None and sec.heading is not None and re.match(r"#(?!#)", sec.body):
            title = sec.heading
            if not body.strip():
                continue
        sections.append(SpecBodySection(sec.heading or "", body.strip("\n")))
    if not sections:
        sections.append(SpecBodySection("", ""))
    return title, tuple(sections)


def validate_skeleton(spec: GeneratedSpec, synonyms=None) -> tuple:
    """Names of required headings with no matching section heading."""
    synonyms = synonyms or SKELETON_SYNONYMS
    headings = [re.sub(r"^[\d.\s]+", "", s.heading).lower() for s in spec.body_sections]
    missing = []
    for required in required_headings(spec.level):
        words = [w.lower() for w in synonyms.get(required, (required,))]
        if not any(w in h for h in headings for w in words):
            missing.append(required)
    return tuple(missing)


def _generate(gateway, conv, level, source, synonyms):
    reply = gateway.complete(conv)
    title, sections = parse_generated(reply.content)
    spec = GeneratedSpec(
        title=title or "Generated architecture specification",
        level=level,
        body_sections=sections,
        source=source,
        model_name=gateway.model_name,
        prompt_digest=conv.digest,
    )
    return spec, validate_skeleton(spec, synonyms), reply.content


def generate_from_brief(
    brief: str, level: SpecLevel, gateway: Gateway, store=None, synonyms=None
) -> GenerationResult:
    level = SpecLevel(level)
    if level is SpecLevel.HAS:
        raise UnsupportedLevel("HAS documents are decided by people and are not generated")
    conv = Conversation(
        render_generation_init(level, store).messages + render_brief_request(brief, store).messages,
        gateway.params(GENERATION_TEMPERATURE),
    )
    spec, missing, raw = _generate(gateway, conv, level, GenerationSource.FROM_BRIEF, synonyms)
    return GenerationResult(spec, GenerationValidation(not missing, missing), raw)


def generate_from_rtl(
    rtl_source: str, gateway: Gateway, module_name: Optional[str] = None, store=None, synonyms=None
) -> GenerationResult:
    """LAS from RTL, then a port-by-port comparison of the generated interface table."""
    modules = parse_verilog_interface(rtl_source)
    if module_name is None:
        module = modules[0]
    else:
        matches = [m for m in modules if m.name == module_name]
        if not matches:
            raise NoModuleFound(f"module {module_name!r} not found")
        module = matches[0]
    level = SpecLevel.LAS
    conv = Conversation(
        render_generation_init(level, store).messages + render_rtl_request(rtl_source, module, store).messages,
        gateway.params(GENERATION_TEMPERATURE),
    )
    spec, missing, raw = _generate(gateway, conv, level, GenerationSource.FROM_RTL, synonyms)
    table_error = None
    try:
        issues = cross_check_ports(extract_spec_port_table(spec), module)
    except (NoPortTable, MalformedTable) as exc:
        table_error = f"{type(exc).__name__}: {exc}"
        issues = [ConsistencyIssue(IssueKind.MISSING_IN_SPEC, p.name, "no usable port table") for p in module.ports]
    validation = GenerationValidation(not missing, missing, tuple(issues), table_error)
    return GenerationResult(spec, validation, raw)
