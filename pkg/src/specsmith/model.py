"""Shared domain types: specification levels, the defect taxonomy, documents
and review findings.

Nothing in here performs I/O or talks to a language model.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class SpecLevel(str, Enum):
    HAS = "HAS"
    MAS = "MAS"
    LAS = "LAS"

    @property
    def rank(self) -> int:
        """Abstraction rank; a higher rank outranks a lower one."""
        return {"HAS": 3, "MAS": 2, "LAS": 1}[self.value]

    @property
    def title(self) -> str:
        return LEVEL_TITLES[self]


LEVEL_TITLES = {
    SpecLevel.HAS: "Highest-level Architecture Specification",
    SpecLevel.MAS: "Middle-level Architecture Specification",
    SpecLevel.LAS: "Lowest-level Architecture Specification",
}

LEVEL_DEFINITIONS = {
    SpecLevel.HAS: (
        "a standard shared by a whole family of products, such as an "
        "instruction set or a bus protocol, that every conforming chip must obey"
    ),
    SpecLevel.MAS: (
        "the high-level architecture of one chip: its block diagram, how the "
        "modules are interconnected, and the primary parameters such as cache sizes"
    ),
    SpecLevel.LAS: (
        "the microarchitecture of one chip in implementation detail: ports, "
        "internal signals, pipelines, state machines and their descriptions, "
        "precise enough for a designer to write the RTL directly from it"
    ),
}


class ProductType(str, Enum):
    CPU = "CPU"
    SOC = "SoC"
    ACCELERATOR = "Accelerator"
    BUS_NETWORK = "BusNetwork"
    ARITHMETIC = "Arithmetic"
    CRYPTO = "Crypto"


class Scope(str, Enum):
    SINGLE_FILE = "SingleFile"
    MULTI_FILE = "MultiFile"


class DefectKind(str, Enum):
    TYPOGRAPHICAL = "Typographical"
    INCONSISTENCY_WITHIN_FILE = "InconsistencyWithinFile"
    INCOMPLETE_OR_UNCLEAR = "IncompleteOrUnclear"
    COMBINATIONAL_LOOP = "CombinationalLoop"
    UNINITIALIZED_REGISTER = "UninitializedRegister"
    MICRO_ARCH_IMPROVEMENT = "MicroArchImprovement"
    ARCH_IMPROVEMENT = "ArchImprovement"
    CROSS_LEVEL_INCONSISTENCY = "CrossLevelInconsistency"

    @property
    def order(self) -> int:
        return _KIND_ORDER[self]

    @property
    def category(self) -> "DefectCategory":
        return CATEGORIES[self]


_KIND_ORDER = {kind: i for i, kind in enumerate(DefectKind)}

ALL_LEVELS = frozenset(SpecLevel)


@dataclass(frozen=True)
class DefectCategory:
    kind: DefectKind
    applicability: frozenset
    scope: Scope
    name: str
    definition: str


def _category(kind, levels, name, definition, scope=Scope.SINGLE_FILE):
    return DefectCategory(kind, frozenset(levels), scope, name, definition)


CATEGORIES = {
    c.kind: c
    for c in (
        _category(
            DefectKind.TYPOGRAPHICAL,
            ALL_LEVELS,
            "Typographical Error",
            "misspelled words, wrong signal or register names, broken numbering "
            "or formatting slips",
        ),
        _category(
            DefectKind.INCONSISTENCY_WITHIN_FILE,
            ALL_LEVELS,
            "Inconsistence or Contradiction Error",
            "two statements in this document describe the same object "
            "differently, or two related statements contradict each other",
        ),
        _category(
            DefectKind.INCOMPLETE_OR_UNCLEAR,
            ALL_LEVELS,
            "Incomplete or Unclear Error",
            "a concept is missing information it needs, so the text admits more "
            "than one interpretation",
        ),
        _category(
            DefectKind.COMBINATIONAL_LOOP,
            {SpecLevel.LAS},
            "Combinational Loops Error",
            "the described connections form a cycle through purely "
            "combinational logic with no register breaking it",
        ),
        _category(
            DefectKind.UNINITIALIZED_REGISTER,
            {SpecLevel.LAS},
            "Uninitialized Register Value Error",
            "a register or state element can be read before any reset value or "
            "assignment is defined for it",
        ),
        _category(
            DefectKind.MICRO_ARCH_IMPROVEMENT,
            {SpecLevel.LAS},
            "Improvement for Micro-architectural Design",
            "a concrete change to the microarchitecture (pipelining, state "
            "encoding, resource sharing) that would improve the design",
        ),
        _category(
            DefectKind.ARCH_IMPROVEMENT,
            {SpecLevel.MAS},
            "Improvement for Architectural Design",
            "a concrete change to the chip-level architecture (partitioning, "
            "interconnect, parameters) that would improve the design",
        ),
        _category(
            DefectKind.CROSS_LEVEL_INCONSISTENCY,
            ALL_LEVELS,
            "Inconsistence or Contradiction Error (Across Various Levels)",
            "the lower-level document contradicts content established by the "
            "higher-level document it must comply with",
            scope=Scope.MULTI_FILE,
        ),
    )
}


def applicable_categories(level: SpecLevel, scope: Scope) -> list[DefectCategory]:
    """Categories that can be reported against a document of ``level``
    reviewed with the given file ``scope``, in declaration order."""
    return [
        CATEGORIES[kind]
        for kind in DefectKind
        if level in CATEGORIES[kind].applicability and CATEGORIES[kind].scope == scope
    ]


def finding_id(doc_id: str, section_index: int, category: str, excerpt: str) -> str:
    """16-hex-digit content hash identifying a finding across runs."""
    if isinstance(category, DefectKind):
        category = category.value
    payload = "\x1f".join((doc_id, str(int(section_index)), category, excerpt))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Section:
    index: int
    heading: Optional[str]
    body: str
    token_estimate: int
    char_span: tuple

    def __post_init__(self):
        start, end = self.char_span
        if self.index < 0:
            raise ValueError("section index must be non-negative")
        if not 0 <= start < end:
            raise ValueError(f"invalid char_span {self.char_span!r}")
        if len(self.body.encode("utf-8")) != end - start:
            raise ValueError("body length does not match char_span")

    @property
    def label(self) -> str:
        if self.heading:
            return f"Section {self.index} ({self.heading})"
        return f"Section {self.index} (untitled)"


@dataclass(frozen=True)
class SpecDocument:
    id: str
    title: str
    level: SpecLevel
    product_type: ProductType
    source_path: str
    sections: tuple
    total_tokens: int

    def __post_init__(self):
        if not self.sections:
            raise ValueError("a document needs at least one section")
        previous_end = None
        for expected, section in enumerate(self.sections):
            if section.index != expected:
                raise ValueError(f"section indices must be 0..n-1, got {section.index} at {expected}")
            if previous_end is not None and section.char_span[0] < previous_end:
                raise ValueError("section spans overlap or are out of order")
            previous_end = section.char_span[1]
        if self.total_tokens != sum(s.token_estimate for s in self.sections):
            raise ValueError("total_tokens must equal the sum of section estimates")

    @property
    def text(self) -> str:
        return "".join(s.body for s in self.sections)

    def section(self, index: int) -> Section:
        if not 0 <= index < len(self.sections):
            raise IndexError(f"{self.id} has no section {index}")
        return self.sections[index]


class Severity(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


class ReviewStrategy(str, Enum):
    WHOLE_FILE = "WholeFile"
    SECTION_BY_SECTION = "SectionBySection"
    CROSS_LEVEL = "CrossLevel"


class Verdict(str, Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    UNSURE = "unsure"


@dataclass(frozen=True)
class Provenance:
    model_name: str
    strategy: ReviewStrategy
    prompt_digest: str


@dataclass(frozen=True)
class ReviewFinding:
    """One defect reported by the model.

    ``level`` is the level of the reviewed document; it is kept on the
    finding so the category applicability rule can be enforced here rather
    than trusted to every caller.
    """

    doc_id: str
    level: SpecLevel
    section_index: int
    category: DefectKind
    severity: Severity
    excerpt: str
    explanation: str
    suggestion: str
    provenance: Provenance
    finding_id: str = field(default="")
    verdict: Optional[Verdict] = None
    note: Optional[str] = None

    def __post_init__(self):
        from .errors import InvalidFinding

        if self.section_index < 0:
            raise InvalidFinding("section_index must be non-negative")
        if self.level not in CATEGORIES[self.category].applicability:
            raise InvalidFinding(
                f"{self.category.value} does not apply to {self.level.value} documents"
            )
        expected = finding_id(self.doc_id, self.section_index, self.category.value, self.excerpt)
        if not self.finding_id:
            object.__setattr__(self, "finding_id", expected)
        elif self.finding_id != expected:
            raise InvalidFinding(f"finding_id {self.finding_id} does not match content")

    @property
    def sort_key(self):
        return (self.section_index, self.category.order, self.finding_id)

    def to_dict(self) -> dict:
        data = {
            "finding_id": self.finding_id,
            "doc_id": self.doc_id,
            "level": self.level.value,
            "section_index": self.section_index,
            "category": self.category.value,
            "severity": self.severity.value,
            "excerpt": self.excerpt,
            "explanation": self.explanation,
            "suggestion": self.suggestion,
            "provenance": {
                "model_name": self.provenance.model_name,
                "strategy": self.provenance.strategy.value,
                "prompt_digest": self.provenance.prompt_digest,
            },
        }
        if self.verdict is not None:
            data["verdict"] = self.verdict.value
            data["note"] = self.note
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ReviewFinding":
        prov = data["provenance"]
        verdict = data.get("verdict")
        return cls(
            doc_id=data["doc_id"],
            level=SpecLevel(data["level"]),
            section_index=int(data["section_index"]),
            category=DefectKind(data["category"]),
            severity=Severity(data["severity"]),
            excerpt=data["excerpt"],
            explanation=data["explanation"],
            suggestion=data["suggestion"],
            provenance=Provenance(prov["model_name"], ReviewStrategy(prov["strategy"]), prov["prompt_digest"]),
            finding_id=data["finding_id"],
            verdict=Verdict(verdict) if verdict is not None else None,
            note=data.get("note"),
        )


def new_finding(doc: SpecDocument, section_index: int, **fields) -> ReviewFinding:
    """Build a finding against ``doc``, checking the section exists."""
    from .errors import InvalidFinding

    if not 0 <= section_index < len(doc.sections):
        raise InvalidFinding(f"{doc.id} has no section {section_index}")
    return ReviewFinding(doc_id=doc.id, level=doc.level, section_index=section_index, **fields)


class Direction(str, Enum):
    IN = "In"
    OUT = "Out"
    INOUT = "InOut"


@dataclass(frozen=True)
class RtlParameter:
    name: str
    default: Optional[str] = None


@dataclass(frozen=True)
class RtlPort:
    name: str
    direction: Direction
    width_bits: object  # int, or str when the width depends on parameters

    def __post_init__(self):
        if isinstance(self.width_bits, int) and self.width_bits < 1:
            raise ValueError(f"port {self.name} has non-positive width")


@dataclass(frozen=True)
class RtlModule:
    name: str
    parameters: tuple = ()
    ports: tuple = ()

    def __post_init__(self):
        if not self.name:
            raise ValueError("module name must be non-empty")
        names = [p.name for p in self.ports]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate port names in module {self.name}")

    def port(self, name: str) -> RtlPort:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)


class GenerationSource(str, Enum):
    FROM_BRIEF = "FromBrief"
    FROM_RTL = "FromRtl"


@dataclass(frozen=True)
class SpecBodySection:
    heading: str
    body: str


@dataclass(frozen=True)
class GeneratedSpec:
    title: str
    level: SpecLevel
    body_sections: tuple
    source: GenerationSource
    model_name: str
    prompt_digest: str

    def __post_init__(self):
        if self.level is SpecLevel.HAS:
            raise ValueError("HAS documents are never generated")

    def to_markdown(self) -> str:
        parts = [f"# {self.title}\n"]
        for sec in self.body_sections:
            if sec.heading:
                parts.append(f"\n## {sec.heading}\n")
            body = sec.body.strip("\n")
            if body:
                parts.append(f"\n{body}\n")
        return "".join(parts)
