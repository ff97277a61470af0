"""Prompt templates and their deterministic rendering.

Templates are plain UTF-8 files in ``templates/`` (one per template id) with
``{slot}`` placeholders. The slot set of every template is declared here, so
an edit that adds or drops a placeholder fails at load time.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import EmptyBrief, EmptyInput, EmptyRtl, EmptySection, TemplateError, UnsupportedLevel
from .gateway import ChatMessage, Role
from .model import (
    LEVEL_DEFINITIONS,
    LEVEL_TITLES,
    RtlModule,
    Scope,
    Section,
    SpecLevel,
    applicable_categories,
)

SLOT_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")

TEMPLATE_SLOTS = {
    "generation_init": {"level_title", "level_code", "level_definition", "response_format"},
    "brief_request": {"brief"},
    "rtl_request": {"module_summary", "rtl_source"},
    "review_init": {"level_title", "level_code", "level_definition", "categories", "findings_format"},
    "findings_format": set(),
    "findings_reminder": set(),
    "section_review": {"section_label", "section_text", "findings_reminder"},
    "cross_level": {"higher_label", "higher_text", "lower_label", "section_label", "section_text", "findings_reminder"},
    "whole_document": {"title", "document_text"},
    "summary_request": set(),
    "section_detail_request": {"section_label", "section_first_line", "findings_reminder"},
    "reask": set(),
}

# Section layout requested from the generator, per level: (heading, what goes in it).
RESPONSE_SKELETON = {
    SpecLevel.MAS: (
        ("Overview", "purpose of the chip, main features and the block diagram described in prose"),
        ("Interface", "external ports and buses of the chip"),
        ("Functional Description", "role of each major block and how the blocks interconnect"),
        ("Architectural Parameters", "primary parameters such as memory sizes, widths and clock domains"),
    ),
    SpecLevel.LAS: (
        ("Overview", "purpose of the block and its main features"),
        ("Interface", "every port with direction, width and meaning"),
        ("Functional Description", "datapath, internal signals and registers"),
        ("State Machines", "each state machine with its states, transitions and outputs"),
        ("Timing and Reset", "latency, clocking and the reset value of every register"),
    ),
}


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    required_slots: frozenset
    body: str

    def __post_init__(self):
        found = set(SLOT_RE.findall(self.body))
        if found != set(self.required_slots):
            raise TemplateError(
                f"template {self.template_id}: placeholders {sorted(found)} "
                f"do not match declared slots {sorted(self.required_slots)}"
            )

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.body.encode("utf-8")).hexdigest()

    def render(self, **values) -> str:
        missing = self.required_slots - values.keys()
        extra = values.keys() - self.required_slots
        if missing or extra:
            raise TemplateError(
                f"template {self.template_id}: missing slots {sorted(missing)}, unexpected {sorted(extra)}"
            )
        return SLOT_RE.sub(lambda m: str(values[m.group(1)]), self.body)


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    messages: tuple
    digest: str


class TemplateStore:
    def __init__(self, directory=None):
        if directory is None:
            directory = Path(str(resources.files("specsmith") / "templates"))
        self.directory = Path(directory)
        self.templates = {}
        for template_id, slots in TEMPLATE_SLOTS.items():
            path = self.directory / f"{template_id}.txt"
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise TemplateError(f"cannot read template {path}: {exc}") from exc
            if text.endswith("\n"):
                text = text[:-1]
            self.templates[template_id] = PromptTemplate(template_id, frozenset(slots), text)

    def __getitem__(self, template_id) -> PromptTemplate:
        return self.templates[template_id]

    def digests(self) -> dict:
        return {tid: t.digest for tid, t in sorted(self.templates.items())}


_default_store: Optional[TemplateStore] = None


def default_store() -> TemplateStore:
    global _default_store
    if _default_store is None:
        _default_store = TemplateStore()
    return _default_store


def _prompt(template_id, role, content) -> RenderedPrompt:
    messages = (ChatMessage(role, content),)
    blob = json.dumps(
        {"template_id": template_id, "messages": [m.to_dict() for m in messages]},
        sort_keys=True,
        ensure_ascii=False,
    )
    return RenderedPrompt(template_id, messages, hashlib.sha256(blob.encode("utf-8")).hexdigest())


def _text(store, template_id, **values) -> str:
    return (store or default_store())[template_id].render(**values)


def _level_slots(level):
    return {
        "level_title": LEVEL_TITLES[level],
        "level_code": level.value,
        "level_definition": LEVEL_DEFINITIONS[level],
    }


def render_generation_init(level: SpecLevel, store=None) -> RenderedPrompt:
    level = SpecLevel(level)
    if level not in RESPONSE_SKELETON:
        raise UnsupportedLevel(f"{level.value} specifications are not generated")
    layout = "\n".join(f"{i}. {head}: {what}" for i, (head, what) in enumerate(RESPONSE_SKELETON[level], 1))
    content = _text(store, "generation_init", response_format=layout, **_level_slots(level))
    return _prompt("generation_init", Role.SYSTEM, content)


def render_brief_request(brief: str, store=None) -> RenderedPrompt:
    if not brief or not brief.strip():
        raise EmptyBrief("design brief is empty")
    return _prompt("brief_request", Role.USER, _text(store, "brief_request", brief=brief))


def module_summary(module: RtlModule) -> str:
    lines = [f"module {module.name}"]
    if module.parameters:
        lines.append("  parameters:")
        for p in module.parameters:
            lines.append(f"    - {p.name}" + (f" = {p.default}" if p.default is not None else ""))
    else:
        lines.append("  parameters: none")
    if module.ports:
        lines.append("  ports:")
        direction = {"In": "input", "Out": "output", "InOut": "inout"}
        for p in module.ports:
            width = f"{p.width_bits} bit" + ("s" if p.width_bits != 1 else "") if isinstance(p.width_bits, int) else p.width_bits
            lines.append(f"    - {p.name}: {direction[p.direction.value]}, {width}")
    else:
        lines.append("  ports: none")
    return "\n".join(lines)


def render_rtl_request(rtl_source: str, module: RtlModule, store=None) -> RenderedPrompt:
    if not rtl_source or not rtl_source.strip():
        raise EmptyRtl("RTL source is empty")
    content = _text(store, "rtl_request", module_summary=module_summary(module), rtl_source=rtl_source.rstrip("\n"))
    return _prompt("rtl_request", Role.USER, content)


def render_review_init(level: SpecLevel, store=None) -> RenderedPrompt:
    level = SpecLevel(level)
    categories = "\n".join(
        f"- [{c.kind.value}] {c.name}: {c.definition}." for c in applicable_categories(level, Scope.SINGLE_FILE)
    )
    content = _text(
        store,
        "review_init",
        categories=categories,
        findings_format=_text(store, "findings_format"),
        **_level_slots(level),
    )
    return _prompt("review_init", Role.SYSTEM, content)


def render_section_review(section: Section, store=None, label: Optional[str] = None) -> RenderedPrompt:
    if not section.body.strip():
        raise EmptySection(f"section {section.index} has an empty body")
    content = _text(
        store,
        "section_review",
        section_label=label or section.label,
        section_text=section.body.rstrip("\n"),
        findings_reminder=_text(store, "findings_reminder"),
    )
    return _prompt("section_review", Role.USER, content)


def render_cross_level(
    higher: str,
    lower_section: Section,
    store=None,
    *,
    higher_level: Optional[SpecLevel] = None,
    lower_level: Optional[SpecLevel] = None,
    label: Optional[str] = None,
) -> RenderedPrompt:
    if not higher or not higher.strip():
        raise EmptyInput("higher-level text is empty")
    if not lower_section.body.strip():
        raise EmptyInput(f"lower-level section {lower_section.index} is empty")
    content = _text(
        store,
        "cross_level",
        higher_label=SpecLevel(higher_level).value if higher_level else "higher level",
        higher_text=higher.rstrip("\n"),
        lower_label=SpecLevel(lower_level).value if lower_level else "lower level",
        section_label=label or lower_section.label,
        section_text=lower_section.body.rstrip("\n"),
        findings_reminder=_text(store, "findings_reminder"),
    )
    return _prompt("cross_level", Role.USER, content)


def render_whole_document(title: str, document_text: str, store=None) -> RenderedPrompt:
    if not document_text.strip():
        raise EmptyInput("document is empty")
    content = _text(store, "whole_document", title=title, document_text=document_text.rstrip("\n"))
    return _prompt("whole_document", Role.USER, content)


def render_summary_request(store=None) -> RenderedPrompt:
    return _prompt("summary_request", Role.USER, _text(store, "summary_request"))


def render_section_detail_request(section: Section, store=None) -> RenderedPrompt:
    first_line = next((ln for ln in section.body.splitlines() if ln.strip()), "")
    content = _text(
        store,
        "section_detail_request",
        section_label=section.label,
        section_first_line=first_line,
        findings_reminder=_text(store, "findings_reminder"),
    )
    return _prompt("section_detail_request", Role.USER, content)


def render_reask(store=None) -> RenderedPrompt:
    return _prompt("reask", Role.USER, _text(store, "reask"))


def format_prompt(prompt: RenderedPrompt) -> str:
    """Plain-text dump used for golden files."""
    out = [f"template: {prompt.template_id}", f"digest: {prompt.digest}"]
    for m in prompt.messages:
        out.append(f"--- {m.role.value} ---")
        out.append(m.content)
    return "\n".join(out) + "\n"
