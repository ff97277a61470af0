"""Turn a plain-text or markdown specification into a :class:`SpecDocument`.

Splitting is purely lexical and happens here, never in the model: every
section is a contiguous byte range of the source, and the ranges tile the
file exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import BudgetTooSmall, EmptyDocument, EncodingError, InvalidId
from .model import ProductType, Section, SpecDocument, SpecLevel

DEFAULT_CHUNK_BUDGET = 6000
MIN_CHUNK_BUDGET = 64
BYTES_PER_TOKEN = 4

_ID_RE = re.compile(r"[a-z0-9-]+")
_ATX_RE = re.compile(r"^(#{1,6})[ \t]+(.*?)(?:[ \t]+#+)?[ \t]*$")
_NUMBERED_RE = re.compile(r"^\d+(?:\.\d+)*\.?[ \t]+[^\W\d_].*$")
_CHAPTER_RE = re.compile(r"^(?:chapter|section)[ \t]+\d+\b.*$", re.IGNORECASE)
_FENCE_RE = re.compile(r"^(```|~~~)")


class HeadingStyle(str, Enum):
    MARKDOWN_ATX = "MarkdownAtx"
    NUMBERED_HEADING = "NumberedHeading"
    NAMED_CHAPTER = "NamedChapter"


@dataclass(frozen=True)
class SplitPolicy:
    heading_styles: frozenset = frozenset({HeadingStyle.MARKDOWN_ATX})
    min_section_chars: int = 0

    def __post_init__(self):
        if not self.heading_styles:
            raise ValueError("a split policy needs at least one heading style")
        if self.min_section_chars < 0:
            raise ValueError("min_section_chars must be non-negative")


@dataclass(frozen=True)
class Chunk:
    sections: tuple
    token_total: int
    part: Optional[tuple] = None  # (k, m) when a single section was sub-split

    @property
    def label(self) -> str:
        if self.part is None:
            return ", ".join(s.label for s in self.sections)
        k, m = self.part
        return f"{self.sections[0].label}, part {k} of {m}"


def estimate_tokens(text: str) -> int:
    """Rough token count: one token per four UTF-8 bytes, rounded up."""
    return -(-len(text.encode("utf-8")) // BYTES_PER_TOKEN)


def section_tokens(heading: Optional[str], body: str) -> int:
    return estimate_tokens((heading or "") + body)


def read_source(path) -> str:
    raw = Path(path).read_bytes()
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc


def _lines(source: str):
    """Yield (line, byte_offset) with line endings kept."""
    pos = 0
    offset = 0
    n = len(source)
    while pos < n:
        nl = source.find("\n", pos)
        end = n if nl == -1 else nl + 1
        line = source[pos:end]
        yield line, offset
        offset += len(line.encode("utf-8"))
        pos = end


def match_heading(line: str, styles) -> Optional[str]:
    """Return the heading title if ``line`` is a heading under ``styles``."""
    text = line.rstrip("\r\n")
    if HeadingStyle.MARKDOWN_ATX in styles:
        m = _ATX_RE.match(text)
        if m and m.group(2).strip():
            return m.group(2).strip()
    stripped = text.strip()
    if HeadingStyle.NUMBERED_HEADING in styles and _NUMBERED_RE.match(text):
        return stripped
    if HeadingStyle.NAMED_CHAPTER in styles and _CHAPTER_RE.match(text):
        return stripped
    return None


def split_sections(source: str, policy: SplitPolicy = SplitPolicy()) -> list[Section]:
    """Split ``source`` at headings recognised by ``policy``.

    Text ahead of the first heading becomes an untitled preamble section.
    Headings inside fenced code blocks are ignored.
    """
    if not source.strip():
        raise EmptyDocument("document is empty or whitespace-only")

    # (heading, start_byte, text pieces)
    raw = []
    current_heading = None
    current_start = 0
    current = []
    in_fence = None
    for line, offset in _lines(source):
        fence = _FENCE_RE.match(line.lstrip())
        if fence:
            marker = fence.group(1)
            if in_fence is None:
                in_fence = marker
            elif in_fence == marker:
                in_fence = None
        heading = None if in_fence is not None or fence else match_heading(line, policy.heading_styles)
        if heading is not None:
            if current:
                raw.append((current_heading, current_start, "".join(current)))
            current_heading, current_start, current = heading, offset, []
        current.append(line)
    raw.append((current_heading, current_start, "".join(current)))

    if policy.min_section_chars:
        raw = _merge_short(raw, policy.min_section_chars)

    sections = []
    for index, (heading, start, body) in enumerate(raw):
        end = start + len(body.encode("utf-8"))
        sections.append(Section(index, heading, body, section_tokens(heading, body), (start, end)))
    return sections


def _merge_short(raw, min_chars):
    merged = []
    for heading, start, body in raw:
        if merged and len(merged[-1][2]) < min_chars:
            prev_heading, prev_start, prev_body = merged[-1]
            merged[-1] = (prev_heading if prev_heading is not None else heading, prev_start, prev_body + body)
        elif merged and len(body) < min_chars:
            prev_heading, prev_start, prev_body = merged[-1]
            merged[-1] = (prev_heading, prev_start, prev_body + body)
        else:
            merged.append((heading, start, body))
    return merged


def build_document(
    id: str,
    title: str,
    level: SpecLevel,
    product_type: ProductType,
    source_path: str,
    source_text: str,
    policy: SplitPolicy = SplitPolicy(),
) -> SpecDocument:
    if not _ID_RE.fullmatch(id or ""):
        raise InvalidId(f"document id {id!r} must match [a-z0-9-]+")
    sections = split_sections(source_text, policy)
    return SpecDocument(
        id=id,
        title=title,
        level=SpecLevel(level),
        product_type=ProductType(product_type),
        source_path=str(source_path),
        sections=tuple(sections),
        total_tokens=sum(s.token_estimate for s in sections),
    )


def chunk_sections(sections, budget: int = DEFAULT_CHUNK_BUDGET) -> list[Chunk]:
    """Greedy first-fit packing of sections into chunks of at most ``budget``
    tokens.

    A section that alone exceeds the budget gets chunks of its own, one per
    part, produced by :func:`split_oversized`.
    """
    if budget < MIN_CHUNK_BUDGET:
        raise BudgetTooSmall(f"chunk budget {budget} is below the minimum of {MIN_CHUNK_BUDGET}")
    chunks = []
    pending = []
    pending_total = 0
    for section in sections:
        if section.token_estimate > budget:
            if pending:
                chunks.append(Chunk(tuple(pending), pending_total))
                pending, pending_total = [], 0
            parts = split_oversized(section, budget)
            for k, part in enumerate(parts, start=1):
                chunks.append(Chunk((part,), part.token_estimate, (k, len(parts))))
            continue
        if pending and pending_total + section.token_estimate > budget:
            chunks.append(Chunk(tuple(pending), pending_total))
            pending, pending_total = [], 0
        pending.append(section)
        pending_total += section.token_estimate
    if pending:
        chunks.append(Chunk(tuple(pending), pending_total))
    return chunks


def split_oversized(section: Section, budget: int) -> list[Section]:
    """Cut one section's body into parts of at most ``budget`` tokens each.

    Cuts fall on blank-line paragraph boundaries where possible, then on the
    last whitespace before the limit, then anywhere. Parts keep the parent's
    index, carry no heading (the heading line stays inside part 1's body),
    and their spans tile the parent's span.
    """
    limit = budget * BYTES_PER_TOKEN
    pieces = []
    current = ""
    for para in _paragraphs(section.body):
        if len((current + para).encode("utf-8")) <= limit:
            current += para
            continue
        if current:
            pieces.append(current)
            current = ""
        while len(para.encode("utf-8")) > limit:
            head = _cut_at_whitespace(para, limit)
            pieces.append(head)
            para = para[len(head):]
        current = para
    if current:
        pieces.append(current)

    parts = []
    start = section.char_span[0]
    for text in pieces:
        end = start + len(text.encode("utf-8"))
        parts.append(Section(section.index, None, text, estimate_tokens(text), (start, end)))
        start = end
    return parts


def _paragraphs(text: str) -> list[str]:
    """Blank-line separated blocks; trailing blank lines stay with the block
    before them so the pieces concatenate back to ``text``."""
    blocks = []
    current = []
    seen_blank = False
    for line in text.splitlines(keepends=True):
        blank = not line.strip()
        if not blank and seen_blank and current:
            blocks.append("".join(current))
            current = []
            seen_blank = False
        if blank and current:
            seen_blank = True
        current.append(line)
    if current:
        blocks.append("".join(current))
    return blocks


def _cut_at_whitespace(text: str, limit: int) -> str:
    prefix = text.encode("utf-8")[:limit].decode("utf-8", "ignore")
    if not prefix:
        # a single character wider than the limit cannot happen with limit >= 256
        prefix = text[0]
    for i in range(len(prefix) - 1, 0, -1):
        if prefix[i].isspace():
            return prefix[: i + 1]
    return prefix


# --- ingested document directories -----------------------------------------------

INDEX_SCHEMA = 1


def write_document_dir(doc: SpecDocument, out_dir) -> Path:
    """Write ``doc`` as ``<out_dir>/<id>/index.json`` plus one file per section.

    Section files hold the exact bytes of each slice, so concatenating them in
    index order rebuilds the source.
    """
    root = Path(out_dir) / doc.id
    (root / "sections").mkdir(parents=True, exist_ok=True)
    entries = []
    for s in doc.sections:
        name = f"sections/{s.index:03d}.md"
        (root / name).write_bytes(s.body.encode("utf-8"))
        entries.append(
            {
                "index": s.index,
                "heading": s.heading,
                "file": name,
                "token_estimate": s.token_estimate,
                "char_span": list(s.char_span),
            }
        )
    index = {
        "schema": INDEX_SCHEMA,
        "id": doc.id,
        "title": doc.title,
        "level": doc.level.value,
        "product_type": doc.product_type.value,
        "source_path": doc.source_path,
        "total_tokens": doc.total_tokens,
        "sections": entries,
    }
    (root / "index.json").write_text(json.dumps(index, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return root


def load_document_dir(path) -> SpecDocument:
    root = Path(path)
    index = json.loads((root / "index.json").read_text(encoding="utf-8"))
    if index.get("schema") != INDEX_SCHEMA:
        raise ValueError(f"{root}: unsupported index schema {index.get('schema')!r}")
    sections = []
    for e in index["sections"]:
        body = (root / e["file"]).read_bytes().decode("utf-8")
        sections.append(Section(e["index"], e["heading"], body, e["token_estimate"], tuple(e["char_span"])))
    return SpecDocument(
        id=index["id"],
        title=index["title"],
        level=SpecLevel(index["level"]),
        product_type=ProductType(index["product_type"]),
        source_path=index["source_path"],
        sections=tuple(sections),
        total_tokens=index["total_tokens"],
    )
