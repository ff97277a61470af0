"""Manifest of the public specification corpus.

The manifest ships metadata and source links only; the documents themselves
are not redistributed.
"""

from __future__ import annotations

import json
import urllib.request
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import DuplicateId, EmptyManifest, ParseError, UnknownLevel, UnknownProductType
from .model import ProductType, SpecLevel

MANIFEST_VERSION = 1
_REQUIRED_KEYS = {"id", "title", "level", "product_type", "source_url"}
_ALLOWED_KEYS = _REQUIRED_KEYS | {"notes"}

# Populated (level, product type) cells of the corpus table; shipped entries
# must land in one of these.
POPULATED_CELLS = frozenset(
    {
        (SpecLevel.HAS, ProductType.CPU),
        (SpecLevel.HAS, ProductType.SOC),
        (SpecLevel.HAS, ProductType.ACCELERATOR),
        (SpecLevel.HAS, ProductType.BUS_NETWORK),
        (SpecLevel.MAS, ProductType.CPU),
        (SpecLevel.MAS, ProductType.SOC),
        (SpecLevel.LAS, ProductType.CPU),
        (SpecLevel.LAS, ProductType.SOC),
        (SpecLevel.LAS, ProductType.ACCELERATOR),
        (SpecLevel.LAS, ProductType.BUS_NETWORK),
        (SpecLevel.LAS, ProductType.ARITHMETIC),
        (SpecLevel.LAS, ProductType.CRYPTO),
    }
)


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    title: str
    level: SpecLevel
    product_type: ProductType
    source_url: str
    notes: Optional[str] = None


@dataclass(frozen=True)
class ManifestStats:
    by_level: dict
    by_type: dict

    @property
    def total(self) -> int:
        return sum(self.by_level.values())


def shipped_manifest_path() -> Path:
    return Path(str(resources.files("specsmith") / "data" / "manifest.json"))


def check_manifest(data) -> tuple[list[ManifestEntry], list[Exception]]:
    """Validate parsed manifest JSON, collecting every problem found.

    Returns the entries that validated and the list of errors; callers that
    want a single exception use :func:`load_manifest`.
    """
    if not isinstance(data, dict):
        return [], [ParseError("manifest must be a JSON object")]
    errors = []
    extra = set(data) - {"version", "entries"}
    if extra:
        errors.append(ParseError(f"unknown top-level keys: {sorted(extra)}"))
    if data.get("version") != MANIFEST_VERSION:
        errors.append(ParseError(f"unsupported manifest version {data.get('version')!r}"))
    raw_entries = data.get("entries")
    if not isinstance(raw_entries, list):
        errors.append(ParseError("'entries' must be a list"))
        return [], errors

    entries = []
    seen = set()
    for pos, raw in enumerate(raw_entries):
        where = f"entry {pos}"
        if not isinstance(raw, dict):
            errors.append(ParseError(f"{where}: not an object"))
            continue
        if isinstance(raw.get("id"), str):
            where = f"entry {pos} ({raw['id']})"
        unknown = set(raw) - _ALLOWED_KEYS
        missing = _REQUIRED_KEYS - set(raw)
        if unknown:
            errors.append(ParseError(f"{where}: unknown keys {sorted(unknown)}"))
        if missing:
            errors.append(ParseError(f"{where}: missing keys {sorted(missing)}"))
        if unknown or missing:
            continue
        bad_types = [k for k in _REQUIRED_KEYS if not isinstance(raw[k], str) or not raw[k].strip()]
        notes = raw.get("notes")
        if notes is not None and not isinstance(notes, str):
            bad_types.append("notes")
        if bad_types:
            errors.append(ParseError(f"{where}: fields must be non-empty strings: {sorted(bad_types)}"))
            continue
        try:
            level = SpecLevel(raw["level"])
        except ValueError:
            errors.append(UnknownLevel(f"{where}: unknown level {raw['level']!r}"))
            continue
        try:
            product_type = ProductType(raw["product_type"])
        except ValueError:
            errors.append(UnknownProductType(f"{where}: unknown product type {raw['product_type']!r}"))
            continue
        if raw["id"] in seen:
            errors.append(DuplicateId(f"{where}: duplicate id {raw['id']!r}"))
            continue
        seen.add(raw["id"])
        entries.append(ManifestEntry(raw["id"], raw["title"], level, product_type, raw["source_url"], notes))
    return entries, errors


def load_manifest(path) -> list[ManifestEntry]:
    """Load and validate a manifest file; raises the first problem found."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    entries, errors = check_manifest(data)
    if errors:
        raise errors[0]
    return entries


def manifest_stats(entries) -> ManifestStats:
    if not entries:
        raise EmptyManifest("manifest has no entries")
    levels = Counter(e.level for e in entries)
    types = Counter(e.product_type for e in entries)
    return ManifestStats(
        by_level={lvl: levels[lvl] for lvl in SpecLevel if lvl in levels},
        by_type={pt: types[pt] for pt in ProductType if pt in types},
    )


def cell_conflicts(entries) -> list[ManifestEntry]:
    """Entries whose (level, product type) falls in an empty corpus-table cell."""
    return [e for e in entries if (e.level, e.product_type) not in POPULATED_CELLS]


def check_links(entries, timeout: float = 10.0) -> dict:
    """HEAD each distinct source URL; maps url -> status code or error text.

    Network access; never called during validation.
    """
    results = {}
    for url in sorted({e.source_url for e in entries}):
        req = urllib.request.Request(url, method="HEAD", headers={"User-Agent": "specsmith-linkcheck"})
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                results[url] = resp.status
        except Exception as exc:  # report every failure mode, keep going
            results[url] = f"{type(exc).__name__}: {exc}"
    return results
