"""Verilog module interfaces, and checking them against a specification's
port table.

Only the contract surface is parsed (module name, parameters, ports); bodies
are scanned just far enough to find non-ANSI direction declarations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import MalformedTable, NoModuleFound, NoPortTable, UnbalancedDelimiters, UndeclaredPort
from .model import Direction, GeneratedSpec, RtlModule, RtlParameter, RtlPort

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_$]*|\\\S+)
  | (?P<num>\d*'[sS]?[bBoOdDhH][0-9a-fA-FxXzZ?_]+|\d[\d_]*(?:\.\d+)?)
  | (?P<macro>`[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\*\*|<<<|>>>|<<|>>|==|!=|<=|>=|&&|\|\||\+:|-:|::|.)
    """,
    re.VERBOSE | re.DOTALL,
)

_DIRECTIONS = {"input": Direction.IN, "output": Direction.OUT, "inout": Direction.INOUT}
_TYPE_WORDS = {
    "wire", "reg", "logic", "tri", "tri0", "tri1", "triand", "trior", "wand", "wor",
    "uwire", "supply0", "supply1", "signed", "unsigned", "var", "bit",
}
_INTEGER_TYPES = {"integer": 32, "int": 32, "byte": 8, "shortint": 16, "longint": 64}
_PAIRS = {"(": ")", "[": "]", "{": "}"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    end: int


def strip_comments(source: str) -> str:
    """Blank out comments and string literals, keeping offsets and newlines."""
    out = []
    i = 0
    n = len(source)
    while i < n:
        two = source[i:i + 2]
        if two == "//":
            j = source.find("\n", i)
            j = n if j == -1 else j
            out.append(" " * (j - i))
            i = j
        elif two == "/*":
            j = source.find("*/", i + 2)
            if j == -1:
                raise UnbalancedDelimiters("unterminated block comment")
            out.append(re.sub(r"[^\n]", " ", source[i:j + 2]))
            i = j + 2
        elif source[i] == '"':
            j = i + 1
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    raise UnbalancedDelimiters("unterminated string literal")
                j += 2 if source[j] == "\\" else 1
            if j >= n:
                raise UnbalancedDelimiters("unterminated string literal")
            out.append(" " * (j + 1 - i))
            i = j + 1
        else:
            out.append(source[i])
            i += 1
    return "".join(out)


def tokenize(source: str) -> list[Token]:
    tokens = []
    for m in _TOKEN_RE.finditer(source):
        kind = m.lastgroup
        if kind == "ws":
            continue
        tokens.append(Token(kind, m.group(), m.start(), m.end()))
    return tokens


def _check_balance(tokens):
    stack = []
    for tok in tokens:
        if tok.kind != "op":
            continue
        if tok.text in _PAIRS:
            stack.append(tok)
        elif tok.text in _PAIRS.values():
            if not stack or _PAIRS[stack[-1].text] != tok.text:
                raise UnbalancedDelimiters(f"unexpected {tok.text!r} at offset {tok.start}")
            stack.pop()
    if stack:
        raise UnbalancedDelimiters(f"unclosed {stack[-1].text!r} at offset {stack[-1].start}")


class _Parser:
    def __init__(self, source: str):
        self.text = strip_comments(source)
        self.tokens = tokenize(self.text)
        _check_balance(self.tokens)
        self.pos = 0

    def peek(self, offset=0) -> Optional[Token]:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise UnbalancedDelimiters("unexpected end of source")
        self.pos += 1
        return tok

    def expect(self, text) -> Token:
        tok = self.next()
        if tok.text != text:
            raise UnbalancedDelimiters(f"expected {text!r} at offset {tok.start}, found {tok.text!r}")
        return tok

    def span_text(self, toks) -> str:
        if not toks:
            return ""
        return " ".join(self.text[toks[0].start:toks[-1].end].split())

    def group(self) -> list[Token]:
        """Consume a balanced group starting at an opening bracket; return its inner tokens."""
        opening = self.next()
        closing = _PAIRS[opening.text]
        depth = 1
        inner = []
        while True:
            tok = self.next()
            if tok.text == opening.text:
                depth += 1
            elif tok.text == closing:
                depth -= 1
                if depth == 0:
                    return inner
            inner.append(tok)

    # -- modules --

    def modules(self) -> list[RtlModule]:
        found = []
        while self.peek() is not None:
            tok = self.next()
            if tok.kind == "id" and tok.text in ("module", "macromodule"):
                found.append(self.module())
        return found

    def module(self) -> RtlModule:
        name_tok = self.next()
        if name_tok.kind != "id":
            raise NoModuleFound(f"module keyword without a name at offset {name_tok.start}")
        while self.peek() is not None and self.peek().kind == "id" and self.peek().text in ("automatic", "static"):
            self.next()
        header_params = None
        if self.peek() is not None and self.peek().text == "#":
            self.next()
            if self.peek() is None or self.peek().text != "(":
                raise UnbalancedDelimiters(f"expected '(' after '#' in module {name_tok.text}")
            header_params = self.parameter_items(_split_commas(self.group()), header=True)
        port_items = []
        if self.peek() is not None and self.peek().text == "(":
            port_items = _split_commas(self.group())
        self.expect(";")
        body = []
        while True:
            tok = self.peek()
            if tok is None:
                raise UnbalancedDelimiters(f"module {name_tok.text} has no endmodule")
            if tok.kind == "id" and tok.text == "endmodule":
                self.next()
                break
            if tok.kind == "id" and tok.text in ("module", "macromodule"):
                raise UnbalancedDelimiters(f"module {name_tok.text} has no endmodule")
            body.append(self.next())
        body = _drop_subroutines(body)
        ports = self.ports(name_tok.text, port_items, body)
        if header_params is None:
            header_params = self.body_parameters(body)
        return RtlModule(name_tok.text, tuple(header_params), tuple(ports))

    def parameter_items(self, items, header=False) -> list[RtlParameter]:
        params = []
        for item in items:
            toks = [t for t in item if t.text not in ("parameter", "localparam")]
            if any(t.kind == "macro" for t in toks):
                raise UnbalancedDelimiters("preprocessor macros are not supported in module headers")
            if not toks:
                continue
            if "=" in [t.text for t in toks]:
                eq = [t.text for t in toks].index("=")
                name = _last_identifier(toks[:eq])
                default = self.span_text(toks[eq + 1:]) or None
            else:
                name, default = _last_identifier(toks), None
            if name:
                params.append(RtlParameter(name, default))
        return params

    def body_parameters(self, body) -> list[RtlParameter]:
        params = []
        for stmt in _statements(body):
            if stmt and stmt[0].text == "parameter":
                params.extend(self.parameter_items(_split_commas(stmt[1:])))
        return params

    def ports(self, module_name, items, body) -> list[RtlPort]:
        if any(t.kind == "macro" for item in items for t in item):
            raise UnbalancedDelimiters("preprocessor macros are not supported in module port lists")
        ansi = bool(items) and items[0] and items[0][0].text in _DIRECTIONS
        if ansi:
            return self.ansi_ports(items)
        names = []
        for item in items:
            if not item:
                continue
            if len(item) != 1 or item[0].kind != "id":
                raise UnbalancedDelimiters(f"unsupported port expression in module {module_name}")
            names.append(item[0].text)
        declared = {}
        for stmt in _statements(body):
            if stmt and stmt[0].text in _DIRECTIONS:
                for port in self.declaration(stmt):
                    declared[port.name] = port
        ports = []
        for name in names:
            if name not in declared:
                raise UndeclaredPort(f"port {name} of module {module_name} has no direction declaration")
            ports.append(declared[name])
        return ports

    def ansi_ports(self, items) -> list[RtlPort]:
        ports = []
        direction = None
        width = 1
        for item in items:
            if not item:
                continue
            if item[0].text in _DIRECTIONS:
                port = self.declaration(item)[0]
                direction, width = port.direction, port.width_bits
                ports.append(port)
            else:
                # continuation of the previous declaration: `input [3:0] a, b`
                name = _last_identifier(_before_assign(item))
                ports.append(RtlPort(name, direction, width))
        return ports

    def declaration(self, toks) -> list[RtlPort]:
        """``input [reg] [signed] [range] a, b [= init]`` -> ports."""
        direction = _DIRECTIONS[toks[0].text]
        i = 1
        width = 1
        ranges = []
        while i < len(toks):
            tok = toks[i]
            if tok.kind == "id" and tok.text in _TYPE_WORDS:
                i += 1
            elif tok.kind == "id" and tok.text in _INTEGER_TYPES:
                width = _INTEGER_TYPES[tok.text]
                i += 1
            elif tok.text == "[":
                j = _match_bracket(toks, i)
                ranges.append(toks[i + 1:j])
                i = j + 1
            else:
                break
        if ranges:
            width = self.range_width(ranges)
        names = []
        for item in _split_commas(toks[i:]):
            item = _before_assign(item)
            # unpacked dimensions after the name are ignored
            while item and item[-1].text == "]":
                item = item[:_open_bracket(item)]
            name = _last_identifier(item)
            if name:
                names.append(name)
        return [RtlPort(n, direction, width) for n in names]

    def range_width(self, ranges):
        total = 1
        texts = []
        for r in ranges:
            parts = [t.text for t in r]
            if len(parts) == 3 and parts[1] == ":" and _is_int(parts[0]) and _is_int(parts[2]):
                msb, lsb = _int(parts[0]), _int(parts[2])
                total *= abs(msb - lsb) + 1
                texts.append(f"[{msb}:{lsb}]")
            else:
                total = None
                texts.append("[" + "".join(parts) + "]")
        if total is not None:
            return total
        return "".join(texts)


def _is_int(text):
    return re.fullmatch(r"\d[\d_]*", text) is not None


def _int(text):
    return int(text.replace("_", ""))


def _split_commas(tokens) -> list[list[Token]]:
    items = [[]]
    depth = 0
    for tok in tokens:
        if tok.text in _PAIRS:
            depth += 1
        elif tok.text in _PAIRS.values():
            depth -= 1
        if tok.text == "," and depth == 0:
            items.append([])
        else:
            items[-1].append(tok)
    return [i for i in items if i] if any(items) else []


def _statements(tokens):
    stmt = []
    depth = 0
    for tok in tokens:
        if tok.text in _PAIRS:
            depth += 1
        elif tok.text in _PAIRS.values():
            depth -= 1
        if tok.text == ";" and depth == 0:
            yield stmt
            stmt = []
        else:
            stmt.append(tok)
    if stmt:
        yield stmt


def _drop_subroutines(body):
    """Remove function/task bodies, whose ``input`` declarations are not ports."""
    kept = []
    depth = 0
    for tok in body:
        if tok.kind == "id" and tok.text in ("function", "task"):
            depth += 1
        elif tok.kind == "id" and tok.text in ("endfunction", "endtask"):
            depth = max(0, depth - 1)
            continue
        if depth == 0:
            kept.append(tok)
    return kept


def _before_assign(item):
    depth = 0
    for i, tok in enumerate(item):
        if tok.text in _PAIRS:
            depth += 1
        elif tok.text in _PAIRS.values():
            depth -= 1
        elif tok.text == "=" and depth == 0:
            return item[:i]
    return item


def _last_identifier(toks) -> str:
    for tok in reversed(toks):
        if tok.kind == "id":
            return tok.text
    return ""


def _match_bracket(toks, i):
    depth = 0
    for j in range(i, len(toks)):
        if toks[j].text == "[":
            depth += 1
        elif toks[j].text == "]":
            depth -= 1
            if depth == 0:
                return j
    raise UnbalancedDelimiters("unclosed '['")


def _open_bracket(item):
    depth = 0
    for j in range(len(item) - 1, -1, -1):
        if item[j].text == "]":
            depth += 1
        elif item[j].text == "[":
            depth -= 1
            if depth == 0:
                return j
    raise UnbalancedDelimiters("unmatched ']'")


def parse_verilog_interface(source: str) -> list[RtlModule]:
    """Extract every module interface in ``source``.

    ANSI (directions in the header) and non-ANSI (directions in the body)
    styles are both recognised. Widths with integer bounds become bit counts;
    parameter-dependent widths are kept as text such as ``[WIDTH-1:0]``.
    """
    if not source or not source.strip():
        raise NoModuleFound("source is empty")
    modules = _Parser(source).modules()
    if not modules:
        raise NoModuleFound("no module declaration found")
    return modules


def serialize_module(module: RtlModule) -> str:
    """Render an interface back to ANSI Verilog (empty body)."""
    keyword = {Direction.IN: "input", Direction.OUT: "output", Direction.INOUT: "inout"}
    out = [f"module {module.name}"]
    if module.parameters:
        params = [
            f"parameter {p.name}" + (f" = {p.default}" if p.default is not None else "") for p in module.parameters
        ]
        out.append(" #(\n  " + ",\n  ".join(params) + "\n)")
    if module.ports:
        decls = []
        for p in module.ports:
            if isinstance(p.width_bits, int):
                rng = f"[{p.width_bits - 1}:0] " if p.width_bits > 1 else ""
            else:
                rng = f"{p.width_bits} "
            decls.append(f"{keyword[p.direction]} {rng}{p.name}")
        out.append(" (\n  " + ",\n  ".join(decls) + "\n)")
    out.append(";\nendmodule\n")
    return "".join(out)


# --- specification side --------------------------------------------------------


@dataclass(frozen=True)
class PortTableEntry:
    name: str
    direction: Direction
    width_bits: object = None  # int, symbolic str, or None when the table has no width column
    description: Optional[str] = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("port name must be non-empty")


INTERFACE_HEADINGS = ("interface", "ports", "port list", "port description", "pin description", "i/o", "signals")

_DIRECTION_WORDS = {
    "in": Direction.IN, "input": Direction.IN, "i": Direction.IN,
    "out": Direction.OUT, "output": Direction.OUT, "o": Direction.OUT,
    "inout": Direction.INOUT, "in/out": Direction.INOUT, "io": Direction.INOUT,
    "i/o": Direction.INOUT, "bidirectional": Direction.INOUT, "bidir": Direction.INOUT,
}


def _cells(line: str) -> list[str]:
    line = line.strip()
    if line.startswith("|"):
        line = line[1:]
    if line.endswith("|"):
        line = line[:-1]
    return [c.strip() for c in re.split(r"(?<!\\)\|", line)]


def _tables(body: str):
    """Yield lists of raw table rows (header first) found in markdown ``body``."""
    block = []
    for line in body.splitlines() + [""]:
        if line.strip().startswith("|"):
            block.append(line)
            continue
        if len(block) >= 2:
            yield block
        block = []


def parse_width(text: str):
    """Width cell -> int, symbolic text, or None when blank."""
    t = text.strip().strip("`")
    if not t or t in ("-", "—"):
        return None
    m = re.fullmatch(r"(\d+)\s*(?:-?\s*bits?)?", t, re.IGNORECASE)
    if m:
        return int(m.group(1))
    m = re.fullmatch(r"\[\s*(\d+)\s*:\s*(\d+)\s*\]", t)
    if m:
        return abs(int(m.group(1)) - int(m.group(2))) + 1
    return "".join(t.split())


def _is_interface_heading(heading: str) -> bool:
    h = re.sub(r"^[\d.\s]+", "", heading).lower()
    return any(word in h for word in INTERFACE_HEADINGS)


def extract_spec_port_table(generated: GeneratedSpec) -> list[PortTableEntry]:
    sections = [s for s in generated.body_sections if s.heading and _is_interface_heading(s.heading)]
    if not sections:
        raise NoPortTable("specification has no interface/ports section")
    entries = []
    saw_table = False
    for section in sections:
        for rows in _tables(section.body):
            saw_table = True
            header = [c.lower() for c in _cells(rows[0])]
            name_col = next((i for i, c in enumerate(header) if "name" in c), None)
            dir_col = next((i for i, c in enumerate(header) if "direction" in c or c in ("dir", "i/o")), None)
            if name_col is None or dir_col is None:
                raise MalformedTable(f"port table header {header} lacks a name or direction column")
            width_col = next((i for i, c in enumerate(header) if "width" in c or "bits" in c or "size" in c), None)
            desc_col = next((i for i, c in enumerate(header) if "desc" in c or "function" in c), None)
            for raw in rows[1:]:
                cells = _cells(raw)
                if all(re.fullmatch(r":?-{2,}:?", c) for c in cells if c):
                    continue
                if len(cells) != len(header):
                    raise MalformedTable(f"row {raw.strip()!r} has {len(cells)} cells, header has {len(header)}")
                direction = _DIRECTION_WORDS.get(cells[dir_col].strip("`* ").lower())
                if direction is None:
                    raise MalformedTable(f"unrecognised direction {cells[dir_col]!r}")
                entries.append(
                    PortTableEntry(
                        name=cells[name_col].strip("`* "),
                        direction=direction,
                        width_bits=parse_width(cells[width_col]) if width_col is not None else None,
                        description=cells[desc_col] if desc_col is not None else None,
                    )
                )
    if not saw_table:
        raise NoPortTable("interface section contains no markdown table")
    return entries


class IssueKind(str, Enum):
    MISSING_IN_SPEC = "MissingInSpec"
    MISSING_IN_RTL = "MissingInRtl"
    DIRECTION_MISMATCH = "DirectionMismatch"
    WIDTH_MISMATCH = "WidthMismatch"


@dataclass(frozen=True)
class ConsistencyIssue:
    kind: IssueKind
    port: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "port": self.port, "detail": self.detail}


def _symbolic_key(width: str) -> str:
    # "[WIDTH-1:0]" and "WIDTH" describe the same number of bits
    w = "".join(width.split())
    m = re.fullmatch(r"\[(.+)-1:0\]", w)
    if m:
        return m.group(1)
    return w.strip("[]")


def _width_issue(name, spec_width, rtl_width) -> Optional[ConsistencyIssue]:
    if spec_width is None:
        return None
    spec_int = isinstance(spec_width, int)
    rtl_int = isinstance(rtl_width, int)
    if spec_int and rtl_int:
        if spec_width != rtl_width:
            return ConsistencyIssue(IssueKind.WIDTH_MISMATCH, name, f"spec {spec_width} bits, RTL {rtl_width} bits")
        return None
    if not spec_int and not rtl_int:
        if _symbolic_key(spec_width) != _symbolic_key(rtl_width):
            return ConsistencyIssue(IssueKind.WIDTH_MISMATCH, name, f"spec {spec_width}, RTL {rtl_width}")
        return None
    return ConsistencyIssue(
        IssueKind.WIDTH_MISMATCH, name, f"symbolic width not compared numerically: spec {spec_width}, RTL {rtl_width}"
    )


def cross_check_ports(spec_ports, rtl: RtlModule) -> list[ConsistencyIssue]:
    """Compare a specification port table with an RTL interface.

    Names match case-sensitively. Every port name on either side ends up
    either matched or reported missing on the other side.
    """
    spec_by_name = {}
    for entry in spec_ports:
        spec_by_name.setdefault(entry.name, entry)
    rtl_names = {p.name for p in rtl.ports}
    issues = []
    for port in rtl.ports:
        entry = spec_by_name.get(port.name)
        if entry is None:
            issues.append(ConsistencyIssue(IssueKind.MISSING_IN_SPEC, port.name, "port exists in RTL only"))
            continue
        if entry.direction is not port.direction:
            issues.append(
                ConsistencyIssue(
                    IssueKind.DIRECTION_MISMATCH,
                    port.name,
                    f"spec {entry.direction.value}, RTL {port.direction.value}",
                )
            )
        width = _width_issue(port.name, entry.width_bits, port.width_bits)
        if width:
            issues.append(width)
    for name in spec_by_name:
        if name not in rtl_names:
            issues.append(ConsistencyIssue(IssueKind.MISSING_IN_RTL, name, "port exists in specification only"))
    return issues
