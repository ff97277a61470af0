import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specsmith.errors import MalformedTable, NoModuleFound, NoPortTable, UnbalancedDelimiters, UndeclaredPort
from specsmith.fixtures import rtl_expectations
from specsmith.model import Direction, GeneratedSpec, GenerationSource, RtlModule, RtlParameter, RtlPort, SpecBodySection, SpecLevel
from specsmith.rtl import (
    IssueKind,
    PortTableEntry,
    cross_check_ports,
    extract_spec_port_table,
    parse_verilog_interface,
    parse_width,
    serialize_module,
    strip_comments,
)


def as_dict(m):
    return {
        "name": m.name,
        "parameters": [{"name": p.name, "default": p.default} for p in m.parameters],
        "ports": [{"name": p.name, "direction": p.direction.value, "width_bits": p.width_bits} for p in m.ports],
    }


@pytest.mark.parametrize("filename", sorted(rtl_expectations()))
def test_fixture_interfaces(filename, fixtures_root):
    got = parse_verilog_interface((fixtures_root / "rtl" / filename).read_text())
    assert [as_dict(m) for m in got] == rtl_expectations()[filename]


@pytest.mark.parametrize("filename", sorted(rtl_expectations()))
def test_serialize_round_trip(filename, fixtures_root):
    for m in parse_verilog_interface((fixtures_root / "rtl" / filename).read_text()):
        assert parse_verilog_interface(serialize_module(m)) == [m]


def test_inline_examples():
    [adder] = parse_verilog_interface("module adder(input [3:0] a, input [3:0] b, output [4:0] sum); endmodule")
    assert [(p.name, p.direction, p.width_bits) for p in adder.ports] == [
        ("a", Direction.IN, 4),
        ("b", Direction.IN, 4),
        ("sum", Direction.OUT, 5),
    ]
    assert parse_verilog_interface("module t; endmodule") == [RtlModule("t")]
    [m] = parse_verilog_interface("module m(a,b); input a; output b; endmodule")
    assert [(p.name, p.direction, p.width_bits) for p in m.ports] == [("a", Direction.IN, 1), ("b", Direction.OUT, 1)]


def test_descending_and_ascending_ranges():
    [m] = parse_verilog_interface("module r(input [0:15] x, output [7:7] y); endmodule")
    assert [p.width_bits for p in m.ports] == [16, 1]


def test_parse_errors():
    with pytest.raises(NoModuleFound):
        parse_verilog_interface("// nothing here\nwire x;")
    with pytest.raises(UnbalancedDelimiters):
        parse_verilog_interface("module m(input a; endmodule")
    with pytest.raises(UnbalancedDelimiters):
        parse_verilog_interface("module m(input a); /* open comment")
    with pytest.raises(UndeclaredPort):
        parse_verilog_interface("module m(a, b); input a; endmodule")


def test_macro_in_header_rejected():
    with pytest.raises((UnbalancedDelimiters, NoModuleFound)):
        parse_verilog_interface("`define W 8\nmodule m(input [`W-1:0] a); endmodule")


def test_strip_comments_keeps_offsets_irrelevant_text():
    assert "decoy" not in strip_comments('/* module decoy; */ module x; // y\n endmodule')
    assert "fake" not in strip_comments('$display("module fake(input x);");')


# --- spec port tables ----------------------------------------------------------------

TABLE = """| Name | Direction | Width | Description |
| --- | --- | --- | --- |
| a | input | 4 | first |
| b | input | [3:0] | second |
| sum | output | 5 bits | result |
"""


def spec_with(body, heading="Interface"):
    return GeneratedSpec(
        "t", SpecLevel.LAS, (SpecBodySection("Overview", "x"), SpecBodySection(heading, body)), GenerationSource.FROM_RTL, "m", "d"
    )


def test_extract_table():
    entries = extract_spec_port_table(spec_with(TABLE))
    assert [(e.name, e.direction, e.width_bits) for e in entries] == [
        ("a", Direction.IN, 4),
        ("b", Direction.IN, 4),
        ("sum", Direction.OUT, 5),
    ]


def test_extract_errors():
    with pytest.raises(NoPortTable):
        extract_spec_port_table(spec_with(TABLE, heading="Timing"))
    with pytest.raises(NoPortTable):
        extract_spec_port_table(spec_with("no table here"))
    with pytest.raises(MalformedTable):
        extract_spec_port_table(spec_with("| Name | Width |\n| --- | --- |\n| a | 1 |\n"))
    with pytest.raises(MalformedTable):
        extract_spec_port_table(spec_with("| Name | Direction |\n| --- | --- |\n| a | sideways |\n"))


def test_parse_width():
    assert parse_width("8") == 8
    assert parse_width("[7:0]") == 8
    assert parse_width("`[WIDTH-1:0]`") == "[WIDTH-1:0]"
    assert parse_width("") is None


# --- cross-check mutation suite -----------------------------------------------------------

ADDER = RtlModule(
    "adder", (), (RtlPort("a", Direction.IN, 4), RtlPort("b", Direction.IN, 4), RtlPort("sum", Direction.OUT, 5))
)


def consistent(module):
    return [PortTableEntry(p.name, p.direction, p.width_bits) for p in module.ports]


def test_consistent_pair_has_no_issues():
    assert cross_check_ports(consistent(ADDER), ADDER) == []


def test_mutation_drop_port():
    spec = consistent(ADDER)[:2]
    assert [(i.kind, i.port) for i in cross_check_ports(spec, ADDER)] == [(IssueKind.MISSING_IN_SPEC, "sum")]


def test_mutation_flip_direction():
    spec = consistent(ADDER)
    spec[2] = dataclasses.replace(spec[2], direction=Direction.IN)
    assert [(i.kind, i.port) for i in cross_check_ports(spec, ADDER)] == [(IssueKind.DIRECTION_MISMATCH, "sum")]


def test_mutation_change_width():
    spec = consistent(ADDER)
    spec[0] = dataclasses.replace(spec[0], width_bits=8)
    assert [(i.kind, i.port) for i in cross_check_ports(spec, ADDER)] == [(IssueKind.WIDTH_MISMATCH, "a")]


def test_mutation_rename():
    spec = consistent(ADDER)
    spec[1] = dataclasses.replace(spec[1], name="B")  # matching is case-sensitive
    assert [(i.kind, i.port) for i in cross_check_ports(spec, ADDER)] == [
        (IssueKind.MISSING_IN_SPEC, "b"),
        (IssueKind.MISSING_IN_RTL, "B"),
    ]


def test_carry_out_missing_in_spec():
    rtl = RtlModule("adder", (), ADDER.ports + (RtlPort("carry_out", Direction.OUT, 1),))
    issues = cross_check_ports(consistent(ADDER), rtl)
    assert [(i.kind, i.port) for i in issues] == [(IssueKind.MISSING_IN_SPEC, "carry_out")]


def test_symbolic_widths():
    rtl = RtlModule("f", (RtlParameter("W", "8"),), (RtlPort("d", Direction.IN, "[W-1:0]"),))
    assert cross_check_ports([PortTableEntry("d", Direction.IN, "[W-1:0]")], rtl) == []
    assert cross_check_ports([PortTableEntry("d", Direction.IN, None)], rtl) == []
    [issue] = cross_check_ports([PortTableEntry("d", Direction.IN, 8)], rtl)
    assert issue.kind is IssueKind.WIDTH_MISMATCH and "symbolic" in issue.detail
    [issue] = cross_check_ports([PortTableEntry("d", Direction.IN, "[N-1:0]")], rtl)
    assert issue.kind is IssueKind.WIDTH_MISMATCH


_names = st.sets(st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True), min_size=0, max_size=6)


@settings(max_examples=100)
@given(_names, _names)
def test_cross_check_symmetric_complete(rtl_names, spec_names):
    rtl = RtlModule("m", (), tuple(RtlPort(n, Direction.IN, 1) for n in sorted(rtl_names)))
    spec = [PortTableEntry(n, Direction.IN, 1) for n in sorted(spec_names)]
    issues = cross_check_ports(spec, rtl)
    missing_spec = {i.port for i in issues if i.kind is IssueKind.MISSING_IN_SPEC}
    missing_rtl = {i.port for i in issues if i.kind is IssueKind.MISSING_IN_RTL}
    matched = rtl_names & spec_names
    assert missing_spec == rtl_names - spec_names
    assert missing_rtl == spec_names - rtl_names
    assert not (matched & (missing_spec | missing_rtl))
    assert matched | missing_spec | missing_rtl == rtl_names | spec_names
