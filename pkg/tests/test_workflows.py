import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specsmith.errors import (
    ContextOverflow,
    LevelOrderViolation,
    NoModuleFound,
    ParseFailed,
    StrategyRequiresSplit,
    UnknownFindingId,
    UnsupportedLevel,
)
from specsmith.fixtures import cassette_plan, fixture_dir, run_plan_entry
from specsmith.gateway import (
    Cassette,
    ChatMessage,
    Gateway,
    MockBackend,
    MockRule,
    ReplayBackend,
    Role,
)
from specsmith.ingest import build_document
from specsmith.model import CATEGORIES, DefectKind, ProductType, ReviewStrategy, SpecLevel, Verdict
from specsmith.rtl import IssueKind
from specsmith.workflows import (
    ReviewReport,
    TriageAnnotation,
    apply_triage,
    excerpt_in_section,
    find_json_array,
    generate_from_brief,
    generate_from_rtl,
    normalize_category,
    parse_findings,
    review_cross_level,
    review_section_by_section,
    review_whole_file,
)

K = DefectKind


def reply(text):
    return ChatMessage(Role.ASSISTANT, text)


def item(category="Typographical", excerpt="x", **over):
    d = {"category": category, "severity": "High", "excerpt": excerpt, "explanation": "e", "suggestion": "s"}
    d.update(over)
    return d


class Counting:
    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def complete(self, conv):
        self.calls += 1
        return self.inner.complete(conv)


def rules(name):
    return MockBackend.load(fixture_dir() / "rules" / f"{name}.json")


# --- parse_findings --------------------------------------------------------------------------


def test_two_element_array():
    text = json.dumps([item(), item("IncompleteOrUnclear", "y")])
    found = parse_findings(reply(text), "d", 1, SpecLevel.LAS)
    assert [f.category for f in found] == [K.TYPOGRAPHICAL, K.INCOMPLETE_OR_UNCLEAR]
    assert all(f.section_index == 1 for f in found)


def test_prose_is_parse_failure():
    with pytest.raises(ParseFailed):
        parse_findings(reply("no issues found"), "d", 0, SpecLevel.LAS)


def test_typo_normalised():
    [f] = parse_findings(reply(json.dumps([item("Typo")])), "d", 0, SpecLevel.HAS)
    assert f.category is K.TYPOGRAPHICAL


@pytest.mark.parametrize(
    "label,kind",
    [
        ("Combinational Loops Error", K.COMBINATIONAL_LOOP),
        ("combinational-loop", K.COMBINATIONAL_LOOP),
        ("Uninitialized Register Value Error", K.UNINITIALIZED_REGISTER),
        ("Improvement for Architectural Design", K.ARCH_IMPROVEMENT),
        ("Inconsistence or Contradiction Error", K.INCONSISTENCY_WITHIN_FILE),
        ("Inconsistence or Contradiction Error (Across Various Levels)", K.CROSS_LEVEL_INCONSISTENCY),
        ("Typographicl", K.TYPOGRAPHICAL),
        ("weather report", None),
        (7, None),
    ],
)
def test_normalize_category(label, kind):
    assert normalize_category(label) is kind


def test_inapplicable_and_incomplete_elements_dropped():
    text = json.dumps([item("CombinationalLoop"), item("ArchImprovement"), {"category": "Typographical"}, "junk", item()])
    found = parse_findings(reply(text), "d", 0, SpecLevel.HAS)
    assert [f.category for f in found] == [K.TYPOGRAPHICAL]


def test_severity_defaults_to_medium():
    d = item()
    del d["severity"]
    [f] = parse_findings(reply(json.dumps([d])), "d", 0, SpecLevel.LAS)
    assert f.severity.value == "Medium"


def test_fenced_array_preferred_over_bracketed_prose():
    text = "See [1] for details.\n```json\n" + json.dumps([item()]) + "\n```"
    assert find_json_array(text) == [item()]
    assert find_json_array("[]") == []
    assert find_json_array("nothing") is None


_labels = st.one_of(st.sampled_from([k.value for k in K] + [c.name for c in CATEGORIES.values()]), st.text(max_size=20))


@settings(max_examples=150)
@given(st.lists(_labels, max_size=8), st.sampled_from(list(SpecLevel)))
def test_no_inapplicable_finding_survives(labels, level):
    text = json.dumps([item(label, f"e{i}") for i, label in enumerate(labels)])
    for f in parse_findings(reply(text), "d", 0, level):
        assert level in CATEGORIES[f.category].applicability
        assert f.category is not K.CROSS_LEVEL_INCONSISTENCY


# --- generation -------------------------------------------------------------------------------


def test_generate_from_brief_well_formed():
    result = generate_from_brief("sensor hub", SpecLevel.MAS, Gateway(rules("generate-brief")))
    assert result.validation.skeleton_ok
    assert result.validation.port_issues == ()
    assert result.spec.title == "Sensor Hub SoC Micro-Architecture Specification"
    assert [s.heading for s in result.spec.body_sections][:2] == ["Overview", "Interface"]


def test_generate_from_brief_prose():
    result = generate_from_brief("calendar", SpecLevel.LAS, Gateway(MockBackend([], default="Just some prose.")))
    assert len(result.spec.body_sections) == 1
    assert not result.validation.skeleton_ok
    assert "State Machines" in result.validation.missing_headings


def test_generate_has_rejected_before_request():
    backend = Counting(MockBackend([], default="x"))
    with pytest.raises(UnsupportedLevel):
        generate_from_brief("b", SpecLevel.HAS, Gateway(backend))
    assert backend.calls == 0


def test_generation_uses_generation_temperature():
    seen = []

    class Spy:
        def complete(self, conv):
            seen.append(conv.params.temperature)
            return reply("# T\n")

    generate_from_brief("b", SpecLevel.MAS, Gateway(Spy()))
    assert seen == [0.7]


def test_generate_from_rtl_consistent(fixtures_root):
    src = (fixtures_root / "rtl" / "adder.v").read_text()
    result = generate_from_rtl(src, Gateway(rules("generate-adder")))
    assert result.spec.level is SpecLevel.LAS
    assert result.validation.skeleton_ok
    assert result.validation.port_issues == ()


def test_generate_from_rtl_missing_port(fixtures_root):
    src = (fixtures_root / "rtl" / "adder.v").read_text()
    good = rules("generate-adder").default
    mutated = "\n".join(line for line in good.splitlines() if not line.startswith("| sum "))
    result = generate_from_rtl(src, Gateway(MockBackend([], default=mutated)))
    assert [(i.kind, i.port) for i in result.validation.port_issues] == [(IssueKind.MISSING_IN_SPEC, "sum")]


def test_generate_from_rtl_without_table(fixtures_root):
    src = (fixtures_root / "rtl" / "adder.v").read_text()
    result = generate_from_rtl(src, Gateway(MockBackend([], default="# adder\n\n## Overview\n\nAdds.\n")))
    assert result.validation.port_table_error.startswith("NoPortTable")
    assert {i.kind for i in result.validation.port_issues} == {IssueKind.MISSING_IN_SPEC}


def test_generate_from_rtl_unparseable_makes_no_request():
    backend = Counting(MockBackend([], default="x"))
    with pytest.raises(NoModuleFound):
        generate_from_rtl("wire x;", Gateway(backend))
    assert backend.calls == 0


# --- whole file ------------------------------------------------------------------------------


def test_whole_file_report(timer_doc, replay):
    report = review_whole_file(timer_doc, replay)
    assert report.strategy is ReviewStrategy.WHOLE_FILE
    assert report.summary.startswith("The timer specification")
    assert len(report.findings) >= 1
    assert report.stats.requests_made == 1 + len(timer_doc.sections)


def test_whole_file_conversation_shape(timer_doc):
    convs = []

    class Spy:
        def complete(self, conv):
            convs.append(conv)
            return reply("summary" if len(convs) == 1 else "[]")

    review_whole_file(timer_doc, Gateway(Spy()))
    roles = [m.role for m in convs[-1].messages]
    assert roles[:3] == [Role.SYSTEM, Role.USER, Role.USER]
    assert timer_doc.text.rstrip("\n") in convs[0].messages[1].content
    # every later request extends the same conversation
    for a, b in zip(convs, convs[1:]):
        assert b.messages[: len(a.messages)] == a.messages


def test_whole_file_over_budget_makes_no_request(timer_doc):
    backend = Counting(MockBackend([], default="[]"))
    with pytest.raises(StrategyRequiresSplit):
        review_whole_file(timer_doc, Gateway(backend), budget=100)
    assert backend.calls == 0


def test_whole_file_overflow_guidance(timer_doc):
    class Overflow:
        def complete(self, conv):
            raise ContextOverflow("too long")

    with pytest.raises(ContextOverflow, match="section-by-section"):
        review_whole_file(timer_doc, Gateway(Overflow()))


def test_whole_file_replay_is_deterministic(timer_doc, replay):
    assert review_whole_file(timer_doc, replay).to_json() == review_whole_file(timer_doc, replay).to_json()


# --- section by section ---------------------------------------------------------------------


def test_three_section_fixture(bus_doc, replay):
    report = review_section_by_section(bus_doc, replay)
    assert report.stats.sections_reviewed == 3
    assert report.stats.requests_made == 3
    assert [f.section_index for f in report.findings] == [0, 1, 2]


def test_sections_conversations_are_independent(timer_doc):
    convs = []

    class Spy:
        def complete(self, conv):
            convs.append(conv)
            return reply("[]")

    review_section_by_section(timer_doc, Gateway(Spy(), parallelism=1))
    assert len(convs) == len(timer_doc.sections)
    assert all([m.role for m in c.messages] == [Role.SYSTEM, Role.USER] for c in convs)


def test_section_findings_quote_their_own_section(timer_doc, replay):
    report = review_section_by_section(timer_doc, replay)
    assert report.findings
    for f in report.findings:
        assert excerpt_in_section(f.excerpt, timer_doc.sections[f.section_index])
    assert report.stats.unattributed_findings == ()


def test_misattributed_excerpt_flagged(timer_doc):
    backend = MockBackend([MockRule(("Section 2 (",), None, json.dumps([item(excerpt="COUNT has no reset value")]))], "[]")
    report = review_section_by_section(timer_doc, Gateway(backend))
    assert report.stats.unattributed_findings == (report.findings[0].finding_id,)
    assert "excerpt not found" in report.to_markdown()


def test_missing_cassette_entry_degrades_one_section(timer_doc, cassette):
    entry = next(e for e in cassette_plan() if e["file"] == "cassettes/las-timer.sections.json")
    full = run_plan_entry(entry, Gateway(ReplayBackend(cassette)))
    own = Cassette.load(fixture_dir() / "cassettes" / "las-timer.sections.json")
    pruned = Cassette([i for i in own.interactions if "Section 4 (Datapath)" not in i.request.messages[1].content])
    assert len(pruned.interactions) == len(own.interactions) - 1
    report = review_section_by_section(timer_doc, Gateway(ReplayBackend(pruned)))
    assert [d.section_index for d in report.stats.degraded_sections] == [4]
    assert report.stats.sections_reviewed == len(timer_doc.sections) - 1
    assert [f for f in full.findings if f.section_index != 4] == list(report.findings)


def test_reask_once_then_degrade(bus_doc):
    calls = []

    class Chatty:
        def complete(self, conv):
            calls.append(conv)
            if "Section 0 (" in conv.messages[1].content:
                return reply("[]" if conv.messages[-1].content.startswith("Respond with only") else "Looks fine to me.")
            return reply("Still prose.")

    report = review_section_by_section(bus_doc, Gateway(Chatty(), parallelism=1))
    assert report.stats.requests_made == 6
    assert [d.section_index for d in report.stats.degraded_sections] == [1, 2]
    assert all("ParseFailed" in d.error for d in report.stats.degraded_sections)
    assert report.stats.sections_reviewed == 1


def test_oversized_section_is_chunked():
    body = "# Big\n\n" + ("lorem ipsum dolor sit amet " * 12 + "\n\n") * 20
    doc = build_document("big", "Big", SpecLevel.HAS, ProductType.CPU, "b.md", body)
    seen = []

    class Spy:
        def complete(self, conv):
            seen.append(conv.messages[1].content)
            return reply("[]")

    report = review_section_by_section(doc, Gateway(Spy(), parallelism=1), budget=400)
    assert len(seen) > 1 and all("part" in s.split("\n")[0] for s in seen)
    assert report.stats.sections_reviewed == 1


def test_context_overflow_rechunks(timer_doc):
    class Picky:
        def complete(self, conv):
            if len(conv.messages[1].content) > 900:
                raise ContextOverflow("too long")
            return reply("[]")

    report = review_section_by_section(timer_doc, Gateway(Picky()))
    assert report.stats.context_overflows >= 1
    assert report.stats.degraded_sections == ()
    assert report.stats.sections_reviewed == len(timer_doc.sections)


def test_parallelism_does_not_change_report(timer_doc, replay):
    one = review_section_by_section(timer_doc, replay, parallelism=1).to_json()
    four = review_section_by_section(timer_doc, replay, parallelism=4).to_json()
    assert one == four


def test_duplicate_findings_collapse(bus_doc):
    dup = json.dumps([item(excerpt="low-speed periferals"), item(excerpt="low-speed periferals")])
    report = review_section_by_section(bus_doc, Gateway(MockBackend([MockRule(("Section 0 (",), None, dup)], "[]")))
    assert len(report.findings) == 1


# --- cross level ---------------------------------------------------------------------------------


def test_cross_level_planted(bus_doc, soc_doc, uart_doc, replay):
    report = review_cross_level(bus_doc, soc_doc, replay)
    assert [(f.section_index, f.category) for f in report.findings] == [(1, K.CROSS_LEVEL_INCONSISTENCY)]
    report = review_cross_level(soc_doc, uart_doc, replay)
    assert [(f.section_index, f.category) for f in report.findings] == [(2, K.CROSS_LEVEL_INCONSISTENCY)]


def test_cross_level_consistent_pair(soc_doc, timer_doc, replay):
    report = review_cross_level(soc_doc, timer_doc, replay)
    assert report.findings == () and report.stats.sections_reviewed == len(timer_doc.sections)


def test_cross_level_order(bus_doc, timer_doc, soc_doc, replay):
    with pytest.raises(LevelOrderViolation):
        review_cross_level(timer_doc, bus_doc, replay)
    with pytest.raises(LevelOrderViolation):
        review_cross_level(soc_doc, soc_doc, replay)


def test_cross_level_keeps_only_cross_findings(soc_doc, timer_doc):
    text = json.dumps([item("Typographical"), item("CrossLevelInconsistency", "COUNT has no reset value")])
    report = review_cross_level(soc_doc, timer_doc, Gateway(MockBackend([MockRule(("Section 6 (",), None, text)], "[]")))
    assert [f.category for f in report.findings] == [K.CROSS_LEVEL_INCONSISTENCY]
    assert report.stats.dropped_elements == 1


def test_cross_level_condenses_large_higher_doc(timer_doc):
    filler = "This detail is dropped. " * 30
    text = f"# Goals\n\nFirst paragraph kept.\n\n{filler}\n\n# Scope\n\nScope kept.\n\n{filler}\n"
    higher = build_document("h", "H", SpecLevel.HAS, ProductType.SOC, "h.md", text)
    seen = []

    class Spy:
        def complete(self, conv):
            seen.append(conv.messages[0].content)
            return reply("[]")

    review_cross_level(higher, timer_doc, Gateway(Spy(), parallelism=1), budget=300)
    assert "First paragraph kept." in seen[0] and "Scope kept." in seen[0]
    assert "dropped" not in seen[0]


# --- reports and triage ---------------------------------------------------------------------------


def test_report_round_trip_and_order(timer_doc, replay):
    report = review_section_by_section(timer_doc, replay)
    assert ReviewReport.from_dict(json.loads(report.to_json())) == report
    keys = [f.sort_key for f in report.findings]
    assert keys == sorted(keys)
    assert report.stats.sections_reviewed <= len(timer_doc.sections)
    with pytest.raises(ValueError):
        ReviewReport(report.doc_id, report.strategy, None, tuple(reversed(report.findings)), report.stats)


@pytest.fixture
def bus_report(bus_doc, replay):
    return review_section_by_section(bus_doc, replay)


def test_triage_reject_all(bus_report):
    out = apply_triage(bus_report, [TriageAnnotation(f.finding_id, Verdict.REJECTED) for f in bus_report.findings])
    assert out.findings == () and out.stats == bus_report.stats


def test_triage_empty_is_identity(bus_report):
    assert apply_triage(bus_report, []) == bus_report


def test_triage_one_rejection(bus_report):
    first, second, third = bus_report.findings
    out = apply_triage(
        bus_report,
        [TriageAnnotation(second.finding_id, Verdict.REJECTED), TriageAnnotation(third.finding_id, Verdict.UNSURE, "check")],
    )
    assert [f.finding_id for f in out.findings] == [first.finding_id, third.finding_id]
    assert out.findings[1].verdict is Verdict.UNSURE and out.findings[1].note == "check"


def test_triage_unknown_id(bus_report):
    with pytest.raises(UnknownFindingId):
        apply_triage(bus_report, [TriageAnnotation("0" * 16, Verdict.ACCEPTED)])
