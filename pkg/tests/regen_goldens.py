"""Rewrite the golden files after an intentional template or fixture change.

    python3 -m tests.regen_goldens
"""

import json
from pathlib import Path

from specsmith.fixtures import cassette_plan, fixture_dir, load_fixture, run_plan_entry
from specsmith.gateway import Gateway, ReplayBackend, load_cassette_dir
from specsmith.model import SpecLevel
from specsmith.prompts import (
    default_store,
    format_prompt,
    render_cross_level,
    render_generation_init,
    render_review_init,
    render_rtl_request,
    render_section_review,
)
from specsmith.rtl import parse_verilog_interface

GOLDEN = Path(__file__).parent / "golden"


def golden_prompts() -> dict:
    timer = load_fixture("las-timer").document()
    bus = load_fixture("has-bus").document()
    adder_src = (fixture_dir() / "rtl" / "adder.v").read_text(encoding="utf-8")
    [adder] = parse_verilog_interface(adder_src)
    return {
        "review_init_las": render_review_init(SpecLevel.LAS),
        "review_init_mas": render_review_init(SpecLevel.MAS),
        "review_init_has": render_review_init(SpecLevel.HAS),
        "generation_init_las": render_generation_init(SpecLevel.LAS),
        "rtl_request_adder": render_rtl_request(adder_src, adder),
        "section_review_timer_datapath": render_section_review(timer.sections[4]),
        "cross_level_bus_timer": render_cross_level(
            bus.text, timer.sections[2], higher_level=SpecLevel.HAS, lower_level=SpecLevel.LAS
        ),
    }


GOLDEN_REPORTS = ("cassettes/las-timer.sections.json", "cassettes/las-timer.whole.json")


def golden_reports() -> dict:
    gw = Gateway(ReplayBackend(load_cassette_dir(fixture_dir() / "cassettes")))
    out = {}
    for entry in cassette_plan():
        if entry["file"] in GOLDEN_REPORTS:
            report = run_plan_entry(entry, gw)
            out[f"{entry['doc']}.{entry['strategy']}.report"] = report
    return out


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main():
    for name, prompt in golden_prompts().items():
        _write(GOLDEN / "prompts" / f"{name}.txt", format_prompt(prompt))
    _write(GOLDEN / "template_digests.json", json.dumps(default_store().digests(), indent=2) + "\n")
    for stem, report in golden_reports().items():
        _write(GOLDEN / "reports" / f"{stem}.json", report.to_json())
        _write(GOLDEN / "reports" / f"{stem}.md", report.to_markdown())


if __name__ == "__main__":
    main()
