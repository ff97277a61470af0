"""Hypothesis generators shared by the property tests."""

from hypothesis import strategies as st

from specsmith.ingest import estimate_tokens
from specsmith.model import Section

_words = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n\r"), min_size=0, max_size=40
)
_line = st.one_of(
    _words,
    _words.map(lambda w: "# " + w),
    _words.map(lambda w: "### " + w),
    st.sampled_from(["1. Intro", "2.3 Registers", "Chapter 2 Memory", "section 9 x", "```", "~~~", "", "   ", "#nospace"]),
)
_ending = st.sampled_from(["\n", "\n", "\n", "\r\n", ""])

markdown_documents = st.lists(st.tuples(_line, _ending), min_size=1, max_size=40).map(
    lambda pairs: "".join(line + end for line, end in pairs)
).filter(lambda s: s.strip())


@st.composite
def section_lists(draw):
    """Consecutive sections over random text, with honest token estimates."""
    texts = draw(
        st.lists(
            st.text(alphabet=st.sampled_from("ab \n\né"), min_size=1, max_size=3000).filter(lambda t: t.strip()),
            min_size=1,
            max_size=8,
        )
    )
    sections, offset = [], 0
    for i, body in enumerate(texts):
        end = offset + len(body.encode("utf-8"))
        sections.append(Section(i, f"H{i}", body, estimate_tokens(f"H{i}" + body), (offset, end)))
        offset = end
    return sections
