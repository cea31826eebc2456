from __future__ import annotations

import pytest

from pxp.intelligibility import classify_two_way
from pxp.mmsv import (
    EDGE_LABELS,
    UnmappedPath,
    decompose,
    enumerate_paths,
    language_words,
    map_to_pxp,
    matches_mmsv_minus_language,
    mmsv_graph,
    path_length,
)
from pxp.model import Tag

from support import alternating, replay_pxp, transcript_of

KNOWN_PATHS = [(0, 2, 8), (0, 1, 2, 8), (0, 2, 3, 8), (0, 1, 2, 3, 8),
               (0, 1, 1, 2, 8), (0, 2, 3, 4, 8), (0, 2, 5, 6, 8)]


def test_seven_paths_up_to_five_nodes():
    got = enumerate_paths(mmsv_graph(), 5, measure="nodes")
    assert sorted(got) == sorted(KNOWN_PATHS)


def test_shortest_path_only_at_two_edges():
    assert enumerate_paths(mmsv_graph(), 2) == [(0, 2, 8)]
    with pytest.raises(ValueError):
        enumerate_paths(mmsv_graph(), 1)


def test_minus_graph_drops_the_repeated_question():
    assert (1, 1) not in mmsv_graph(full=False).edges
    assert mmsv_graph().full and not mmsv_graph(False).full
    assert (0, 1, 1, 2, 8) not in enumerate_paths(mmsv_graph(False), 5, measure="nodes")
    assert EDGE_LABELS[(1, 1)] == "E:return-question"


def _accepts(path) -> bool:
    """Hand-written acceptor for 0(1|)2(12|312|342|562|5672)*(8|38|348|568|5678)."""
    s = "".join(map(str, path))
    if s.startswith("012"):
        i = 3
    elif s.startswith("02"):
        i = 2
    else:
        return False
    tails = ("8", "38", "348", "568", "5678")
    blocks = ("12", "312", "342", "562", "5672")

    def rest(j: int) -> bool:
        if s[j:] in tails:
            return True
        return any(s.startswith(b, j) and rest(j + len(b)) for b in blocks)

    return rest(i)


def test_regex_examples():
    assert matches_mmsv_minus_language((0, 2, 8))
    assert not matches_mmsv_minus_language((0, 1, 1, 2, 8))
    assert matches_mmsv_minus_language((0, 2, 5, 6, 7, 2, 8))
    assert not matches_mmsv_minus_language((0, 2, 9, 8))


def test_enumeration_agrees_with_acceptor_up_to_seven():
    paths = enumerate_paths(mmsv_graph(False), 7)
    assert paths
    for p in paths:
        assert matches_mmsv_minus_language(p) and _accepts(p)


def test_walks_are_exactly_the_language_up_to_twelve():
    walks = set(enumerate_paths(mmsv_graph(False), 12, simple=False))
    assert walks == language_words(13)
    assert all(_accepts(w) for w in walks)
    # and nothing in the language escapes the graph
    for w in language_words(13):
        assert all((a, b) in mmsv_graph(False).edges for a, b in zip(w, w[1:]))


def test_path_length_measures():
    assert path_length((0, 2, 8)) == 2
    assert path_length((0, 2, 8), "nodes") == 3
    with pytest.raises(ValueError):
        path_length((0, 8), "hops")


def test_decompose_prefers_segments_that_leave_a_valid_rest():
    assert decompose((0, 2, 3, 4, 8)) == [(0, 2), (2, 3), (3, 4), (4, 8)]
    assert decompose((0, 2, 3, 4, 2, 8)) == [(0, 2), (2, 3), (3, 4, 2), (2, 8)]
    assert decompose((0, 2, 5, 6, 7, 2, 8)) == [(0, 2), (2, 5), (5, 6, 7, 2), (2, 8)]
    with pytest.raises(UnmappedPath):
        decompose((0, 2, 2, 8))


def _labels(mapping):
    return {(q.label(), q.rows) for q in mapping.sequences}


def test_map_shortest_path():
    m = map_to_pxp((0, 2, 8))
    assert ("Init_E, Term_E", ("0", "40", "39")) in _labels(m)
    assert all(len(q) <= 2 for q in m.sequences)


def test_map_question_path_includes_ratify_then_term():
    m = map_to_pxp((0, 1, 2, 3, 8))
    assert ("Init_Q, Refute_E, Ratify_Q, Term_E", ("0", "36", "13", "31", "39")) in _labels(m)
    tags = {q.tags for q in m.sequences}
    assert (Tag.INIT, Tag.REFUTE, Tag.REVISE, Tag.TERM) in tags
    assert (Tag.INIT, Tag.REFUTE, Tag.REFUTE, Tag.TERM) in tags


def test_map_rejects_non_language_paths():
    with pytest.raises(UnmappedPath):
        map_to_pxp((0, 1, 1, 2, 8))


def test_full_graph_repeated_question_collapses():
    m = map_to_pxp((0, 1, 1, 2, 8), full=True)
    assert m.collapsed
    assert all(len(q) == 3 for q in m.sequences)
    assert {q.tags for q in m.sequences} == {(Tag.INIT, Tag.REFUTE, Tag.TERM)}


def test_some_mapped_sequence_is_not_intelligible():
    found = False
    for p in enumerate_paths(mmsv_graph(False), 5, measure="nodes"):
        for q in map_to_pxp(p).sequences:
            text = " ".join(f"{t.value}_{s}" for t, s in q.messages)
            if not classify_two_way(transcript_of(text)).two_way:
                found = True
    assert found


def test_every_path_up_to_nine_edges_replays_through_the_engine():
    paths = enumerate_paths(mmsv_graph(False), 9, simple=False)
    assert len(paths) > 20
    for p in paths:
        l = len(p) - 1
        m = map_to_pxp(p, l)
        assert m.sequences
        for q in m.sequences:
            assert len(q) <= l
            t = replay_pxp(q, l)
            assert [(s.tag, s.sender.name) for s in t.steps] == list(q.messages), p
            assert tuple(t.rows) + (t.closing_row,) == q.rows, p
            assert t.status.value == "terminated"


def test_mapping_json_shape():
    js = map_to_pxp((0, 2, 3, 8)).to_json()
    assert js["mmsv_path"] == [0, 2, 3, 8] and js["length"] == 3
    assert js["sequences"][0]["messages"][0] == "Init_E"
    assert alternating("EQ", [Tag.INIT, Tag.RATIFY]) == "Init_E Ratify_Q"
