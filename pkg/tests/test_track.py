from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asmell.detect import SmellInstance, SmellType
from asmell.errors import VersionMismatchError
from asmell.graph import Level
from asmell.track import build_temporal_instances, jaccard, match_versions


def cd(v, members, level=Level.FILE):
    return SmellInstance(SmellType.CD, level, v, {"member": frozenset(members)}, {"size": len(members)})


def test_exact_match():
    (m,) = match_versions([cd(0, "AB")], [cd(1, "AB")])
    assert m.similarity == 1.0


def test_partial_match():
    (m,) = match_versions([cd(0, "AB")], [cd(1, "ABC")])
    assert m.similarity == pytest.approx(2 / 3)


def test_disjoint_no_match():
    assert match_versions([cd(0, "AB")], [cd(1, "CD")]) == []


def test_exact_mode():
    assert match_versions([cd(0, "AB")], [cd(1, "ABC")], exact=True) == []


def test_kind_must_agree():
    assert match_versions([cd(0, "AB")], [cd(1, "AB", Level.COMPONENT)]) == []


def test_version_mismatch():
    with pytest.raises(VersionMismatchError):
        match_versions([cd(0, "AB")], [cd(2, "AB")])
    with pytest.raises(VersionMismatchError):
        match_versions([cd(0, "AB"), cd(1, "AB")], [cd(1, "AB")])


def test_exact_matches_win():
    prev = [cd(0, "AB"), cd(0, "ABC")]
    nxt = [cd(1, "AB")]
    (m,) = match_versions(prev, nxt)
    assert m.prev_id == prev[0].id


def test_death_recorded():
    per = [[cd(0, "AB")], [cd(1, "AB")], [cd(2, "AB")], []]
    (t,) = build_temporal_instances(per)
    assert (t.age, t.death_version, t.birth_version, t.censored) == (3, 3, 0, False)


def test_censored_final_version():
    per = [[], [], [cd(2, "AB")]]
    (t,) = build_temporal_instances(per)
    assert t.age == 1 and t.censored


def test_no_gap_bridging():
    per = [[cd(0, "AB")], [], [cd(2, "AB")]]
    a, b = build_temporal_instances(per)
    assert (a.age, a.death_version) == (1, 1)
    assert (b.age, b.birth_version, b.censored) == (1, 2, True)


def test_chain_contents():
    per = [[cd(0, "AB")], [cd(1, "ABC")], [cd(2, "ABCD")]]
    (t,) = build_temporal_instances(per)
    assert [v for v, _ in t.chain] == [0, 1, 2]
    assert t.series("size") == [2.0, 3.0, 4.0]
    assert t.tid == "t" + per[0][0].id and t.kind == "CD/File"


def test_misplaced_instance():
    with pytest.raises(VersionMismatchError):
        build_temporal_instances([[cd(1, "AB")]])


artefact_sets = st.frozensets(st.sampled_from("ABCDEFG"), min_size=1, max_size=4)


@st.composite
def histories(draw):
    n = draw(st.integers(1, 5))
    per = []
    for v in range(n):
        sets = draw(st.lists(artefact_sets, max_size=4, unique=True))
        levels = draw(st.lists(st.sampled_from([Level.FILE, Level.COMPONENT]), min_size=len(sets), max_size=len(sets)))
        per.append([cd(v, s, lv) for s, lv in zip(sets, levels)])
    return per


@settings(max_examples=150, deadline=None)
@given(histories(), st.sampled_from([0.3, 0.5, 1.0]))
def test_tracking_invariants(per, threshold):
    chains = build_temporal_instances(per, threshold)
    ids = [i.id for c in chains for i in c.instances]
    assert len(ids) == len(set(ids))
    assert sorted(ids) == sorted(i.id for v in per for i in v)
    assert sum(c.age for c in chains) == sum(len(v) for v in per)
    for c in chains:
        versions = [i.version_index for i in c.instances]
        assert versions == list(range(versions[0], versions[0] + len(versions)))
        assert all(i.type is c.type and i.level is c.level for i in c.instances)
        for a, b in zip(c.instances, c.instances[1:]):
            assert jaccard(a.artefacts, b.artefacts) >= threshold
        if c.censored:
            assert c.last_version == len(per) - 1
        else:
            assert c.death_version == c.last_version + 1


@settings(max_examples=100, deadline=None)
@given(histories())
def test_matching_independent_of_input_order(per):
    """The outcome depends on artefact sets and the documented tie-break only."""
    def summary(chains):
        return sorted((c.birth_version, c.age, c.death_version, tuple(sorted(i.id for i in c.instances))) for c in chains)

    forward = build_temporal_instances(per)
    backward = build_temporal_instances([list(reversed(v)) for v in per])
    assert summary(forward) == summary(backward)
