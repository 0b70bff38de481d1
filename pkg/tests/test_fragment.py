import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motifwalk.fragment import (
    AnnotationError,
    annotation_from_record,
    break_bonds,
    fragment_annotation,
    heuristic_fragment,
    infer_context,
    load_annotations,
)
from motifwalk.molgraph import is_connected, parse_smiles
from conftest import data_path
from oracles import brute_heuristic_cuts, random_molecule


def test_heuristic_cuts_on_known_molecules():
    m = parse_smiles("c1ccc(-c2cccs2)cc1")
    assert len(heuristic_fragment(m)) == 1
    # methyl has one heavy neighbour: kept on the ring
    assert heuristic_fragment(parse_smiles("Cc1ccccc1")) == []
    # ethyl carbon bonded to the ring has two heavy neighbours: cut
    assert len(heuristic_fragment(parse_smiles("CCc1ccccc1"))) == 1
    # double bond to the ring is never cut
    assert heuristic_fragment(parse_smiles("C=C1CCCCC1")) == []
    assert heuristic_fragment(parse_smiles("CCCC")) == []


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_heuristic_matches_brute_force(seed):
    m = random_molecule(np.random.default_rng(seed))
    assert sorted(heuristic_fragment(m)) == brute_heuristic_cuts(m)


def test_break_bonds_orders_fragments():
    m = parse_smiles("c1ccccc1Oc1ccccc1")
    frag = break_bonds(m, heuristic_fragment(m))
    assert frag.fragments == [(0, 1, 2, 3, 4, 5), (6,), (7, 8, 9, 10, 11, 12)]
    assert frag.adjacent_pairs() == [(0, 1), (1, 0), (1, 2), (2, 1)]


def test_single_atom_fragment_sees_neighbour_ring():
    m = parse_smiles("c1ccccc1Oc1ccccc1")
    frag = infer_context(break_bonds(m, heuristic_fragment(m)), m, "hopv")
    assert frag.contexts[(1, 0)] == frozenset(range(6))
    assert frag.contexts[(1, 2)] == frozenset(range(7, 13))
    # multi-atom fragments see only the bonded atom
    assert frag.contexts[(0, 1)] == frozenset({6})
    for (j1, j2), ctx in frag.contexts.items():
        assert ctx <= set(frag.fragments[j2])
        assert is_connected(m, set(frag.fragments[j1]) | ctx)


def test_ptc_rule_equals_hopv_rule():
    m = parse_smiles("ClCCc1ccc(Oc2ccccc2)cc1")
    f = break_bonds(m, heuristic_fragment(m))
    assert infer_context(f, m, "ptc").contexts == infer_context(f, m, "hopv").contexts


def test_table_fixtures_fragment_counts():
    anns = load_annotations(data_path("table_annotations.json"))
    assert [a.molecule_id for a in anns] == ["a", "b", "c", "d"]
    assert [len(fragment_annotation(a).fragments) for a in anns] == [6, 5, 6, 4]


def test_annotation_errors():
    with pytest.raises(AnnotationError):
        annotation_from_record({"molecule_id": "x"})
    with pytest.raises(AnnotationError):
        annotation_from_record({"molecule_id": "x", "smiles": "CCO", "rule": "bogus"})
    with pytest.raises(AnnotationError):
        annotation_from_record({"molecule_id": "x", "smiles": "CCO", "rule": "annotated"})
    with pytest.raises(AnnotationError):
        annotation_from_record(
            {"molecule_id": "x", "smiles": "CCO", "bonds_to_break": [[1, 9]], "rule": "annotated"}
        )
    # two fragments but no red groups under the annotated rule
    ann = annotation_from_record(
        {"molecule_id": "x", "smiles": "CCOCC", "bonds_to_break": [[2, 3]], "rule": "annotated"}
    )
    with pytest.raises(AnnotationError):
        fragment_annotation(ann)


def test_red_groups_must_cover_attachment_atoms():
    base = {"molecule_id": "x", "smiles": "CCOCC", "bonds_to_break": [[2, 3]], "rule": "annotated"}
    good = dict(base, black_groups=[[1, 2], [3, 4, 5]], red_groups=[[3], [2]])
    frag = fragment_annotation(annotation_from_record(good))
    assert frag.contexts == {(0, 1): frozenset({2}), (1, 0): frozenset({1})}
    bad = dict(base, black_groups=[[1, 2], [3, 4, 5]], red_groups=[[4], [2]])
    with pytest.raises(AnnotationError):
        fragment_annotation(annotation_from_record(bad))
    wrong_black = dict(base, black_groups=[[1], [2, 3, 4, 5]], red_groups=[[3], [2]])
    with pytest.raises(AnnotationError):
        fragment_annotation(annotation_from_record(wrong_black))
