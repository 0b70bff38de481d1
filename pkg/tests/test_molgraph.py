import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motifwalk.molgraph import (
    FP_BITS,
    Atom,
    MolecularGraph,
    SmilesSyntaxError,
    UnsupportedSmilesError,
    ValenceError,
    canonical_key,
    canonical_smiles,
    components,
    implicit_hydrogens,
    induced_subgraph,
    is_connected,
    kekule_assignment,
    morgan_fingerprint,
    parse_smiles,
    ring_atoms,
    ring_bonds,
    tanimoto,
    validate_valence,
    write_smiles,
)
from oracles import brute_isomorphic, random_molecule

SMILES = [
    "C",
    "CCO",
    "CC(=O)O",
    "CC#N",
    "c1ccccc1",
    "c1ccsc1",
    "c1cc[nH]c1",
    "c1ccncc1",
    "c1ccc2ccccc2c1",
    "Clc1ccccc1",
    "BrCC",
    "C1CC1C(=O)N",
    "c1ccc(-c2cccs2)cc1",
    "CCCCCCc1ccc(-c2ccc(-c3cccs3)s2)s1",
    "O=C1c2ccccc2C(=O)c2ccccc21",
    "C1CCC2(CC1)CCCC2",
]


@pytest.mark.parametrize("smi", SMILES)
def test_smiles_round_trip(smi):
    g = parse_smiles(smi)
    assert not validate_valence(g)
    back = parse_smiles(write_smiles(g))
    assert canonical_key(back) == canonical_key(g)
    assert brute_isomorphic(back, g) if len(g) <= 7 else True


@pytest.mark.parametrize("smi", SMILES)
def test_canonical_smiles_is_a_fixed_point(smi):
    once = canonical_smiles(parse_smiles(smi))
    assert canonical_smiles(parse_smiles(once)) == once


def test_equivalent_spellings_share_a_key():
    assert canonical_key(parse_smiles("OCC")) == canonical_key(parse_smiles("CCO"))
    assert canonical_key(parse_smiles("c1ccccc1Cl")) == canonical_key(parse_smiles("Clc1ccccc1"))
    assert canonical_key(parse_smiles("CCO")) != canonical_key(parse_smiles("COC"))


@pytest.mark.parametrize(
    "smi, exc, offset",
    [
        ("CC(", SmilesSyntaxError, 3),
        ("C1CC", SmilesSyntaxError, 1),
        ("C%", SmilesSyntaxError, 1),
        ("[Fe]", UnsupportedSmilesError, 1),
        ("C.C", UnsupportedSmilesError, 1),
    ],
)
def test_smiles_errors_carry_offsets(smi, exc, offset):
    with pytest.raises(exc) as info:
        parse_smiles(smi)
    assert info.value.offset == offset


def test_valence_errors():
    with pytest.raises(ValenceError) as info:
        parse_smiles("C(C)(C)(C)(C)C")
    assert info.value.violations[0].atom == 0
    with pytest.raises(ValenceError):
        parse_smiles("c1cccc1")  # odd aromatic ring cannot be kekulized


def test_validate_valence_on_graphs():
    ok = MolecularGraph([Atom("C"), Atom("O")], [(0, 1, 2)])
    assert validate_valence(ok) == []
    bad = MolecularGraph([Atom("O"), Atom("C"), Atom("C"), Atom("C")], [(0, 1, 1), (0, 2, 1), (0, 3, 1)])
    v = validate_valence(bad)
    assert [x.atom for x in v] == [0]
    assert validate_valence(bad, atoms=[1, 2]) == []


def test_kekule_assignment_of_benzene():
    g = parse_smiles("c1ccccc1")
    matching, failed = kekule_assignment(g)
    assert not failed
    assert len(matching) == 6
    assert implicit_hydrogens(g) == [1] * 6


def test_ring_detection():
    g = parse_smiles("c1ccc(-c2cccs2)cc1")
    rb = ring_bonds(g)
    assert len(rb) == 11
    link = [b[:2] for b in g.bonds if b[:2] not in rb]
    assert len(link) == 1
    assert ring_atoms(g) == set(range(len(g)))
    chain = parse_smiles("CCCC")
    assert ring_bonds(chain) == set()


def test_subgraphs_and_components():
    g = parse_smiles("CCOCC")
    sub = induced_subgraph(g, [0, 1, 3, 4])
    assert sub.origin == (0, 1, 3, 4)
    assert len(sub.bonds) == 2
    assert len(components(sub)) == 2
    assert not is_connected(sub)
    assert is_connected(g)
    assert not is_connected(MolecularGraph([]))


def test_json_round_trip():
    g = parse_smiles("c1ccc(C(=O)O)cc1")
    assert MolecularGraph.from_json(g.to_json()) == g


def test_fingerprints():
    a = morgan_fingerprint(parse_smiles("c1ccsc1"))
    b = morgan_fingerprint(parse_smiles("c1ccccc1"))
    assert a.shape == (FP_BITS,) and a.dtype == bool
    assert tanimoto(a, a) == 1.0
    assert tanimoto(a, b) == tanimoto(b, a) < 1.0
    # independent of input atom order
    g = parse_smiles("CCOc1ccccc1")
    perm = np.random.default_rng(0).permutation(len(g))
    assert np.array_equal(morgan_fingerprint(g), morgan_fingerprint(g.relabel(list(perm))))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_canonical_form_is_relabeling_invariant(seed):
    rng = np.random.default_rng(seed)
    g = random_molecule(rng)
    perm = [int(x) for x in rng.permutation(len(g))]
    h = g.relabel(perm)
    assert canonical_key(g) == canonical_key(h)
    assert canonical_smiles(g) == canonical_smiles(h)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_random_molecules_round_trip_through_smiles(seed):
    g = random_molecule(np.random.default_rng(seed))
    back = parse_smiles(write_smiles(g))
    assert canonical_key(back) == canonical_key(g)
