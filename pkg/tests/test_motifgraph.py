import json

import pytest

from motifwalk.fragment import annotation_from_record, fragment_annotation
from motifwalk.motifgraph import (
    MotifGraph,
    MotifGraphError,
    augment,
    build_motif_graph,
    dedupe_motifs,
    verify_edge,
)
from oracles import exhaustive_edges


def _frags(smiles_list):
    anns = [
        annotation_from_record({"molecule_id": str(i), "smiles": s, "rule": "hopv"})
        for i, s in enumerate(smiles_list)
    ]
    return [(a.molecule, fragment_annotation(a)) for a in anns]


def test_dedupe_merges_repeated_fragments():
    motifs, assign = dedupe_motifs(_frags(["c1ccc(-c2ccccc2)cc1"]))
    assert len(motifs) == 1
    assert [fm.motif for fm in assign[0]] == [0, 0]
    assert motifs[0].id == "G1"
    motifs2, assign2 = dedupe_motifs(_frags(["c1ccc(-c2ccccc2)cc1", "c1ccc(-c2cccs2)cc1"]))
    # phenyl's red atom is an aromatic carbon in both molecules; only thienyl is new
    assert [m.id for m in motifs2] == ["G1", "G2"]


def test_dedupe_against_an_existing_vocabulary():
    motifs, _ = dedupe_motifs(_frags(["c1ccc(-c2cccs2)cc1"]))
    again, assign = dedupe_motifs(_frags(["c1ccc(-c2cccs2)cc1"]), motifs)
    assert len(again) == len(motifs)
    assert sorted(fm.motif for fm in assign[0]) == [0, 1]


def test_every_edge_reverifies(toy, synthetic):
    for graph, _ in (toy, synthetic):
        for e in graph.edges:
            assert verify_edge(graph.motifs[e.u], graph.motifs[e.v], e)


def test_builder_matches_exhaustive_enumeration(toy):
    graph, _ = toy
    built = {e.key() for e in graph.edges}
    expected = set()
    for ui, u in enumerate(graph.motifs):
        for vi, v in enumerate(graph.motifs):
            expected |= exhaustive_edges(u, v, ui, vi)
    assert built == expected


def test_parallel_build_is_identical(toy):
    graph, _ = toy
    serial = build_motif_graph(graph.motifs, jobs=1)
    parallel = build_motif_graph(graph.motifs, jobs=2)
    assert [e.key() for e in serial.edges] == [e.key() for e in parallel.edges]


def test_json_round_trip(toy, tmp_path):
    graph, _ = toy
    path = tmp_path / "g.json"
    graph.save(path)
    back = MotifGraph.load(path)
    assert back.nodes == graph.nodes
    assert back.node_edges == graph.node_edges
    assert [e.key() for e in back.edges] == [e.key() for e in graph.edges]
    assert json.dumps(back.to_json(), sort_keys=True) == json.dumps(graph.to_json(), sort_keys=True)


def test_load_rejects_dangling_edges(toy):
    graph, _ = toy
    data = graph.to_json()
    data["edges"][0]["v"] = "G999"
    with pytest.raises(MotifGraphError):
        MotifGraph.from_json(data)


def test_duplicates_share_base_edges(toy):
    graph, corpus = toy
    assert graph.base_size() == (5, 18)
    assert graph.size() == (7, 51)
    dups = graph.duplicates()
    assert dups
    for node in graph.nodes:
        b = graph.node_base[graph.node_index[node]]
        base_out = {k for s, _, k in graph.node_edges if graph.node_base[s] == b}
        mine = {k for s, _, k in graph.node_edges if s == graph.node_index[node]}
        assert mine == base_out


def test_augment_uses_max_count_per_walk(toy):
    graph, _ = toy
    base = graph.base()
    aug = augment(base, [[0, 0, 0], [1], [0, 1, 1]])
    assert [n for n in aug.nodes if n.startswith("G1")] == ["G1", "G1:1", "G1:2"]
    assert [n for n in aug.nodes if n.startswith("G2")] == ["G2", "G2:1"]


def test_dot_export(toy):
    graph, _ = toy
    dot = graph.to_dot()
    assert dot.startswith("digraph")
    assert dot.count("->") == graph.size()[1]
