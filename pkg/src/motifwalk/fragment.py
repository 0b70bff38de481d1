"""Molecule fragmentation and attachment contexts.

A fragmentation splits a molecule into disjoint atom sets by deleting bonds.
Each pair of adjacent fragments (j1, j2) gets a context: the atoms of j2 that
j1 needs to see in order to attach.  Contexts come either from an expert
annotation or from a rule.
"""
import json
from dataclasses import dataclass, field

import networkx as nx

from .molgraph import (
    BondOrder,
    MolecularGraph,
    MolGraphError,
    components,
    induced_subgraph,
    is_connected,
    parse_smiles,
    ring_atoms,
    ring_bonds,
)

RULES = ("hopv", "ptc", "annotated")


class AnnotationError(MolGraphError):
    pass


@dataclass
class Fragmentation:
    fragments: list  # sorted atom tuples, one per fragment
    cut_bonds: list  # (i, j) pairs in parent numbering
    contexts: dict = field(default_factory=dict)  # (j1, j2) -> frozenset of atoms of j2

    def fragment_of(self):
        owner = {}
        for k, atoms in enumerate(self.fragments):
            for a in atoms:
                owner[a] = k
        return owner

    def adjacent_pairs(self):
        """Ordered (j1, j2) pairs of fragments joined by at least one cut bond."""
        owner = self.fragment_of()
        pairs = set()
        for i, j in self.cut_bonds:
            a, b = owner[i], owner[j]
            if a != b:
                pairs.add((a, b))
                pairs.add((b, a))
        return sorted(pairs)

    def graphs(self, parent):
        return [induced_subgraph(parent, atoms) for atoms in self.fragments]


@dataclass
class Annotation:
    molecule_id: str
    molecule: MolecularGraph
    bonds_to_break: list  # 0-based pairs
    black_groups: list  # 0-based atom lists
    red_groups: list | None = None
    rule: str = "annotated"


def break_bonds(m, bonds):
    """Delete ``bonds`` and return the connected components as fragments."""
    cut = []
    seen = set()
    for i, j in bonds:
        i, j = int(i), int(j)
        if not (0 <= i < len(m) and 0 <= j < len(m)) or not m.bond_order(i, j):
            raise AnnotationError(f"bond ({i}, {j}) does not exist")
        key = (min(i, j), max(i, j))
        if key in seen:
            continue
        seen.add(key)
        cut.append(key)
    kept = [(i, j, o) for i, j, o in m.bonds if (i, j) not in seen]
    g = MolecularGraph(m.atoms, kept)
    comps = components(g)
    comps.sort(key=lambda c: c[0])
    return Fragmentation([tuple(c) for c in comps], cut)


def heuristic_fragment(m):
    """Bonds to cut by the two structural heuristics.

    An acyclic single bond is cut when it joins two ring atoms, or a ring
    atom to a non-ring atom that has more than one heavy neighbour.
    """
    rb = ring_bonds(m)
    ra = ring_atoms(m)
    out = []
    for i, j, o in m.bonds:
        if o != BondOrder.SINGLE or (i, j) in rb:
            continue
        if i in ra and j in ra:
            out.append((i, j))
        elif i in ra and m.degree(j) > 1:
            out.append((i, j))
        elif j in ra and m.degree(i) > 1:
            out.append((i, j))
    return out


def smallest_ring(m, atom, within):
    """Smallest cycle-basis ring through ``atom`` using only atoms in ``within``."""
    sub = nx.Graph()
    within = set(within)
    sub.add_nodes_from(within)
    sub.add_edges_from((i, j) for i, j, _ in m.bonds if i in within and j in within)
    best = None
    for cyc in nx.minimum_cycle_basis(sub):
        if atom not in cyc:
            continue
        key = (len(cyc), sorted(cyc))
        if best is None or key < best:
            best = key
    return None if best is None else frozenset(best[1])


def infer_context(frag, parent, rule="hopv"):
    """Fill ``frag.contexts`` for every adjacent fragment pair.

    Single-atom fragments see the smallest ring of the neighbour that holds
    the attachment atom, when there is one; everything else sees only the
    neighbour atoms bonded to it.
    """
    if rule not in ("hopv", "ptc"):
        raise ValueError(f"no automatic context rule for {rule!r}")
    contexts = {}
    for j1, j2 in frag.adjacent_pairs():
        a1 = set(frag.fragments[j1])
        a2 = frag.fragments[j2]
        touching = sorted(b for b in a2 if any(n in a1 for n in parent.neighbors(b)))
        ctx = frozenset(touching)
        if len(a1) == 1 and len(touching) == 1:
            ring = smallest_ring(parent, touching[0], a2)
            if ring is not None:
                ctx = ring
        if not ctx:
            raise AnnotationError(f"empty context for fragments {j1}->{j2}")
        if not is_connected(parent, a1 | ctx):
            raise AnnotationError(f"fragment {j1} plus its context toward {j2} is disconnected")
        contexts[(j1, j2)] = ctx
    return Fragmentation(frag.fragments, frag.cut_bonds, contexts)


def contexts_from_red_groups(frag, parent, red_groups):
    """Split positional red groups into per-neighbour contexts and validate them."""
    if len(red_groups) != len(frag.fragments):
        raise AnnotationError(
            f"{len(red_groups)} red groups for {len(frag.fragments)} black groups"
        )
    owner = frag.fragment_of()
    adj = frag.adjacent_pairs()
    neighbours = {j: [b for a, b in adj if a == j] for j in range(len(frag.fragments))}
    contexts = {}
    for j1, red in enumerate(red_groups):
        red = set(red)
        for a in red:
            j2 = owner.get(a)
            if j2 is None or j2 == j1 or j2 not in neighbours[j1]:
                raise AnnotationError(
                    f"red atom {a + 1} of group {j1 + 1} is not in a neighbouring fragment"
                )
        a1 = set(frag.fragments[j1])
        for j2 in neighbours[j1]:
            ctx = frozenset(a for a in red if owner[a] == j2)
            touching = {b for b in frag.fragments[j2] if any(n in a1 for n in parent.neighbors(b))}
            if not touching <= ctx:
                missing = sorted(x + 1 for x in touching - ctx)
                raise AnnotationError(
                    f"red group {j1 + 1} misses attachment atoms {missing} of group {j2 + 1}"
                )
            if not is_connected(parent, a1 | ctx):
                raise AnnotationError(f"group {j1 + 1} plus its red atoms is disconnected")
            contexts[(j1, j2)] = ctx
    return contexts


def fragment_annotation(ann):
    """Fragmentation (with contexts) for one annotation record."""
    m = ann.molecule
    frag = break_bonds(m, ann.bonds_to_break)
    if ann.black_groups is not None:
        groups = [tuple(sorted(g)) for g in ann.black_groups]
        flat = [a for g in groups for a in g]
        if len(flat) != len(set(flat)) or set(flat) != set(range(len(m))):
            raise AnnotationError(f"{ann.molecule_id}: black groups must partition the atoms")
        if sorted(groups) != sorted(frag.fragments):
            raise AnnotationError(
                f"{ann.molecule_id}: black groups do not match the fragments left by the cuts"
            )
        # keep the annotation's group order
        frag = Fragmentation(groups, frag.cut_bonds)
    if ann.red_groups is not None:
        contexts = contexts_from_red_groups(frag, m, ann.red_groups)
        return Fragmentation(frag.fragments, frag.cut_bonds, contexts)
    if ann.rule == "annotated":
        if len(frag.fragments) > 1:
            raise AnnotationError(f"{ann.molecule_id}: rule 'annotated' needs red groups")
        return frag
    return infer_context(frag, m, ann.rule)


def _to_zero(pairs_or_groups):
    return [[int(a) - 1 for a in g] for g in pairs_or_groups]


def annotation_from_record(rec):
    if "graph" in rec:
        m = MolecularGraph.from_json(rec["graph"])
    elif "smiles" in rec:
        m = parse_smiles(rec["smiles"])
    else:
        raise AnnotationError(f"{rec.get('molecule_id')}: needs 'smiles' or 'graph'")
    rule = rec.get("rule", "annotated")
    if rule not in RULES:
        raise AnnotationError(f"unknown rule {rule!r}")
    bonds = rec.get("bonds_to_break")
    black = rec.get("black_groups")
    if bonds is None:
        if rule == "annotated":
            raise AnnotationError(f"{rec.get('molecule_id')}: missing bonds_to_break")
        bonds = [(i, j) for i, j in heuristic_fragment(m)]
    else:
        bonds = _to_zero(bonds)
    for i, j in bonds:
        if not (0 <= i < len(m) and 0 <= j < len(m)):
            raise AnnotationError(f"{rec.get('molecule_id')}: bond ({i + 1}, {j + 1}) out of range")
    red = rec.get("red_groups")
    return Annotation(
        str(rec["molecule_id"]),
        m,
        bonds,
        None if black is None else _to_zero(black),
        None if red is None else _to_zero(red),
        rule,
    )


def load_annotations(path):
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise AnnotationError(f"{path}: expected a non-empty JSON list of annotations")
    return [annotation_from_record(r) for r in data]
