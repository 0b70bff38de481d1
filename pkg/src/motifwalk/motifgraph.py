"""Motif vocabulary and the directed multigraph of legal attachments.

A motif is a fragment graph together with indexed red groups (context atom
sets); its black atoms are everything outside the red groups.  An edge
u -> v for red groups (l1, l2) is certified by black atom sets b1 of u and b2
of v and one isomorphism ``phi`` of g_u(u_r + b1) onto g_v(b2 + v_r) that
sends u's red group onto b2 and b1 onto v's red group, where g_u(u_r + b1) is
connected.  The certificate also fixes which bonds are formed on
attachment.
"""
import json
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

from .isomorph import MATCH_CAP, iter_matches, substruct_matches
from .molgraph import MolecularGraph, MolGraphError, canonical_key, induced_subgraph, is_connected


class MotifGraphError(MolGraphError):
    pass


@dataclass(frozen=True)
class Motif:
    id: str
    graph: MolecularGraph
    red_groups: tuple  # tuple of frozensets of local atom indices

    @property
    def red_atoms(self):
        out = set()
        for r in self.red_groups:
            out |= r
        return frozenset(out)

    @property
    def black_atoms(self):
        red = self.red_atoms
        return tuple(a for a in range(len(self.graph)) if a not in red)

    def black_graph(self):
        return induced_subgraph(self.graph, self.black_atoms)

    def to_json(self):
        return {
            "id": self.id,
            "graph": self.graph.to_json(),
            "red_groups": [sorted(r) for r in self.red_groups],
        }

    @classmethod
    def from_json(cls, d):
        g = MolecularGraph.from_json(d["graph"])
        reds = tuple(frozenset(r) for r in d["red_groups"])
        m = cls(d["id"], g, reds)
        m.check()
        return m

    def check(self):
        for r in self.red_groups:
            if not r or any(not 0 <= a < len(self.graph) for a in r):
                raise MotifGraphError(f"{self.id}: bad red group {sorted(r)}")
        if not self.black_atoms:
            raise MotifGraphError(f"{self.id}: no black atoms")
        if not is_connected(self.graph):
            raise MotifGraphError(f"{self.id}: motif graph is disconnected")


@dataclass(frozen=True)
class MotifEdge:
    u: int  # base motif indices
    v: int
    l1: int
    l2: int
    b1: tuple  # sorted black atoms of u standing in for v's red group
    b2: tuple  # sorted black atoms of v standing in for u's red group
    phi: tuple  # ((atom of u_r + b1, atom of b2 + v_r), ...) sorted
    attach: tuple  # ((atom of u_B, atom of v_B, order), ...) sorted

    def key(self):
        return (self.u, self.v, self.l1, self.l2, self.b1, self.b2, self.attach)

    def to_json(self, motifs):
        return {
            "u": motifs[self.u].id,
            "v": motifs[self.v].id,
            "l1": self.l1,
            "l2": self.l2,
            "b1": list(self.b1),
            "b2": list(self.b2),
            "map": [list(p) for p in self.phi],
            "attach": [list(t) for t in self.attach],
        }


def motif_key(graph, red_groups):
    """Cheap invariant shared by all isomorphic (graph, red family) pairs."""
    sizes = tuple(sorted(len(r) for r in red_groups))
    return canonical_key(graph), sizes


def _red_tags(graph, red_groups):
    counts = [0] * len(graph)
    for r in red_groups:
        for a in r:
            counts[a] += 1
    return counts


def match_attributed(g1, reds1, g2, reds2):
    """Atom map g1 -> g2 carrying the red family of g1 onto that of g2.

    Returns ``(atom_map, red_perm)`` with ``red_perm[k]`` the index in
    ``reds2`` of the image of ``reds1[k]``, or None.
    """
    if len(g1) != len(g2) or len(reds1) != len(reds2):
        return None
    target = {}
    for k, r in enumerate(reds2):
        target.setdefault(r, []).append(k)
    t1 = _red_tags(g1, reds1)
    t2 = _red_tags(g2, reds2)
    for m in iter_matches(g2, g1, t1, t2):
        pool = {r: list(ks) for r, ks in target.items()}
        perm = []
        for r in reds1:
            img = frozenset(m[a] for a in r)
            if not pool.get(img):
                break
            perm.append(pool[img].pop(0))
        else:
            return m, tuple(perm)
    return None


@dataclass
class FragmentMotif:
    """Where one fragment of a molecule landed in the vocabulary."""

    motif: int
    atom_map: dict  # parent atom -> motif local atom (black + context atoms)
    context_index: dict  # neighbour fragment j2 -> red group index in the motif


def fragment_motif_graph(parent, frag, j1):
    """Motif candidate for fragment ``j1``: its atoms plus its contexts."""
    neighbours = sorted(j2 for a, j2 in frag.contexts if a == j1)
    atoms = set(frag.fragments[j1])
    for j2 in neighbours:
        atoms |= frag.contexts[(j1, j2)]
    g = induced_subgraph(parent, atoms)
    local = {a: k for k, a in enumerate(g.origin)}
    reds = tuple(frozenset(local[a] for a in frag.contexts[(j1, j2)]) for j2 in neighbours)
    return g, reds, local, neighbours


def dedupe_motifs(fragmentations, motifs=None):
    """Assign every fragment to a motif, growing the vocabulary in first-seen order.

    ``fragmentations`` is a list of ``(parent, Fragmentation)`` pairs.
    Returns ``(motifs, assignments)`` where ``assignments[i][j]`` is a
    FragmentMotif for fragment j of molecule i.
    """
    motifs = list(motifs or [])
    buckets = {}
    for k, m in enumerate(motifs):
        buckets.setdefault(motif_key(m.graph, m.red_groups), []).append(k)
    assignments = []
    for parent, frag in fragmentations:
        per_mol = []
        for j1 in range(len(frag.fragments)):
            g, reds, local, neighbours = fragment_motif_graph(parent, frag, j1)
            key = motif_key(g, reds)
            hit = None
            for k in buckets.get(key, []):
                res = match_attributed(g, reds, motifs[k].graph, motifs[k].red_groups)
                if res is not None:
                    hit = (k, res)
                    break
            if hit is None:
                k = len(motifs)
                motif = Motif(f"G{k + 1}", g, reds)
                motifs.append(motif)
                buckets.setdefault(key, []).append(k)
                hit = (k, (tuple(range(len(g))), tuple(range(len(reds)))))
            k, (amap, perm) = hit
            atom_map = {a: amap[local[a]] for a in local}
            ctx_index = {j2: perm[n] for n, j2 in enumerate(neighbours)}
            per_mol.append(FragmentMotif(k, atom_map, ctx_index))
        assignments.append(per_mol)
    return motifs, assignments


# ---------------------------------------------------------------------------
# pairwise matching


def _image_sets(target_sub, pattern, cap):
    """Distinct atom sets (in target_sub's parent numbering) that ``pattern`` embeds onto."""
    ms = substruct_matches(target_sub, pattern, cap=cap)
    seen = set()
    out = []
    for m in ms:
        s = tuple(sorted(target_sub.origin[t] for t in m))
        if s not in seen:
            seen.add(s)
            out.append(s)
    return sorted(out), ms.truncated


def attach_bonds(u, v, ur, vr, phi):
    """Bonds formed between u's black atoms and v's black atoms under ``phi``."""
    inv = {y: x for x, y in phi.items()}
    ub = set(u.black_atoms)
    vb = set(v.black_atoms)
    out = set()
    for c in ur:
        for a, o in u.graph.neighbors(c).items():
            if a in ub:
                out.add((a, phi[c], o))
    for y in vr:
        for x, o in v.graph.neighbors(y).items():
            if x in vb:
                out.add((inv[y], x, o))
    return tuple(sorted(out))


def _certificates(u, v, ur, vr, b1, b2, cap):
    """All split-respecting isomorphisms g_u(ur + b1) -> g_v(b2 + vr)."""
    left = sorted(set(ur) | set(b1))
    right = sorted(set(b2) | set(vr))
    gl = induced_subgraph(u.graph, left)
    gr = induced_subgraph(v.graph, right)
    if len(gl.bonds) != len(gr.bonds):
        return [], False
    ltags = [0 if a in ur else 1 for a in left]
    rtags = [0 if a in b2 else 1 for a in right]
    out = []
    truncated = False
    for m in iter_matches(gr, gl, ltags, rtags):
        if len(out) >= cap:
            truncated = True
            break
        out.append({left[i]: right[t] for i, t in enumerate(m)})
    return out, truncated


def match_motif_pair(u, v, ui=0, vi=0, cap=MATCH_CAP):
    """Edges u -> v (one direction) with their certificates.

    ``ui``/``vi`` are the vocabulary indices stored on the edges.  Returns
    ``(edges, truncated)``.
    """
    edges = {}
    truncated = False
    ublack = u.black_graph()
    vblack = v.black_graph()
    for l1, ur in enumerate(u.red_groups):
        pat_u = induced_subgraph(u.graph, ur)
        b2_sets, t2 = _image_sets(vblack, pat_u, cap)
        for l2, vr in enumerate(v.red_groups):
            pat_v = induced_subgraph(v.graph, vr)
            b1_sets, t1 = _image_sets(ublack, pat_v, cap)
            truncated |= t1 or t2
            for b1 in b1_sets:
                if not is_connected(u.graph, set(ur) | set(b1)):
                    continue
                for b2 in b2_sets:
                    phis, t3 = _certificates(u, v, ur, vr, b1, b2, cap)
                    truncated |= t3
                    for phi in phis:
                        att = attach_bonds(u, v, ur, vr, phi)
                        e = MotifEdge(ui, vi, l1, l2, b1, b2, tuple(sorted(phi.items())), att)
                        edges.setdefault(e.key(), e)
    return [edges[k] for k in sorted(edges)], truncated


def verify_edge(u, v, e):
    """Re-check the four matching criteria for a stored edge."""
    ur = u.red_groups[e.l1]
    vr = v.red_groups[e.l2]
    ub = set(u.black_atoms)
    vb = set(v.black_atoms)
    if not set(e.b1) <= ub or not set(e.b2) <= vb:
        return False
    phi = dict(e.phi)
    left = set(ur) | set(e.b1)
    if set(phi) != left or set(phi.values()) != set(e.b2) | set(vr):
        return False
    if {phi[a] for a in ur} != set(e.b2) or {phi[a] for a in e.b1} != set(vr):
        return False
    if len(set(phi.values())) != len(phi):
        return False
    for a in left:
        if u.graph.atoms[a].label != v.graph.atoms[phi[a]].label:
            return False
    for a, b in combinations(sorted(left), 2):
        if u.graph.bond_order(a, b) != v.graph.bond_order(phi[a], phi[b]):
            return False
    if not is_connected(u.graph, left):
        return False
    return attach_bonds(u, v, ur, vr, phi) == e.attach


def _pair_job(args):
    motifs, ui, vi, cap = args
    return match_motif_pair(motifs[ui], motifs[vi], ui, vi, cap)


def default_jobs():
    env = os.environ.get("MOTIFWALK_JOBS")
    return max(1, int(env)) if env else 1


@dataclass
class MotifGraph:
    motifs: list
    edges: list
    nodes: list = field(default_factory=list)  # augmented node names
    node_base: list = field(default_factory=list)  # node -> base motif index
    node_edges: list = field(default_factory=list)  # (src node, dst node, edge index)
    truncated: bool = False

    def __post_init__(self):
        if not self.nodes:
            self.nodes = [m.id for m in self.motifs]
            self.node_base = list(range(len(self.motifs)))
            self.node_edges = [(e.u, e.v, k) for k, e in enumerate(self.edges)]
        self._index()

    def _index(self):
        self.node_index = {n: k for k, n in enumerate(self.nodes)}
        self.motif_index = {m.id: k for k, m in enumerate(self.motifs)}
        self.out_edges = [[] for _ in self.nodes]
        self.in_edges = [[] for _ in self.nodes]
        for s, d, k in self.node_edges:
            self.out_edges[s].append((d, k))
            self.in_edges[d].append((s, k))
        self.copies = [[] for _ in self.motifs]
        for n, b in enumerate(self.node_base):
            self.copies[b].append(n)

    @property
    def n_nodes(self):
        return len(self.nodes)

    def duplicates(self):
        return {
            self.motifs[b].id: [self.nodes[n] for n in ns[1:]]
            for b, ns in enumerate(self.copies)
            if len(ns) > 1
        }

    def copy_number(self, node):
        """0 for a base node, k for its k-th duplicate."""
        return self.copies[self.node_base[node]].index(node)

    def edges_between(self, src, dst):
        return [k for d, k in self.out_edges[src] if d == dst]

    def size(self):
        return len(self.nodes), len(self.node_edges)

    def base_size(self):
        return len(self.motifs), len(self.edges)

    # serialization -----------------------------------------------------
    def to_json(self):
        return {
            "motifs": [m.to_json() for m in self.motifs],
            "edges": [e.to_json(self.motifs) for e in self.edges],
            "duplicates": self.duplicates(),
            "truncated": self.truncated,
        }

    @classmethod
    def from_json(cls, data, verify=16, seed=0):
        try:
            motifs = [Motif.from_json(d) for d in data["motifs"]]
            index = {m.id: k for k, m in enumerate(motifs)}
            if len(index) != len(motifs):
                raise MotifGraphError("duplicate motif ids")
            edges = []
            for d in data["edges"]:
                if d["u"] not in index or d["v"] not in index:
                    raise MotifGraphError(f"edge endpoint {d['u']}->{d['v']} is not a motif")
                edges.append(
                    MotifEdge(
                        index[d["u"]],
                        index[d["v"]],
                        int(d["l1"]),
                        int(d["l2"]),
                        tuple(d["b1"]),
                        tuple(d["b2"]),
                        tuple(tuple(p) for p in d["map"]),
                        tuple(tuple(t) for t in d["attach"]),
                    )
                )
            dups = data.get("duplicates", {})
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MotifGraphError):
                raise
            raise MotifGraphError(f"schema violation: {exc}") from exc
        for e in edges:
            if not (0 <= e.l1 < len(motifs[e.u].red_groups) and 0 <= e.l2 < len(motifs[e.v].red_groups)):
                raise MotifGraphError("edge red-group index out of range")
        rng = random.Random(seed)
        sample = edges if len(edges) <= verify else rng.sample(edges, verify)
        for e in sample:
            if not verify_edge(motifs[e.u], motifs[e.v], e):
                raise MotifGraphError(
                    f"certificate of edge {motifs[e.u].id}->{motifs[e.v].id} fails verification"
                )
        g = cls(motifs, edges, truncated=bool(data.get("truncated", False)))
        if dups:
            counts = {}
            for base, names in dups.items():
                if base not in index:
                    raise MotifGraphError(f"duplicate of unknown motif {base}")
                expect = [f"{base}:{k}" for k in range(1, len(names) + 1)]
                if list(names) != expect:
                    raise MotifGraphError(f"bad duplicate names for {base}")
                counts[index[base]] = len(names) + 1
            g = g.with_copies(counts)
        return g

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path, verify=16):
        with open(path) as fh:
            return cls.from_json(json.load(fh), verify=verify)

    def to_dot(self, weights=None):
        lines = ["digraph motifs {"]
        for n in self.nodes:
            lines.append(f'  "{n}";')
        for s, d, k in self.node_edges:
            attr = ""
            if weights is not None:
                attr = f' [penwidth="{max(0.1, float(weights[d, s])):.3f}"]'
            lines.append(f'  "{self.nodes[s]}" -> "{self.nodes[d]}"{attr};')
        lines.append("}")
        return "\n".join(lines) + "\n"

    # augmentation ------------------------------------------------------
    def with_copies(self, counts):
        """Graph with ``counts[b]`` total copies of base motif ``b`` (default 1).

        Every copy of u connects to every copy of v through each base edge
        u -> v, so duplicates share their base's in/out edge multiset.
        """
        nodes = [m.id for m in self.motifs]
        node_base = list(range(len(self.motifs)))
        for b, m in enumerate(self.motifs):
            for k in range(1, counts.get(b, 1)):
                nodes.append(f"{m.id}:{k}")
                node_base.append(b)
        copies = [[] for _ in self.motifs]
        for n, b in enumerate(node_base):
            copies[b].append(n)
        node_edges = []
        for k, e in enumerate(self.edges):
            for s in copies[e.u]:
                for d in copies[e.v]:
                    node_edges.append((s, d, k))
        node_edges.sort()
        return MotifGraph(self.motifs, self.edges, nodes, node_base, node_edges, self.truncated)

    def base(self):
        return MotifGraph(self.motifs, self.edges, truncated=self.truncated)


def build_motif_graph(motifs, jobs=None, cap=MATCH_CAP):
    """Match every ordered motif pair (self-pairs included) into a MotifGraph."""
    motifs = list(motifs)
    pairs = [(ui, vi) for ui in range(len(motifs)) for vi in range(len(motifs))]
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    args = [(motifs, ui, vi, cap) for ui, vi in pairs]
    if jobs > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_pair_job, args, chunksize=max(1, len(args) // (4 * jobs))))
    else:
        results = [_pair_job(a) for a in args]
    edges = []
    truncated = False
    for es, t in results:
        edges.extend(es)
        truncated |= t
    edges.sort(key=MotifEdge.key)
    return MotifGraph(motifs, edges, truncated=truncated)


def augment(g, dataset_walks):
    """Add duplicate nodes so every walk can name each motif occurrence separately.

    ``dataset_walks`` holds WalkDag-like objects with a ``base_counts()``
    method, or plain iterables of base motif indices.
    """
    counts = {}
    for w in dataset_walks:
        c = w.base_counts() if hasattr(w, "base_counts") else _count(w)
        for b, k in c.items():
            counts[b] = max(counts.get(b, 1), k)
    return g.base().with_copies(counts)


def _count(items):
    out = {}
    for b in items:
        out[b] = out.get(b, 0) + 1
    return out
