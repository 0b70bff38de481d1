"""Molecules as rooted walks over the motif graph.

A molecule's fragments, joined by their cut bonds, form a small tree over
motif-graph nodes.  The longest shortest path becomes the main chain, every
other branch a side chain.  The tree is linearized into a trajectory that
descends side chains first and walks back out of them, and it is printed as
a walk string such as ``G1->G2[->G3->G4]->G2:1``.
"""
import re
from collections import deque
from dataclasses import dataclass
from itertools import permutations, product

import networkx as nx

from .assembly import Assembly


class WalkError(ValueError):
    pass


class WalkSyntaxError(WalkError):
    def __init__(self, msg, offset):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


def split_name(name):
    """'G82:1' -> ('G82', 1)."""
    base, _, k = name.partition(":")
    return base, int(k) if k else 0


def node_name(base, copy):
    return base if copy == 0 else f"{base}:{copy}"


_ID = re.compile(r"([A-Za-z_]+)(\d*)")


def name_key(name):
    """Ascending motif-id order: prefix, then number, then duplicate index."""
    base, k = split_name(name)
    m = _ID.fullmatch(base)
    if m and m.group(2):
        return (m.group(1), int(m.group(2)), k)
    return (base, -1, k)


class WalkDag:
    """Rooted tree of motif-graph nodes; node 0 is the root.

    ``edge[i]`` is the motif-graph edge index used to attach node i to its
    parent (None for the root, or when the walk came from text).  Children
    are kept in insertion order.
    """

    def __init__(self):
        self.names = []
        self.main = []
        self.parent = []
        self.children = []
        self.edge = []

    def add(self, name, parent=None, main=False, edge=None):
        if parent is None and self.names:
            raise WalkError("walk already has a root")
        k = len(self.names)
        self.names.append(name)
        self.main.append(bool(main))
        self.parent.append(parent)
        self.children.append([])
        self.edge.append(edge)
        if parent is not None:
            self.children[parent].append(k)
        return k

    def __len__(self):
        return len(self.names)

    def base_counts(self):
        out = {}
        for n in self.names:
            b = split_name(n)[0]
            out[b] = out.get(b, 0) + 1
        return out

    def ordered_children(self, i, canonical=True):
        kids = self.children[i]
        if canonical:
            return re_order(self, kids)
        return list(kids)

    def copy(self):
        d = WalkDag()
        d.names = list(self.names)
        d.main = list(self.main)
        d.parent = list(self.parent)
        d.children = [list(c) for c in self.children]
        d.edge = list(self.edge)
        return d

    def to_json(self):
        return {
            "nodes": [{"name": n, "main": m} for n, m in zip(self.names, self.main)],
            "edges": [[self.parent[i], i, self.edge[i]] for i in range(1, len(self))],
        }

    @classmethod
    def from_json(cls, data):
        d = cls()
        nodes = data["nodes"]
        parents = {c: (p, e) for p, c, e in data["edges"]}
        for i, nd in enumerate(nodes):
            if i == 0:
                d.add(nd["name"], None, nd.get("main", True))
                continue
            if i not in parents:
                raise WalkError(f"node {i} has no parent edge")
            p, e = parents[i]
            if not 0 <= p < i:
                raise WalkError("parents must precede children")
            d.add(nd["name"], p, nd.get("main", False), e)
        return d

    def __eq__(self, other):
        if not isinstance(other, WalkDag):
            return NotImplemented
        return (
            self.names == other.names
            and self.main == other.main
            and self.parent == other.parent
            and self.children == other.children
            and self.edge == other.edge
        )


def re_order(dag, kids):
    """Side chains before the main-chain child, each group by motif id."""
    return sorted(kids, key=lambda c: (dag.main[c], name_key(dag.names[c])))


# ---------------------------------------------------------------------------
# fragment graphs and traversal


@dataclass
class FragmentGraph:
    motifs: list  # base motif index per fragment
    edges: dict  # (j1, j2) -> motif edge index for j1 -> j2
    dropped: tuple = None  # edge removed to break a ring of fragments

    def neighbours(self, j):
        return sorted(b for a, b in self.edges if a == j)


def edge_lookup(graph):
    table = getattr(graph, "_edge_lookup", None)
    if table is None:
        table = {e.key(): k for k, e in enumerate(graph.edges)}
        graph._edge_lookup = table
    return table


def form_fragment_graph(parent, frag, assignment, graph):
    """Fragment adjacency with each direction resolved to a certified motif edge."""
    table = edge_lookup(graph)
    owner = frag.fragment_of()
    cut_by_pair = {}
    for i, j in frag.cut_bonds:
        a, b = owner[i], owner[j]
        cut_by_pair.setdefault((a, b), []).append((i, j))
        cut_by_pair.setdefault((b, a), []).append((j, i))
    edges = {}
    for (j1, j2), cuts in sorted(cut_by_pair.items()):
        f1, f2 = assignment[j1], assignment[j2]
        l1 = f1.context_index[j2]
        l2 = f2.context_index[j1]
        b1 = tuple(sorted(f1.atom_map[a] for a in frag.contexts[(j2, j1)]))
        b2 = tuple(sorted(f2.atom_map[a] for a in frag.contexts[(j1, j2)]))
        attach = tuple(
            sorted((f1.atom_map[a], f2.atom_map[c], parent.bond_order(a, c)) for a, c in cuts)
        )
        key = (f1.motif, f2.motif, l1, l2, b1, b2, attach)
        if key not in table:
            raise WalkError(
                f"no motif-graph edge for fragments {j1}->{j2} "
                f"({graph.motifs[f1.motif].id}->{graph.motifs[f2.motif].id})"
            )
        edges[(j1, j2)] = table[key]
    return FragmentGraph([f.motif for f in assignment], edges)


def _frag_key(fg, j):
    return (fg.motifs[j], j)


def traverse_dag(fg, graph):
    """Root the fragment graph at one end of its canonical longest shortest path."""
    n = len(fg.motifs)
    if n == 0:
        raise WalkError("empty fragment graph")
    und = nx.Graph()
    und.add_nodes_from(range(n))
    und.add_edges_from((a, b) for a, b in fg.edges if a < b)
    if not nx.is_connected(und):
        raise WalkError("fragment graph is disconnected")
    dropped = None
    extra = und.number_of_edges() - (n - 1)
    if extra > 1:
        raise WalkError(f"segmentation has {extra} independent rings of fragments")
    if extra == 1:
        cycle = nx.cycle_basis(und)[0]
        ring = [(cycle[i], cycle[(i + 1) % len(cycle)]) for i in range(len(cycle))]

        def pair_key(p):
            return tuple(sorted((_frag_key(fg, p[0]), _frag_key(fg, p[1])), reverse=True))

        a, b = max(ring, key=pair_key)
        und.remove_edge(a, b)
        dropped = (min(a, b), max(a, b))

    def ordered(nbrs):
        return sorted(nbrs, key=lambda j: _frag_key(fg, j))

    best = None
    for s in range(n):
        prev = {s: None}
        queue = deque([s])
        while queue:
            a = queue.popleft()
            for b in ordered(und[a]):
                if b not in prev:
                    prev[b] = a
                    queue.append(b)
        for t in range(n):
            path = [t]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            path.reverse()
            key = (-len(path), [_frag_key(fg, j) for j in path])
            if best is None or key < best[0]:
                best = (key, path)
    chain = best[1]
    on_chain = set(chain)
    src = chain[0]

    # BFS tree from src
    tparent = {src: None}
    tkids = {j: [] for j in range(n)}
    queue = deque([src])
    while queue:
        a = queue.popleft()
        for b in ordered(und[a]):
            if b not in tparent:
                tparent[b] = a
                tkids[a].append(b)
                queue.append(b)

    dag = WalkDag()
    seen = {}
    frag_node = {}

    def visit(j, parent_node):
        base = graph.motifs[fg.motifs[j]].id
        k = seen.get(base, 0)
        seen[base] = k + 1
        edge = None if parent_node is None else fg.edges[(tparent[j], j)]
        node = dag.add(node_name(base, k), parent_node, j in on_chain, edge)
        frag_node[j] = node
        for c in sorted(tkids[j], key=lambda c: (c in on_chain, _frag_key(fg, c))):
            visit(c, node)

    visit(src, None)
    dag.fragment_nodes = frag_node
    dag.dropped = dropped
    return dag


# ---------------------------------------------------------------------------
# linearization


def dfs_walk(dag, closed=False, canonical=True):
    """Forcing trajectory: pre-order with a step back to the parent after each side chain.

    With ``closed`` every child (main chain included) is walked back, so the
    trajectory ends at the root.
    """
    traj = []
    if not len(dag):
        return traj
    stack = [(0, iter(dag.ordered_children(0, canonical)))]
    traj.append(0)
    while stack:
        cur, it = stack[-1]
        child = next(it, None)
        if child is None:
            stack.pop()
            if stack:
                parent = stack[-1][0]
                if closed or not dag.main[cur]:
                    traj.append(parent)
            continue
        traj.append(child)
        stack.append((child, iter(dag.ordered_children(child, canonical))))
    return traj


@dataclass
class RandomWalkRepr:
    nodes: list  # dag node indices
    names: list
    probs: list = None


def euler_linearize(dag, closed=False):
    traj = dfs_walk(dag, closed)
    return RandomWalkRepr(traj, [dag.names[i] for i in traj])


def walk_steps(dag, closed=False, canonical=True):
    """(from, to, kind) steps of the trajectory; kind is 'attach' or 'return'."""
    traj = dfs_walk(dag, closed, canonical)
    out = []
    for a, b in zip(traj, traj[1:]):
        out.append((a, b, "attach" if dag.parent[b] == a else "return"))
    return out


# ---------------------------------------------------------------------------
# walk strings


def print_walk(dag, canonical=True):
    if not len(dag):
        return ""

    def walk(i, top):
        kids = dag.ordered_children(i, canonical)
        if top:
            mains = [c for c in kids if dag.main[c]]
            cont = mains[-1] if mains else None
        else:
            cont = kids[-1] if kids else None
        parts = [dag.names[i]]
        for c in kids:
            if c != cont:
                parts.append("[->" + walk(c, False) + "]")
        if cont is not None:
            parts.append("->" + walk(cont, top))
        return "".join(parts)

    return walk(0, True)


_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?::\d+)?")


def parse_walk(text, graph=None):
    """Parse a walk string; with ``graph`` every name must be a node of it."""
    dag = WalkDag()
    pos = 0
    n = len(text)

    def expect(tok):
        nonlocal pos
        if not text.startswith(tok, pos):
            raise WalkSyntaxError(f"expected {tok!r}", pos)
        pos += len(tok)

    def name():
        nonlocal pos
        m = _NAME.match(text, pos)
        if not m:
            raise WalkSyntaxError("expected a motif id", pos)
        nm = m.group(0)
        if graph is not None and nm not in graph.node_index:
            base, k = split_name(nm)
            if base in graph.motif_index:
                raise WalkSyntaxError(f"duplicate index {k} of {base} is not in the motif graph", pos)
            raise WalkSyntaxError(f"unknown motif id {base!r}", pos)
        start = pos
        pos = m.end()
        return nm, start

    def walk(parent, top):
        nonlocal pos
        nm, _ = name()
        node = dag.add(nm, parent, top)
        while text.startswith("[", pos):
            pos += 1
            expect("->")
            walk(node, False)
            expect("]")
        if text.startswith("->", pos):
            pos += 2
            walk(node, top)
        return node

    walk(None, True)
    if pos != n:
        raise WalkSyntaxError(f"unexpected {text[pos]!r}", pos)
    return dag


def canonical_walk(text):
    return print_walk(parse_walk(text))


def split_top_level(text):
    """Split a walk string on its top-level arrows: 'A[->B]->C' -> ['A[->B]', 'C']."""
    out = []
    depth = 0
    cur = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if depth == 0 and text.startswith("->", i):
            out.append("".join(cur))
            cur = []
            i += 2
            continue
        cur.append(ch)
        i += 1
    out.append("".join(cur))
    return out


def join_top_level(parts):
    return "->".join(parts)


# ---------------------------------------------------------------------------
# replay and augmentation


def replay(dag, graph, order_closed=False):
    """Rebuild the molecule of a walk by attaching motifs in trajectory order.

    Nodes without a stored edge take the first feasible motif-graph edge.
    Returns ``(assembly, instance_of_node)``.
    """
    asm = Assembly(graph)
    inst = {0: asm.start(_base_index(graph, dag.names[0]))}
    for a, b, kind in walk_steps(dag, order_closed):
        if kind != "attach":
            continue
        e = dag.edge[b]
        if e is None:
            e = first_feasible_edge(asm, inst[a], _base_index(graph, dag.names[b]))
            if e is None:
                raise WalkError(f"no feasible edge to attach {dag.names[b]} under {dag.names[a]}")
        inst[b] = asm.attach(inst[a], graph.edges[e])
    return asm, inst


def _base_index(graph, name):
    base = split_name(name)[0]
    if base not in graph.motif_index:
        raise WalkError(f"unknown motif id {base!r}")
    return graph.motif_index[base]


def feasible_edges(asm, inst, target_base):
    u = asm.instances[inst].motif
    graph = asm.graph
    out = []
    for k in graph_out_edges(graph, u, target_base):
        if asm.can_attach(inst, graph.edges[k]):
            out.append(k)
    return out


def graph_out_edges(graph, u, v):
    table = getattr(graph, "_pair_edges", None)
    if table is None:
        table = {}
        for k, e in enumerate(graph.edges):
            table.setdefault((e.u, e.v), []).append(k)
        graph._pair_edges = table
    return table.get((u, v), [])


def first_feasible_edge(asm, inst, target_base):
    graph = asm.graph
    for k in graph_out_edges(graph, asm.instances[inst].motif, target_base):
        if asm.can_attach(inst, graph.edges[k]):
            return k
    return None


def reverse_edge(graph, k):
    """Index of the edge attaching the same two motifs the other way round, or None."""
    e = graph.edges[k]
    key = (e.v, e.u, e.l2, e.l1, e.b2, e.b1, tuple(sorted((x, a, o) for a, x, o in e.attach)))
    return edge_lookup(graph).get(key)


def renumber(dag, canonical=True):
    """Re-assign duplicate suffixes in trajectory order (k-th occurrence -> ':k')."""
    out = dag.copy()
    seen = {}
    for i in _preorder(dag, canonical):
        base = split_name(dag.names[i])[0]
        k = seen.get(base, 0)
        seen[base] = k + 1
        out.names[i] = node_name(base, k)
    return out


def _preorder(dag, canonical=True):
    order = []
    stack = [0]
    while stack:
        i = stack.pop()
        order.append(i)
        stack.extend(reversed(dag.ordered_children(i, canonical)))
    return order


def _reroot(dag, new_root, graph):
    adj = {i: [] for i in range(len(dag))}
    for i in range(1, len(dag)):
        p = dag.parent[i]
        adj[p].append((i, dag.edge[i]))
        rev = None if graph is None or dag.edge[i] is None else reverse_edge(graph, dag.edge[i])
        adj[i].append((p, rev))
    out = WalkDag()
    old_to_new = {}
    stack = [(new_root, None, None)]
    while stack:
        i, p, e = stack.pop()
        old_to_new[i] = out.add(dag.names[i], p, dag.main[i], e)
        nxt = [(c, ce) for c, ce in adj[i] if c not in old_to_new]
        for c, ce in reversed(sorted(nxt)):
            stack.append((c, old_to_new[i], ce))
    return out


def augment_data(dag, mode, graph=None):
    """Training-set variants of one walk.

    ``reverse`` re-roots at the other end of the main chain; ``permute``
    returns one walk per ordering of the side chains at every node (children
    order is then significant, see ``dfs_walk(canonical=False)``).
    """
    if mode == "reverse":
        mains = [i for i in range(len(dag)) if dag.main[i]]
        end = max(mains, key=lambda i: _depth(dag, i))
        return [renumber(_reroot(dag, end, graph))]
    if mode == "permute":
        choices = []
        nodes = list(range(len(dag)))
        for i in nodes:
            kids = re_order(dag, dag.children[i])
            side = [c for c in kids if not dag.main[c]]
            mains = [c for c in kids if dag.main[c]]
            choices.append([list(p) + mains for p in permutations(side)])
        out = []
        for combo in product(*choices):
            d = dag.copy()
            d.children = [list(c) for c in combo]
            out.append(renumber(d, canonical=False))
        return out
    if mode in (None, "none"):
        return [dag]
    raise ValueError(f"unknown augmentation mode {mode!r}")


def _depth(dag, i):
    d = 0
    while dag.parent[i] is not None:
        i = dag.parent[i]
        d += 1
    return d
