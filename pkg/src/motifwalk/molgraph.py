"""Heavy-atom molecular graphs.

A small, dependency-free molecule substrate: atoms and bonds, a parser and
writer for a subset of SMILES, valence checking with Kekule assignment for
aromatic systems, induced subgraphs, canonical atom ordering and Morgan-style
circular fingerprints.

Hydrogens are never materialized.  An atom either carries an explicit
hydrogen count (bracket atoms such as ``[nH]``) or ``hs is None``, in which
case implicit hydrogens fill the lowest allowed valence.
"""
from __future__ import annotations

import struct
import sys
from collections import deque
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

ELEMENTS = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_ELEMENTS = ("B", "C", "N", "O", "P", "S")

# allowed valences, ascending; the last entry is the maximum
VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

FP_BITS = 2048


class BondOrder(IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4


_ORDER_TO_JSON = {1: 1, 2: 2, 3: 3, 4: 1.5}
_JSON_TO_ORDER = {1: 1, 2: 2, 3: 3, 1.5: 4, "aromatic": 4}


class MolGraphError(ValueError):
    pass


class SmilesSyntaxError(MolGraphError):
    def __init__(self, msg, offset):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


class UnsupportedSmilesError(SmilesSyntaxError):
    pass


class ValenceError(MolGraphError):
    def __init__(self, violations):
        first = violations[0]
        super().__init__(
            f"valence violation at atom {first.atom} "
            f"({first.element}: {first.valence} > {first.max_valence})"
        )
        self.violations = violations
        self.atom = first.atom


class DisconnectedGraphError(MolGraphError):
    pass


@dataclass(frozen=True)
class Atom:
    element: str
    aromatic: bool = False
    hs: int | None = None

    def __post_init__(self):
        if self.element not in ELEMENTS:
            raise MolGraphError(f"unsupported element {self.element!r}")
        if self.aromatic and self.element not in AROMATIC_ELEMENTS:
            raise MolGraphError(f"element {self.element!r} cannot be aromatic")

    @property
    def label(self):
        return (self.element, self.aromatic, self.hs)

    @property
    def symbol(self):
        return self.element.lower() if self.aromatic else self.element


@dataclass(frozen=True)
class Violation:
    atom: int
    element: str
    valence: int
    max_valence: int


class MolecularGraph:
    """Immutable attributed undirected graph of heavy atoms.

    ``bonds`` holds ``(i, j, order)`` triples with ``i < j``; ``origin``
    optionally records, for each atom, its index in a parent graph.
    """

    __slots__ = ("atoms", "bonds", "origin", "_adj")

    def __init__(self, atoms, bonds=(), origin=None):
        self.atoms = tuple(atoms)
        n = len(self.atoms)
        adj = [dict() for _ in range(n)]
        norm = []
        for i, j, order in bonds:
            i, j, order = int(i), int(j), int(order)
            if not (0 <= i < n and 0 <= j < n):
                raise MolGraphError(f"bond ({i}, {j}) references a missing atom")
            if i == j:
                raise MolGraphError(f"self-bond on atom {i}")
            if order not in (1, 2, 3, 4):
                raise MolGraphError(f"bad bond order {order}")
            if j in adj[i]:
                raise MolGraphError(f"parallel bond between {i} and {j}")
            adj[i][j] = order
            adj[j][i] = order
            norm.append((min(i, j), max(i, j), order))
        self.bonds = tuple(sorted(norm))
        self.origin = None if origin is None else tuple(origin)
        self._adj = tuple(adj)

    # basic queries -------------------------------------------------------
    def __len__(self):
        return len(self.atoms)

    @property
    def n_atoms(self):
        return len(self.atoms)

    def neighbors(self, i):
        return self._adj[i]

    def degree(self, i):
        return len(self._adj[i])

    def bond_order(self, i, j):
        return self._adj[i].get(j, 0)

    def __eq__(self, other):
        if not isinstance(other, MolecularGraph):
            return NotImplemented
        return self.atoms == other.atoms and self.bonds == other.bonds

    def __hash__(self):
        return hash((self.atoms, self.bonds))

    def __repr__(self):
        return f"MolecularGraph({len(self.atoms)} atoms, {len(self.bonds)} bonds)"

    # serialization -------------------------------------------------------
    def to_json(self):
        atoms = []
        for a in self.atoms:
            d = {"element": a.element, "aromatic": a.aromatic}
            if a.hs is not None:
                d["hs"] = a.hs
            atoms.append(d)
        return {
            "atoms": atoms,
            "bonds": [[i, j, _ORDER_TO_JSON[o]] for i, j, o in self.bonds],
        }

    @classmethod
    def from_json(cls, data):
        atoms = [
            Atom(a["element"], bool(a.get("aromatic", False)), a.get("hs"))
            for a in data["atoms"]
        ]
        bonds = []
        for i, j, o in data["bonds"]:
            if o not in _JSON_TO_ORDER:
                raise MolGraphError(f"bad bond order {o!r}")
            bonds.append((i, j, _JSON_TO_ORDER[o]))
        return cls(atoms, bonds)

    def relabel(self, perm):
        """Return the graph with atom ``i`` moved to position ``perm[i]``."""
        n = len(self.atoms)
        atoms = [None] * n
        for i, a in enumerate(self.atoms):
            atoms[perm[i]] = a
        return MolecularGraph(atoms, [(perm[i], perm[j], o) for i, j, o in self.bonds])


# ---------------------------------------------------------------------------
# structure helpers


def induced_subgraph(g, atoms):
    """Node-induced subgraph on ``atoms``; atoms keep ascending parent order."""
    keep = sorted(set(atoms))
    for a in keep:
        if not 0 <= a < len(g.atoms):
            raise IndexError(f"atom index {a} out of range")
    pos = {a: k for k, a in enumerate(keep)}
    bonds = [(pos[i], pos[j], o) for i, j, o in g.bonds if i in pos and j in pos]
    return MolecularGraph([g.atoms[a] for a in keep], bonds, origin=keep)


def components(g, atoms=None):
    """Connected components (sorted atom lists) of ``g`` or of g restricted to ``atoms``."""
    allowed = set(range(len(g.atoms))) if atoms is None else set(atoms)
    seen = set()
    out = []
    for start in sorted(allowed):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = deque([start])
        while queue:
            a = queue.popleft()
            for b in g.neighbors(a):
                if b in allowed and b not in seen:
                    seen.add(b)
                    comp.append(b)
                    queue.append(b)
        out.append(sorted(comp))
    return out


def is_connected(g, atoms=None):
    """True iff the (restricted) graph is non-empty and has one component."""
    comps = components(g, atoms)
    return len(comps) == 1


def ring_bonds(g):
    """Set of ``(i, j)`` bonds (i < j) lying on at least one cycle."""
    n = len(g.atoms)
    disc = [-1] * n
    low = [0] * n
    bridges = set()
    timer = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(g.neighbors(root)))]
        while stack:
            v, parent, it = stack[-1]
            advanced = False
            for w in it:
                if w == parent:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, v, iter(g.neighbors(w))))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if not advanced:
                stack.pop()
                if stack:
                    p = stack[-1][0]
                    low[p] = min(low[p], low[v])
                    if low[v] > disc[p]:
                        bridges.add((min(p, v), max(p, v)))
    return {(i, j) for i, j, _ in g.bonds} - bridges


def ring_atoms(g):
    out = set()
    for i, j in ring_bonds(g):
        out.add(i)
        out.add(j)
    return out


# ---------------------------------------------------------------------------
# valence and Kekule assignment


def _base_valence(g, i):
    """Bond-order sum with aromatic bonds counted as 1."""
    total = 0
    for o in g.neighbors(i).values():
        total += 1 if o == BondOrder.AROMATIC else o
    return total


def _aromatic_degree(g, i):
    return sum(1 for o in g.neighbors(i).values() if o == BondOrder.AROMATIC)


def aromatic_systems(g, atoms=None):
    """Aromatic-bond connected components that look like complete ring systems.

    A component counts as complete when every atom in it has at least two
    aromatic bonds.  Fragments that cut through a ring leave incomplete
    systems, which are skipped by Kekule checking.
    """
    arom = [i for i, a in enumerate(g.atoms) if a.aromatic]
    seeds = arom if atoms is None else [i for i in atoms if g.atoms[i].aromatic]
    seen = set()
    out = []
    for s in seeds:
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        queue = deque([s])
        while queue:
            a = queue.popleft()
            for b, o in g.neighbors(a).items():
                if o == BondOrder.AROMATIC and b not in seen:
                    seen.add(b)
                    comp.append(b)
                    queue.append(b)
        if all(_aromatic_degree(g, a) >= 2 for a in comp):
            out.append(sorted(comp))
    return out


def _pi_role(g, i):
    """'required', 'optional' or 'forbidden' double-bond role for an aromatic atom."""
    a = g.atoms[i]
    base = _base_valence(g, i) + (a.hs or 0)
    can_double = base + 1 <= VALENCES[a.element][-1]
    if a.element == "C":
        return "required" if can_double else "impossible"
    if a.element in ("N", "P"):
        if (a.hs or 0) > 0 or g.degree(i) >= 3 or not can_double:
            return "forbidden"
        return "optional"
    return "forbidden"


def kekulize_system(g, system):
    """Find a Kekule matching for one aromatic system.

    Returns a dict mapping matched atoms to their double-bond partner, or
    ``None`` when no assignment gives every carbon exactly one double bond.
    """
    roles = {i: _pi_role(g, i) for i in system}
    if any(r == "impossible" for r in roles.values()):
        return None
    partners = {
        i: sorted(
            j
            for j, o in g.neighbors(i).items()
            if o == BondOrder.AROMATIC and j in roles and roles[j] != "forbidden"
        )
        for i in system
        if roles[i] != "forbidden"
    }
    required = {i for i, r in roles.items() if r == "required"}
    match = {}

    def solve():
        free = [i for i in required if i not in match]
        if not free:
            return True
        # most constrained atom first
        best = None
        best_opts = None
        for i in free:
            opts = [j for j in partners[i] if j not in match]
            if best is None or len(opts) < len(best_opts):
                best, best_opts = i, opts
                if not opts:
                    return False
        for j in best_opts:
            match[best] = j
            match[j] = best
            if solve():
                return True
            del match[best]
            del match[j]
        return False

    return dict(match) if solve() else None


def kekule_assignment(g, atoms=None):
    """Map atom -> double-bond partner over complete aromatic systems.

    Returns ``(matching, failed_atoms)``.
    """
    matching = {}
    failed = []
    for system in aromatic_systems(g, atoms):
        m = kekulize_system(g, system)
        if m is None:
            failed.extend(system)
        else:
            matching.update(m)
    return matching, failed


def atom_valences(g, matching=None):
    """Explicit valence (no implicit H) of each atom under a Kekule matching."""
    if matching is None:
        matching, _ = kekule_assignment(g)
    out = []
    for i, a in enumerate(g.atoms):
        v = _base_valence(g, i) + (a.hs or 0)
        if i in matching:
            v += 1
        out.append(v)
    return out


def implicit_hydrogens(g):
    matching, _ = kekule_assignment(g)
    vals = atom_valences(g, matching)
    out = []
    for a, v in zip(g.atoms, vals):
        if a.hs is not None:
            out.append(a.hs)
            continue
        h = 0
        for allowed in VALENCES[a.element]:
            if allowed >= v:
                h = allowed - v
                break
        out.append(h)
    return out


def validate_valence(g, atoms=None, kekulize=True):
    """List every atom whose valence exceeds its element maximum.

    With ``kekulize`` the aromatic bonds of complete aromatic systems are
    resolved into single/double bonds first; an unassignable system reports
    each of its atoms.  ``atoms`` restricts the check (and the aromatic
    systems examined) to the given atoms.  An empty list means valid.
    """
    check = range(len(g.atoms)) if atoms is None else sorted(set(atoms))
    matching, failed = ({}, []) if not kekulize else kekule_assignment(g, check)
    failed = set(failed)
    out = []
    for i in check:
        a = g.atoms[i]
        v = _base_valence(g, i) + (a.hs or 0) + (1 if i in matching else 0)
        mx = VALENCES[a.element][-1]
        if v > mx or i in failed:
            out.append(Violation(i, a.element, v if v > mx else mx + 1, mx))
    return out


# ---------------------------------------------------------------------------
# SMILES

_ORGANIC = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I", "b", "c", "n", "o", "p", "s"}
_BOND_SYMBOLS = {"-": 1, "=": 2, "#": 3, ":": 4}


def parse_smiles(text):
    """Parse the supported SMILES subset into a valence-checked graph."""
    atoms = []
    bonds = {}
    explicit_aromatic = set()
    stack = []
    prev = None
    pending_bond = None
    pending_pos = 0
    rings = {}
    pos = 0
    n = len(text)

    def add_bond(i, j, order, at):
        key = (min(i, j), max(i, j))
        if i == j or key in bonds:
            raise SmilesSyntaxError("duplicate or self bond", at)
        bonds[key] = order

    def default_order(i, j):
        return 4 if atoms[i].aromatic and atoms[j].aromatic else 1

    while pos < n:
        ch = text[pos]
        start = pos
        if ch in " \t\r\n":
            raise SmilesSyntaxError("whitespace inside SMILES", pos)
        if ch == "(":
            if prev is None:
                raise SmilesSyntaxError("branch before any atom", pos)
            stack.append(prev)
            pos += 1
            continue
        if ch == ")":
            if not stack:
                raise SmilesSyntaxError("unbalanced ')'", pos)
            if pending_bond is not None:
                raise SmilesSyntaxError("dangling bond symbol", pending_pos)
            prev = stack.pop()
            pos += 1
            continue
        if ch in _BOND_SYMBOLS:
            if pending_bond is not None:
                raise SmilesSyntaxError("two bond symbols in a row", pos)
            pending_bond = _BOND_SYMBOLS[ch]
            pending_pos = pos
            pos += 1
            continue
        if ch in "/\\":
            raise UnsupportedSmilesError("stereo bonds are not supported", pos)
        if ch == ".":
            raise UnsupportedSmilesError("disconnected SMILES ('.') is not supported", pos)
        if ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesSyntaxError("ring closure before any atom", pos)
            if ch == "%":
                digits = text[pos + 1 : pos + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesSyntaxError("bad %nn ring label", pos)
                label = int(digits)
                pos += 3
            else:
                label = int(ch)
                pos += 1
            if label in rings:
                other, order, _ = rings.pop(label)
                if order is not None and pending_bond is not None and order != pending_bond:
                    raise SmilesSyntaxError("conflicting ring-closure bonds", start)
                order = pending_bond if pending_bond is not None else order
                if order is None:
                    order = default_order(other, prev)
                elif order == 4:
                    explicit_aromatic.add((min(other, prev), max(other, prev)))
                add_bond(other, prev, order, start)
            else:
                rings[label] = (prev, pending_bond, start)
            pending_bond = None
            continue
        # atoms
        if ch == "[":
            close = text.find("]", pos)
            if close < 0:
                raise SmilesSyntaxError("unterminated bracket atom", pos)
            atom = _parse_bracket(text[pos + 1 : close], pos)
            pos = close + 1
        else:
            sym = text[pos : pos + 2]
            if sym in ("Cl", "Br"):
                pos += 2
            else:
                sym = ch
                pos += 1
            if sym not in _ORGANIC:
                if sym.isalpha() or sym == "*":
                    if sym == "*":
                        raise UnsupportedSmilesError("wildcard atoms are not supported", start)
                    raise UnsupportedSmilesError(f"unsupported element {sym!r}", start)
                raise SmilesSyntaxError(f"unexpected character {ch!r}", start)
            aromatic = sym.islower()
            atom = Atom(sym.capitalize() if len(sym) == 1 else sym, aromatic)
        atoms.append(atom)
        idx = len(atoms) - 1
        if prev is not None:
            order = pending_bond if pending_bond is not None else default_order(prev, idx)
            if pending_bond == 4:
                explicit_aromatic.add((prev, idx))
            add_bond(prev, idx, order, start)
        elif pending_bond is not None:
            raise SmilesSyntaxError("bond symbol before first atom", pending_pos)
        pending_bond = None
        prev = idx

    if pending_bond is not None:
        raise SmilesSyntaxError("dangling bond symbol", pending_pos)
    if stack:
        raise SmilesSyntaxError("unbalanced '('", n)
    if rings:
        label, (_, _, opos) = next(iter(rings.items()))
        raise SmilesSyntaxError(f"unclosed ring {label}", opos)
    if not atoms:
        raise SmilesSyntaxError("empty SMILES", 0)

    for (i, j), o in bonds.items():
        if o == 4 and not (atoms[i].aromatic and atoms[j].aromatic):
            raise SmilesSyntaxError("aromatic bond between non-aromatic atoms", 0)
    g = MolecularGraph(atoms, [(i, j, o) for (i, j), o in bonds.items()])
    # implicit aromatic bonds outside rings are single (biphenyl written without '-')
    rb = ring_bonds(g)
    fixed = [
        (i, j, 1 if o == 4 and (i, j) not in rb and (i, j) not in explicit_aromatic else o)
        for i, j, o in g.bonds
    ]
    g = MolecularGraph(atoms, fixed)
    for i, a in enumerate(g.atoms):
        if a.aromatic and _aromatic_degree(g, i) < 2:
            raise MolGraphError(f"aromatic atom {i} is not part of an aromatic ring")
    violations = validate_valence(g)
    if violations:
        raise ValenceError(violations)
    return g


def _parse_bracket(body, offset):
    if body[:1].isdigit():
        raise UnsupportedSmilesError("isotopes are not supported", offset + 1)
    if body[:1] == "*":
        raise UnsupportedSmilesError("wildcard atoms are not supported", offset + 1)
    if body[:1].isupper() and body[1:2].islower() and body[1:2] != "H":
        sym = body[:2]
    else:
        sym = body[:1]
    if sym not in _ORGANIC:
        raise UnsupportedSmilesError(f"unsupported element {sym!r}", offset + 1)
    pos = len(sym)
    hs = 0
    rest = body[pos:]
    if rest.startswith("@"):
        raise UnsupportedSmilesError("stereochemistry is not supported", offset + 1 + pos)
    if rest.startswith("H"):
        pos += 1
        rest = body[pos:]
        digits = ""
        while rest[: len(digits) + 1][-1:].isdigit() and len(digits) < len(rest):
            digits += rest[len(digits)]
        hs = int(digits) if digits else 1
        pos += len(digits)
        rest = body[pos:]
    if rest:
        if rest[0] in "+-":
            raise UnsupportedSmilesError("charges are not supported", offset + 1 + pos)
        if rest[0] == ":":
            raise UnsupportedSmilesError("atom classes are not supported", offset + 1 + pos)
        raise SmilesSyntaxError(f"unexpected {rest[0]!r} in bracket atom", offset + 1 + pos)
    aromatic = sym.islower()
    return Atom(sym.capitalize() if len(sym) == 1 else sym, aromatic, hs)


def _atom_token(a):
    if a.hs is not None:
        h = "" if a.hs == 0 else ("H" if a.hs == 1 else f"H{a.hs}")
        return f"[{a.symbol}{h}]"
    return a.symbol


def _bond_token(g, i, j, order):
    if order == 4:
        return ""
    if order == 1:
        return "-" if g.atoms[i].aromatic and g.atoms[j].aromatic else ""
    return "=" if order == 2 else "#"


def write_smiles(g, order=None):
    """Write a connected graph as SMILES.

    ``order`` ranks atoms (lower first) and fixes the traversal; by default
    the canonical order is used, which makes the output canonical.
    """
    if len(g.atoms) == 0 or not is_connected(g):
        raise DisconnectedGraphError("write_smiles needs a non-empty connected graph")
    rank = canonical_order(g) if order is None else list(order)
    start = min(range(len(g.atoms)), key=lambda a: rank[a])

    visited = set()
    tree_children = {a: [] for a in range(len(g.atoms))}
    tree_edges = set()

    def dfs(a):
        visited.add(a)
        for b in sorted(g.neighbors(a), key=lambda b: rank[b]):
            if b not in visited:
                tree_children[a].append(b)
                tree_edges.add((min(a, b), max(a, b)))
                dfs(b)

    if len(g.atoms) + 100 > sys.getrecursionlimit():
        sys.setrecursionlimit(len(g.atoms) + 200)
    dfs(start)
    closures = [(i, j) for i, j, _ in g.bonds if (i, j) not in tree_edges]

    # ring labels: opened at the atom visited first, closed at the other
    visit_pos = {}

    def number(a):
        visit_pos[a] = len(visit_pos)
        for b in tree_children[a]:
            number(b)

    number(start)
    ring_at = {a: [] for a in range(len(g.atoms))}
    for i, j in closures:
        first, second = (i, j) if visit_pos[i] < visit_pos[j] else (j, i)
        ring_at[first].append(("open", second))
        ring_at[second].append(("close", first))

    free = list(range(1, 100))
    open_label = {}
    out = []

    def label_str(k):
        return str(k) if k < 10 else f"%{k:02d}"

    def emit(a, parent):
        if parent is not None:
            out.append(_bond_token(g, parent, a, g.bond_order(parent, a)))
        out.append(_atom_token(g.atoms[a]))
        # closes first, in order of partner visit position, then opens
        events = sorted(ring_at[a], key=lambda e: (e[0] != "close", visit_pos[e[1]]))
        for kind, other in events:
            key = (min(a, other), max(a, other))
            if kind == "close":
                k = open_label.pop(key)
                out.append(_bond_token(g, a, other, g.bond_order(a, other)) + label_str(k))
                free.append(k)
                free.sort()
            else:
                k = free.pop(0)
                open_label[key] = k
                out.append(_bond_token(g, a, other, g.bond_order(a, other)) + label_str(k))
        kids = tree_children[a]
        for b in kids[:-1]:
            out.append("(")
            emit(b, a)
            out.append(")")
        if kids:
            emit(kids[-1], a)

    emit(start, None)
    return "".join(out)


# ---------------------------------------------------------------------------
# canonical ordering

_LEAF_CAP = 20000


def _initial_colors(g):
    hs = [a.hs if a.hs is not None else -1 for a in g.atoms]
    keys = [
        (
            a.element,
            a.aromatic,
            hs[i],
            g.degree(i),
            tuple(sorted(g.neighbors(i).values())),
        )
        for i, a in enumerate(g.atoms)
    ]
    return _dense(keys)


def _dense(keys):
    uniq = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [uniq[k] for k in keys]


def _refine(g, colors):
    """Iterate neighbourhood refinement until the partition is stable."""
    n_cells = len(set(colors))
    while True:
        keys = [
            (colors[i], tuple(sorted((o, colors[j]) for j, o in g.neighbors(i).items())))
            for i in range(len(colors))
        ]
        new = _dense(keys)
        cells = len(set(new))
        if cells == n_cells:
            return new
        colors, n_cells = new, cells


def _certificate(g, colors):
    atoms = sorted(range(len(colors)), key=lambda a: colors[a])
    rank = {a: r for r, a in enumerate(atoms)}
    labels = tuple(
        (g.atoms[a].element, g.atoms[a].aromatic, -1 if g.atoms[a].hs is None else g.atoms[a].hs)
        for a in atoms
    )
    edges = tuple(sorted((min(rank[i], rank[j]), max(rank[i], rank[j]), o) for i, j, o in g.bonds))
    return (labels, edges), [rank[a] for a in range(len(colors))]


def canonical_order(g):
    """Canonical rank of every atom (a permutation of ``range(n)``).

    Colour refinement followed by individualization of the first smallest
    non-trivial cell; all branches are explored and the lexicographically
    smallest certificate wins, so the result is invariant under input
    relabeling.  Past ``_LEAF_CAP`` leaves only the first branch is followed.
    """
    n = len(g.atoms)
    if n == 0:
        return []
    best = [None, None]
    leaves = [0]

    def search(colors):
        colors = _refine(g, colors)
        cells = {}
        for a, c in enumerate(colors):
            cells.setdefault(c, []).append(a)
        if len(cells) == n:
            leaves[0] += 1
            cert, rank = _certificate(g, colors)
            if best[0] is None or cert < best[0]:
                best[0], best[1] = cert, rank
            return
        target = min((c for c in cells if len(cells[c]) > 1), key=lambda c: (len(cells[c]), c))
        for a in cells[target]:
            if leaves[0] >= _LEAF_CAP and best[0] is not None:
                return
            # individualize a: it becomes its own cell just below the rest of its cell
            nc = [2 * c + (0 if c != target or b == a else 1) for b, c in enumerate(colors)]
            search(nc)

    search(_initial_colors(g))
    return best[1]


def canonical_key(g):
    """Hashable canonical form; equal keys iff the graphs are isomorphic."""
    if len(g.atoms) == 0:
        return ((), ())
    rank = canonical_order(g)
    cert, _ = _certificate(g, rank)
    return cert


def canonical_smiles(g):
    if len(g.atoms) == 0:
        return ""
    return write_smiles(g)


# ---------------------------------------------------------------------------
# fingerprints

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
_FP_SEED = 0x5EED


def fnv1a64(data, seed=_FP_SEED):
    h = _FNV_OFFSET ^ seed
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _hash_ints(values):
    return fnv1a64(struct.pack(f"<{len(values)}q", *values))


def morgan_fingerprint(g, radius=2, n_bits=FP_BITS):
    """Circular fingerprint as a boolean array of length ``n_bits``.

    Atom identifiers start from (element, aromaticity, heavy degree, total
    hydrogens, ring membership) and are rehashed ``radius`` times with the
    sorted (bond order, neighbour identifier) pairs.  Every identifier of
    every round sets bit ``hash % n_bits``.
    """
    bits = np.zeros(n_bits, dtype=bool)
    if len(g.atoms) == 0:
        return bits
    hs = implicit_hydrogens(g)
    rings = ring_atoms(g)
    ids = []
    for i, a in enumerate(g.atoms):
        ids.append(
            _hash_ints(
                [ELEMENTS.index(a.element), int(a.aromatic), g.degree(i), hs[i], int(i in rings)]
            )
        )
    for x in ids:
        bits[x % n_bits] = True
    for r in range(1, radius + 1):
        new = []
        for i in range(len(g.atoms)):
            env = sorted((o, ids[j]) for j, o in g.neighbors(i).items())
            flat = [r, ids[i] & 0x7FFFFFFFFFFFFFFF]
            for o, h in env:
                flat.extend((o, h & 0x7FFFFFFFFFFFFFFF))
            new.append(_hash_ints(flat))
        ids = new
        for x in ids:
            bits[x % n_bits] = True
    return bits


def tanimoto(a, b):
    inter = np.count_nonzero(a & b)
    union = np.count_nonzero(a | b)
    return 1.0 if union == 0 else inter / union
