"""Induced subgraph isomorphism over MolecularGraph.

A VF2-flavoured backtracking matcher: pattern atoms are visited in a
connectivity-preserving order seeded at the rarest (label, degree) class,
and each candidate pair is checked against every already-mapped neighbour
for exact bond order and for absent bonds (induced semantics).

Atom maps are tuples: ``m[i]`` is the target atom matched to pattern atom i.
"""
from collections import Counter

MATCH_CAP = 10000


class MatchList(list):
    """List of atom maps with a ``truncated`` flag set when the cap was hit."""

    truncated = False


def _labels(g, extra):
    if extra is None:
        return [a.label for a in g.atoms]
    return [(a.label, t) for a, t in zip(g.atoms, extra)]


def _search_order(pattern, plabels, tclass_count):
    """Pattern atoms ordered so each (after the first of a component) touches a placed atom."""
    n = len(pattern.atoms)
    placed = []
    seen = set()
    rarity = {i: (tclass_count.get(plabels[i], 0), -pattern.degree(i), i) for i in range(n)}
    while len(placed) < n:
        start = min((i for i in range(n) if i not in seen), key=lambda i: rarity[i])
        seen.add(start)
        placed.append(start)
        frontier = set(pattern.neighbors(start))
        while frontier:
            # most constrained frontier atom: most already-placed neighbours, then rarity
            nxt = min(
                (i for i in frontier if i not in seen),
                key=lambda i: (-sum(1 for j in pattern.neighbors(i) if j in seen), rarity[i]),
                default=None,
            )
            if nxt is None:
                break
            seen.add(nxt)
            placed.append(nxt)
            frontier |= set(pattern.neighbors(nxt))
            frontier -= seen
    return placed


def iter_matches(target, pattern, pattern_tags=None, target_tags=None, induced=True, fixed=None):
    """Lazily yield atom maps of ``pattern`` into ``target``.

    ``pattern_tags`` / ``target_tags`` optionally attach extra labels that must
    agree between matched atoms.  ``fixed`` pins some pattern atoms to target
    atoms in advance.
    """
    n = len(pattern.atoms)
    if n == 0 or n > len(target.atoms):
        return
    plabels = _labels(pattern, pattern_tags)
    tlabels = _labels(target, target_tags)
    tcount = Counter(tlabels)
    pcount = Counter(plabels)
    for lab, k in pcount.items():
        if tcount.get(lab, 0) < k:
            return
    by_label = {}
    for t, lab in enumerate(tlabels):
        by_label.setdefault(lab, []).append(t)
    order = _search_order(pattern, plabels, tcount)
    # for each position, the earlier-placed pattern atoms to check against
    earlier = [[q for q in order[:k]] for k in range(n)]
    earlier_nb = [
        [(q, pattern.bond_order(order[k], q)) for q in earlier[k] if pattern.bond_order(order[k], q)]
        for k in range(n)
    ]
    fixed = dict(fixed or {})

    mapping = [-1] * n
    used = set()

    def candidates(k):
        p = order[k]
        if p in fixed:
            return [fixed[p]]
        # prefer neighbours of an already-mapped neighbour
        if earlier_nb[k]:
            q, _ = earlier_nb[k][0]
            return sorted(target.neighbors(mapping[q]))
        return by_label.get(plabels[p], [])

    def feasible(k, t):
        p = order[k]
        if t in used or tlabels[t] != plabels[p] or target.degree(t) < pattern.degree(p):
            return False
        tn = target.neighbors(t)
        for q in earlier[k]:
            po = pattern.bond_order(p, q)
            to = tn.get(mapping[q], 0)
            if po != to and (induced or po):
                return False
        return True

    stack = [(0, iter(candidates(0)))]
    while stack:
        k, it = stack[-1]
        advanced = False
        for t in it:
            if feasible(k, t):
                mapping[order[k]] = t
                used.add(t)
                if k + 1 == n:
                    yield tuple(mapping)
                    used.discard(t)
                    mapping[order[k]] = -1
                    continue
                stack.append((k + 1, iter(candidates(k + 1))))
                advanced = True
                break
        if not advanced:
            stack.pop()
            if stack:
                kp = stack[-1][0]
                p = order[kp]
                used.discard(mapping[p])
                mapping[p] = -1


def substruct_matches(target, pattern, cap=MATCH_CAP, pattern_tags=None, target_tags=None):
    """All node-induced embeddings of ``pattern`` into ``target``, sorted.

    At most ``cap`` maps are returned; ``result.truncated`` tells whether
    more existed.
    """
    if len(pattern.atoms) == 0:
        raise ValueError("pattern must be non-empty")
    out = MatchList()
    for m in iter_matches(target, pattern, pattern_tags, target_tags):
        if len(out) >= cap:
            out.truncated = True
            break
        out.append(m)
    out.sort()
    return out


def are_isomorphic(a, b, a_tags=None, b_tags=None):
    if len(a.atoms) != len(b.atoms) or len(a.bonds) != len(b.bonds):
        return False
    if len(a.atoms) == 0:
        return True
    if sorted(_labels(a, a_tags)) != sorted(_labels(b, b_tags)):
        return False
    return next(iter_matches(b, a, a_tags, b_tags), None) is not None


def find_isomorphism(a, b, a_tags=None, b_tags=None):
    """One atom map a -> b, or None."""
    if len(a.atoms) != len(b.atoms) or len(a.bonds) != len(b.bonds):
        return None
    if len(a.atoms) == 0:
        return ()
    return next(iter_matches(b, a, a_tags, b_tags), None)


def automorphisms(g):
    yield from iter_matches(g, g)


def isomorphisms_iter(target, seed_match):
    """Lazily yield every symmetry-equivalent variant of ``seed_match``.

    ``seed_match`` maps keys (pattern atoms) to target atoms, as a dict or a
    tuple.  For each automorphism s of ``target`` the stream yields the
    composition s after seed, so its length is the automorphism count.
    An empty seed yields nothing.
    """
    items = list(seed_match.items()) if isinstance(seed_match, dict) else list(enumerate(seed_match))
    if not items:
        return
    for t in (v for _, v in items):
        if not 0 <= t < len(target.atoms):
            raise IndexError(f"seed maps to missing target atom {t}")
    as_dict = isinstance(seed_match, dict)
    for s in automorphisms(target):
        if as_dict:
            yield {k: s[v] for k, v in items}
        else:
            yield tuple(s[v] for _, v in items)


def verify_match(target, pattern, m, induced=True):
    """Check an atom map for injectivity, label, bond and (induced) non-bond agreement."""
    if len(m) != len(pattern.atoms) or len(set(m)) != len(m):
        return False
    for i, t in enumerate(m):
        if pattern.atoms[i].label != target.atoms[t].label:
            return False
    for i in range(len(m)):
        for j in range(i + 1, len(m)):
            po = pattern.bond_order(i, j)
            to = target.bond_order(m[i], m[j])
            if po != to and (induced or po):
                return False
    return True
