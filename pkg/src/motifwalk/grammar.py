"""Learnable transition weights over the augmented motif graph.

Transition weights are a prior matrix plus a correction computed from a
running mean of visited positions (the memory):

    W_hat[i, j] = mask[i, j] * (E[i, j] + act(c @ W_adj)[i, j] + b[i])

where ``W_hat[i, j]`` weighs the edge j -> i.  A probability-mass vector is
pushed one step with ``x' = x + s * (D - W_hat) x`` (D: diagonal in-degree
matrix, s = +1 by default).  Training fits the pushed mass to the next
position of each molecule's walk; generation samples masked, normalized
pushed mass.

``W_adj`` is stored only for structurally allowed entries: column k
corresponds to the entry ``(rows[k], cols[k])`` of the dense matrix.
Entries outside the mask never reach the weights, so the compact layout
computes exactly the dense layer.
"""
import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from .assembly import Assembly
from .molgraph import validate_valence
from .walks import WalkDag, dfs_walk, parse_walk, print_walk, split_name, split_top_level

MASS_FLOOR = 1e-12
FORCED_TOL = 1e-9


def structure(graph):
    """(mask, in-degree diagonal) of an augmented motif graph."""
    n = graph.n_nodes
    mask = np.zeros((n, n), dtype=bool)
    for s, d, _ in graph.node_edges:
        mask[d, s] = True
    return mask, mask.sum(axis=1).astype(float)


@dataclass
class GrammarParams:
    E: np.ndarray  # (n, n)
    W_adj: np.ndarray  # (n, nnz)
    b: np.ndarray  # (n,)
    rows: np.ndarray  # target node of each masked entry
    cols: np.ndarray  # source node of each masked entry
    degree: np.ndarray  # in-degree per node
    sign: float = 1.0
    activation: str = "identity"
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.E.shape[0]

    @classmethod
    def init(cls, graph, seed=0, std=0.1, sign=1.0, activation="identity"):
        mask, deg = structure(graph)
        rows, cols = np.nonzero(mask)
        n = graph.n_nodes
        rng = np.random.default_rng(seed)
        E = rng.normal(0.0, std, size=(n, n))
        W_adj = rng.normal(0.0, std, size=(n, len(rows)))
        return cls(E, W_adj, np.zeros(n), rows, cols, deg, float(sign), activation)

    def copy(self):
        return GrammarParams(
            self.E.copy(), self.W_adj.copy(), self.b.copy(), self.rows, self.cols,
            self.degree, self.sign, self.activation, dict(self.meta),
        )

    def to_json(self, nodes=None):
        return {
            "dims": [int(self.n), int(len(self.rows))],
            "nodes": nodes,
            "rows": self.rows.tolist(),
            "cols": self.cols.tolist(),
            "degree": self.degree.tolist(),
            "E": self.E.tolist(),
            "W_adj": self.W_adj.tolist(),
            "b": self.b.tolist(),
            "sign": self.sign,
            "activation": self.activation,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, d):
        n, nnz = d["dims"]
        p = cls(
            np.asarray(d["E"], dtype=float).reshape(n, n),
            np.asarray(d["W_adj"], dtype=float).reshape(n, nnz),
            np.asarray(d["b"], dtype=float).reshape(n),
            np.asarray(d["rows"], dtype=int),
            np.asarray(d["cols"], dtype=int),
            np.asarray(d["degree"], dtype=float),
            float(d.get("sign", 1.0)),
            d.get("activation", "identity"),
            dict(d.get("meta", {})),
        )
        return p

    def save(self, path, nodes=None):
        with open(path, "w") as fh:
            json.dump(self.to_json(nodes), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def check_graph(self, graph):
        mask, deg = structure(graph)
        rows, cols = np.nonzero(mask)
        if graph.n_nodes != self.n or not (
            np.array_equal(rows, self.rows) and np.array_equal(cols, self.cols)
        ):
            raise ValueError("parameters were trained on a different motif graph")


# ---------------------------------------------------------------------------
# core maths


def memory_update(c, p, t):
    """Running mean: after t previous positions, fold in position p."""
    return (t / (t + 1.0)) * c + (1.0 / (t + 1.0)) * p


def _act(z, kind):
    if kind == "identity":
        return z, np.ones_like(z)
    if kind == "tanh":
        a = np.tanh(z)
        return a, 1.0 - a * a
    raise ValueError(f"unknown activation {kind!r}")


def weight_values(params, c):
    """Masked-entry values of W_hat plus what backprop needs."""
    z = c @ params.W_adj
    a, da = _act(z, params.activation)
    vals = params.E[params.rows, params.cols] + a + params.b[params.rows]
    return vals, da


def effective_weights(params, c):
    """Dense W_hat for memory vector ``c`` (zero outside the mask)."""
    vals, _ = weight_values(params, c)
    W = np.zeros((params.n, params.n))
    W[params.rows, params.cols] = vals
    return W


def diffusion_step(x, W, D, sign=1.0):
    """x + s * (D - W) x with D given as the diagonal vector or a matrix."""
    D = np.asarray(D)
    Dx = D @ x if D.ndim == 2 else D * x
    return x + sign * (Dx - W @ x)


def _push(params, vals, x):
    Wx = np.zeros(params.n)
    np.add.at(Wx, params.rows, vals * x[params.cols])
    return x + params.sign * (params.degree * x - Wx)


def _pull(params, vals, g):
    """Transpose of the step map applied to g (gradient w.r.t. the input mass)."""
    WTg = np.zeros(params.n)
    np.add.at(WTg, params.cols, vals * g[params.rows])
    return g + params.sign * (params.degree * g - WTg)


# ---------------------------------------------------------------------------
# training targets


def forcing_targets(traj, n, steps=None):
    """One-hot positions of the trajectory, wrapping around when it ends."""
    T = max(len(traj) - 1, 1) if steps is None else steps
    P = np.zeros((T + 1, n))
    for t in range(T + 1):
        P[t, traj[t % len(traj)]] = 1.0
    return P


def split_targets(root, children, n, steps):
    """Mass starts at the root and splits equally over each node's children."""
    P = np.zeros((steps + 1, n))
    P[0, root] = 1.0
    for t in range(steps):
        for j in range(n):
            kids = children.get(j)
            if kids and P[t, j]:
                share = P[t, j] / len(kids)
                for i in kids:
                    P[t + 1, i] += share
    return P


def _dag_tree_depth(dag):
    depth = [0] * len(dag)
    for i in range(1, len(dag)):
        depth[i] = depth[dag.parent[i]] + 1
    return max(depth)


def walk_targets(dag, graph, strategy="forcing", steps=None, closed=False):
    """Target position matrix (T+1, n) for one walk."""
    n = graph.n_nodes
    idx = [graph.node_index[nm] for nm in dag.names]
    if strategy == "forcing":
        traj = [idx[i] for i in dfs_walk(dag, closed)]
        return forcing_targets(traj, n, steps)
    if strategy == "split":
        T = max(_dag_tree_depth(dag), 1) if steps is None else steps
        children = {}
        for i in range(1, len(dag)):
            children.setdefault(idx[dag.parent[i]], []).append(idx[i])
        return split_targets(idx[0], children, n, T)
    raise ValueError(f"unknown strategy {strategy!r}")


# ---------------------------------------------------------------------------
# loss and gradients


def trajectory_loss(params, P):
    """Mean over steps of MSE(x_{t+1}, p_{t+1}) with x carried forward from p_0."""
    n = params.n
    T = P.shape[0] - 1
    x = P[0].copy()
    c = np.zeros(n)
    total = 0.0
    for t in range(T):
        c = memory_update(c, P[t], t)
        vals, _ = weight_values(params, c)
        x = _push(params, vals, x)
        total += np.mean((x - P[t + 1]) ** 2)
    return total / T


def _backprop(params, gx, t, xs, cs, vals_l, das, grads):
    """Push dL/dx_{t+1} back through steps t..0, accumulating parameter gradients."""
    gE, gW, gb = grads
    for k in range(t, -1, -1):
        # d x_{k+1} / d W_hat[i, j] = -s * x_k[j] at row i
        gvals = -params.sign * gx[params.rows] * xs[k][params.cols]
        _accumulate(params, gvals, das[k], cs[k], gE, gW, gb)
        gx = _pull(params, vals_l[k], gx)


def _zeros_like(params):
    return np.zeros_like(params.E), np.zeros_like(params.W_adj), np.zeros_like(params.b)


def trajectory_grad(params, P):
    """Loss and exact gradients (E, W_adj, b) of ``trajectory_loss``."""
    n = params.n
    T = P.shape[0] - 1
    xs = [P[0].copy()]
    cs, vals_l, das = [], [], []
    c = np.zeros(n)
    total = 0.0
    for t in range(T):
        c = memory_update(c, P[t], t)
        vals, da = weight_values(params, c)
        xs.append(_push(params, vals, xs[-1]))
        total += np.mean((xs[-1] - P[t + 1]) ** 2)
        cs.append(c)
        vals_l.append(vals)
        das.append(da)
    grads = _zeros_like(params)
    gx = np.zeros(n)
    for t in range(T - 1, -1, -1):
        gx = gx + 2.0 * (xs[t + 1] - P[t + 1]) / (n * T)
        gvals = -params.sign * gx[params.rows] * xs[t][params.cols]
        _accumulate(params, gvals, das[t], cs[t], *grads)
        gx = _pull(params, vals_l[t], gx)
    return total / T, grads


def step_loss(params, P, t):
    """MSE(x_{t+1}, p_{t+1}) with x carried forward from p_0 under fixed parameters."""
    n = params.n
    x = P[0].copy()
    c = np.zeros(n)
    for k in range(t + 1):
        c = memory_update(c, P[k], k)
        vals, _ = weight_values(params, c)
        x = _push(params, vals, x)
    return np.mean((x - P[t + 1]) ** 2)


def step_grad(params, P, t):
    """Loss of step t and its exact gradient through all earlier steps."""
    n = params.n
    xs = [P[0].copy()]
    cs, vals_l, das = [], [], []
    c = np.zeros(n)
    for k in range(t + 1):
        c = memory_update(c, P[k], k)
        vals, da = weight_values(params, c)
        xs.append(_push(params, vals, xs[-1]))
        cs.append(c)
        vals_l.append(vals)
        das.append(da)
    loss = np.mean((xs[-1] - P[t + 1]) ** 2)
    grads = _zeros_like(params)
    _backprop(params, 2.0 * (xs[-1] - P[t + 1]) / n, t, xs, cs, vals_l, das, grads)
    return loss, grads


def _accumulate(params, gvals, da, c, gE, gW, gb):
    np.add.at(gE, (params.rows, params.cols), gvals)
    np.add.at(gb, params.rows, gvals)
    gW += np.outer(c, gvals * da)


class Adam:
    def __init__(self, shapes, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / b1t) / (np.sqrt(self.v[k] / b2t) + self.eps)


@dataclass
class TrainConfig:
    strategy: str = "forcing"
    epochs: int = 200
    lr: float = 1e-3
    seed: int = 0
    sign: float = 1.0
    mode: str = "step"  # "step": update after every step; "trajectory": once per walk
    activation: str = "identity"
    steps: int | None = None
    closed: bool = False
    init_std: float = 0.1

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        if "sign_convention" in d:
            conv = d.pop("sign_convention")
            d["sign"] = {"plus": 1.0, "heat": -1.0, "minus": -1.0}.get(conv, conv)
        fields = cls.__dataclass_fields__
        unknown = set(d) - set(fields)
        if unknown:
            raise ValueError(f"unknown training options {sorted(unknown)}")
        return cls(**d)


def train(dags, graph, cfg=None, params=None):
    """Fit grammar parameters to a corpus of walks; returns (params, epoch-mean losses)."""
    cfg = cfg or TrainConfig()
    for d in dags:
        for nm in d.names:
            if nm not in graph.node_index:
                raise ValueError(f"walk node {nm} is not in the motif graph")
    if params is None:
        params = GrammarParams.init(graph, cfg.seed, cfg.init_std, cfg.sign, cfg.activation)
    targets = [walk_targets(d, graph, cfg.strategy, cfg.steps, cfg.closed) for d in dags]
    longest = max((len(dfs_walk(d, cfg.closed)) for d in dags), default=1)
    params.meta.update({"max_steps": 2 * longest, "closed": cfg.closed, "strategy": cfg.strategy})
    opt = Adam([params.E.shape, params.W_adj.shape, params.b.shape], lr=cfg.lr)
    tensors = [params.E, params.W_adj, params.b]
    trace = []
    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(targets))
        losses = []
        for k in order:
            P = targets[k]
            if cfg.mode == "trajectory":
                loss, grads = trajectory_grad(params, P)
                opt.step(tensors, grads)
                losses.extend([loss] * (P.shape[0] - 1))
                continue
            # per-step updates; each step's gradient runs back through the
            # whole walk so far, using the weights that produced each step
            xs = [P[0].copy()]
            cs, vals_l, das = [], [], []
            c = np.zeros(params.n)
            for t in range(P.shape[0] - 1):
                c = memory_update(c, P[t], t)
                vals, da = weight_values(params, c)
                xs.append(_push(params, vals, xs[-1]))
                cs.append(c)
                vals_l.append(vals)
                das.append(da)
                losses.append(np.mean((xs[-1] - P[t + 1]) ** 2))
                grads = _zeros_like(params)
                _backprop(params, 2.0 * (xs[-1] - P[t + 1]) / params.n, t, xs, cs, vals_l, das, grads)
                opt.step(tensors, grads)
        trace.append(float(np.mean(losses)) if losses else 0.0)
    return params, trace


# ---------------------------------------------------------------------------
# generation


def transition_distribution(values, mask):
    """Clamp negatives, restrict to the mask and normalize (uniform if no mass)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty mask")
    v = np.where(mask, np.clip(values, 0.0, None), 0.0)
    s = v.sum()
    if not np.isfinite(s) or s < MASS_FLOOR:
        v = mask.astype(float)
        s = v.sum()
    elif not np.all(np.isfinite(v)):
        v = np.where(np.isinf(v), 1.0, 0.0)
        s = v.sum()
    return v / s


class WalkState:
    """Partial molecule, its walk so far, and the diffusion state."""

    def __init__(self, params, graph, root_node, loop_back=False):
        self.params = params
        self.graph = graph
        self.loop_back = loop_back
        self.asm = Assembly(graph)
        self.dag = WalkDag()
        base = graph.node_base[root_node]
        self.dag.add(graph.nodes[root_node], None, True)
        self.node_of = [root_node]  # dag node -> graph node
        self.inst = [self.asm.start(base)]  # dag node -> assembly instance
        self.used = {base: 1}
        self.cursor = 0
        self.t = 0
        n = graph.n_nodes
        self.x = np.zeros(n)
        self.x[root_node] = 1.0
        self.c = np.zeros(n)
        self.done = False
        self.closed_ok = False

    def copy(self):
        new = WalkState.__new__(WalkState)
        new.params, new.graph, new.loop_back = self.params, self.graph, self.loop_back
        new.asm = self.asm.copy()
        new.dag = self.dag.copy()
        new.node_of = list(self.node_of)
        new.inst = list(self.inst)
        new.used = dict(self.used)
        new.cursor, new.t = self.cursor, self.t
        new.x, new.c = self.x.copy(), self.c.copy()
        new.done, new.closed_ok = self.done, self.closed_ok
        return new

    def next_copy(self, base):
        copies = self.graph.copies[base]
        k = self.used.get(base, 0)
        return copies[k] if k < len(copies) else None

    def masks(self):
        """(attach mask, return mask, feasible edges per attachable node)."""
        g = self.graph
        n = g.n_nodes
        attach = np.zeros(n, dtype=bool)
        ret = np.zeros(n, dtype=bool)
        options = {}
        cur = self.node_of[self.cursor]
        inst = self.inst[self.cursor]
        targets = sorted({d for d, _ in g.out_edges[cur]})
        for d in targets:
            base = g.node_base[d]
            nxt = self.next_copy(base)
            if nxt is None or nxt in options:
                continue
            feas = [
                k
                for k in _edges_from(g, g.node_base[cur], base)
                if self.asm.can_attach(inst, g.edges[k])
            ]
            if feas:
                attach[nxt] = True
                options[nxt] = feas
        parent = self.dag.parent[self.cursor]
        if parent is not None:
            ret[self.node_of[parent]] = True
        if self.loop_back:
            ret[self.node_of[0]] = True
        return attach, ret, options

    def distribution(self):
        """Advance memory and mass one step; returns (probabilities or None, masks)."""
        p = np.zeros(self.graph.n_nodes)
        p[self.node_of[self.cursor]] = 1.0
        c = memory_update(self.c, p, self.t)
        vals, _ = weight_values(self.params, c)
        x = _push(self.params, vals, self.x)
        attach, ret, options = self.masks()
        mask = attach | ret
        if not mask.any():
            return None, c, (attach, ret, options)
        return transition_distribution(x, mask), c, (attach, ret, options)

    def apply(self, node, probs, c, masks, edge_choice):
        """Take the transition to graph node ``node``; returns a transcript entry."""
        attach, ret, options = masks
        self.c = c
        self.x = probs
        self.t += 1
        if self.loop_back and node == self.node_of[0]:
            self.done = True
            self.closed_ok = True
            return ("close", self.graph.nodes[node], None)
        if attach[node]:
            k = edge_choice(options[node])
            parent_dag = self.cursor
            child_inst = self.asm.attach(self.inst[parent_dag], self.graph.edges[k], check=False)
            base = self.graph.node_base[node]
            self.used[base] = self.used.get(base, 0) + 1
            self.cursor = self.dag.add(self.graph.nodes[node], parent_dag, False, k)
            self.node_of.append(node)
            self.inst.append(child_inst)
            return ("attach", self.graph.nodes[node], k)
        if ret[node]:
            self.cursor = self.dag.parent[self.cursor]
            return ("return", self.graph.nodes[node], None)
        raise ValueError(f"node {self.graph.nodes[node]} is outside the mask")

    def walk_dag(self):
        """Walk with main flags on the root-to-cursor path."""
        d = self.dag.copy()
        d.main = [False] * len(d)
        i = self.cursor
        while i is not None:
            d.main[i] = True
            i = d.parent[i]
        return d

    def walk_string(self):
        return print_walk(self.walk_dag(), canonical=False)


def _edges_from(graph, u, v):
    from .walks import graph_out_edges

    return graph_out_edges(graph, u, v)


@dataclass
class GenerationResult:
    molecule: object
    walk: WalkDag
    valid: bool
    transcript: list


def generate(params, graph, loop_back=False, max_steps=None, seed=0, start=None, rng=None):
    """Sample one molecule by a masked random walk."""
    rng = np.random.default_rng(seed) if rng is None else rng
    if graph.n_nodes == 0:
        raise ValueError("empty motif graph")
    if max_steps is None:
        max_steps = int(params.meta.get("max_steps", 2 * graph.n_nodes))
    if start is None:
        roots = list(range(len(graph.motifs)))
        root = graph.copies[roots[int(rng.integers(len(roots)))]][0]
    else:
        root = graph.node_index[start] if isinstance(start, str) else int(start)
    state = WalkState(params, graph, root, loop_back)
    transcript = [("start", graph.nodes[root], None)]
    for _ in range(max_steps):
        probs, c, masks = state.distribution()
        if probs is None:
            break
        node = int(rng.choice(len(probs), p=probs))
        transcript.append(state.apply(node, probs, c, masks, lambda ks: ks[int(rng.integers(len(ks)))]))
        if state.done:
            break
    mol = state.asm.molecule()
    valid = not validate_valence(mol)
    if loop_back:
        valid = valid and state.closed_ok
    return GenerationResult(mol, state.walk_dag(), valid, transcript)


# ---------------------------------------------------------------------------
# hard rules


@dataclass
class HardRule:
    lhs: list  # top-level walk steps
    rhs: list
    probability: float

    def to_json(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "probability": self.probability}


def _first(ks):
    return ks[0]


def extract_hard_rules(params, graph, theta_min=0.05, max_states=2000, max_depth=8, loop_back=False):
    """Best-first search for contexts whose next transition is forced.

    Every base motif seeds a search; states are expanded in order of
    trajectory probability and only through transitions of probability at
    least ``theta_min``.  A rule is emitted when one transition carries all
    the mass (within 1e-9).
    """
    if not 0 < theta_min < 1:
        raise ValueError("theta_min must lie in (0, 1)")
    rules = []
    seen_rules = set()
    counter = 0
    heap = []
    for b in range(len(graph.motifs)):
        st = WalkState(params, graph, graph.copies[b][0], loop_back)
        heap.append((-1.0, counter, 0, st))
        counter += 1
    heapq.heapify(heap)
    expanded = 0
    while heap and expanded < max_states:
        negp, _, depth, st = heapq.heappop(heap)
        expanded += 1
        probs, c, masks = st.distribution()
        if probs is None:
            continue
        top = int(np.argmax(probs))
        if probs[top] >= 1.0 - FORCED_TOL:
            nxt = st.copy()
            lhs = split_top_level(st.walk_string())
            nxt.apply(top, probs, c, masks, _first)
            rhs = split_top_level(nxt.walk_string())
            key = (tuple(lhs), tuple(rhs))
            if key not in seen_rules:
                seen_rules.add(key)
                rules.append(HardRule(lhs, rhs, float(probs[top])))
        if depth >= max_depth:
            continue
        for node in np.flatnonzero(probs >= theta_min):
            nxt = st.copy()
            nxt.apply(int(node), probs, c, masks, _first)
            if nxt.done:
                continue
            heapq.heappush(heap, (negp * float(probs[node]), counter, depth + 1, nxt))
            counter += 1
    return rules


def replay_rule(params, graph, rule, loop_back=False):
    """Probability the model gives the rule's forced step after replaying its context.

    Returns ``(probability, largest competing probability, rhs produced)``.
    """
    lhs_dag = parse_walk("->".join(rule.lhs), graph)
    st = WalkState(params, graph, graph.node_index[lhs_dag.names[0]], loop_back)
    traj = dfs_walk(lhs_dag, canonical=False)
    node_to_state = {0: 0}
    for a, b in zip(traj, traj[1:]):
        probs, c, masks = st.distribution()
        target = graph.node_index[lhs_dag.names[b]]
        if probs is None or probs[target] <= 0:
            raise ValueError("rule context cannot be replayed under the model")
        st.apply(target, probs, c, masks, _first)
        node_to_state[b] = st.cursor
    probs, c, masks = st.distribution()
    if probs is None:
        raise ValueError("rule context has no continuation")
    rhs_text = "->".join(rule.rhs)
    best = None
    for node in np.flatnonzero(probs > 0):
        nxt = st.copy()
        nxt.apply(int(node), probs, c, masks, _first)
        if split_top_level(nxt.walk_string()) == split_top_level(rhs_text):
            best = int(node)
            break
    if best is None:
        raise ValueError("rule right-hand side is not reachable in one step")
    others = np.delete(probs, best)
    return float(probs[best]), float(others.max()) if others.size else 0.0, rhs_text


def rules_to_jsonl(rules):
    return "".join(json.dumps(r.to_json()) + "\n" for r in rules)


def rules_from_jsonl(text):
    out = []
    for line in text.splitlines():
        if line.strip():
            d = json.loads(line)
            out.append(HardRule(list(d["lhs"]), list(d["rhs"]), float(d["probability"])))
    return out


def base_of(graph, name):
    return graph.motif_index[split_name(name)[0]]
