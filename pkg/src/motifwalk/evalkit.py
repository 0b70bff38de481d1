"""Generation metrics and a motif-count property predictor."""
from dataclasses import dataclass

import numpy as np

from .isomorph import iter_matches
from .molgraph import FP_BITS, canonical_key, morgan_fingerprint, parse_smiles, validate_valence
from .walks import split_name

DEFAULT_MEMBERSHIP = {
    "hopv": ["c1ccsc1"],
    "ptc": ["ClC", "BrCC"],
}


# ---------------------------------------------------------------------------
# generation metrics


@dataclass
class GenerationReport:
    total: int
    valid: float
    unique: float
    novel: float
    diversity: float
    membership: float
    n_valid: int
    n_unique: int
    n_novel: int
    n_member: int

    def to_json(self):
        return {
            "total": self.total,
            "valid": self.valid,
            "unique": self.unique,
            "novel": self.novel,
            "diversity": self.diversity,
            "rs": None,
            "membership": self.membership,
            "counts": {
                "valid": self.n_valid,
                "unique": self.n_unique,
                "novel": self.n_novel,
                "member": self.n_member,
            },
        }


def fingerprint_matrix(mols, radius=2):
    return np.array([morgan_fingerprint(m, radius) for m in mols], dtype=bool).reshape(len(mols), FP_BITS)


def mean_pairwise_distance(fps):
    """Mean of 1 - Tanimoto over unordered pairs (0 for fewer than two)."""
    n = len(fps)
    if n < 2:
        return 0.0
    f = fps.astype(np.int64)
    inter = f @ f.T
    counts = f.sum(axis=1)
    union = counts[:, None] + counts[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(union == 0, 1.0, inter / np.where(union == 0, 1, union))
    iu = np.triu_indices(n, k=1)
    return float(np.mean(1.0 - sim[iu]))


def has_pattern(mol, patterns):
    return any(next(iter_matches(mol, p), None) is not None for p in patterns)


def evaluate_generations(generated, training, membership=None, radius=2):
    """Validity, uniqueness, novelty, diversity and membership of generated molecules.

    ``membership`` is a list of SMILES patterns (or parsed graphs); a
    molecule is a member when any pattern occurs as an induced substructure.
    """
    generated = list(generated)
    if not generated:
        raise ValueError("no generated molecules to evaluate")
    total = len(generated)
    n_valid = sum(1 for m in generated if not validate_valence(m))
    keys = [canonical_key(m) for m in generated]
    train_keys = {canonical_key(m) for m in training}
    n_unique = len(set(keys))
    n_novel = sum(1 for k in keys if k not in train_keys)
    patterns = [parse_smiles(p) if isinstance(p, str) else p for p in (membership or [])]
    n_member = sum(1 for m in generated if has_pattern(m, patterns)) if patterns else 0
    div = mean_pairwise_distance(fingerprint_matrix(generated, radius))
    return GenerationReport(
        total,
        n_valid / total,
        n_unique / total,
        n_novel / total,
        div,
        n_member / total,
        n_valid,
        n_unique,
        n_novel,
        n_member,
    )


# ---------------------------------------------------------------------------
# features


@dataclass
class MotifFeatures:
    counts: np.ndarray
    fp: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.counts.astype(float), self.fp.astype(float)])


def motif_counts(dag, graph):
    counts = np.zeros(len(graph.motifs), dtype=np.int64)
    for name in dag.names:
        counts[graph.motif_index[split_name(name)[0]]] += 1
    return counts


def bag_of_motifs(dag, mol, graph, radius=2):
    """Base-motif occurrence counts (duplicates fold into their base) plus the fingerprint."""
    return MotifFeatures(motif_counts(dag, graph), morgan_fingerprint(mol, radius))


# ---------------------------------------------------------------------------
# gradient-boosted trees


class _Tree:
    """Greedy variance-reduction regression tree stored as flat arrays."""

    def __init__(self, max_depth=10, min_leaf=1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, target, leaf_value):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []
        self._grow(X, target, np.arange(len(target)), 0, leaf_value)
        self.feature = np.array(self.feature)
        self.threshold = np.array(self.threshold)
        self.left = np.array(self.left)
        self.right = np.array(self.right)
        self.value = np.array(self.value)
        return self

    def _new(self):
        for lst in (self.feature, self.threshold, self.left, self.right, self.value):
            lst.append(-1 if lst is not self.threshold and lst is not self.value else 0.0)
        return len(self.feature) - 1

    def _grow(self, X, target, idx, depth, leaf_value):
        node = self._new()
        self.value[node] = leaf_value(idx)
        if depth >= self.max_depth or len(idx) < 2 * self.min_leaf:
            return node
        split = best_split(X[idx], target[idx], self.min_leaf)
        if split is None:
            return node
        f, thr = split
        go_left = X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        left = self._grow(X, target, idx[go_left], depth + 1, leaf_value)
        right = self._grow(X, target, idx[~go_left], depth + 1, leaf_value)
        self.left[node] = left
        self.right[node] = right
        return node

    def predict(self, X):
        out = np.empty(len(X))
        for r in range(len(X)):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if X[r, self.feature[node]] <= self.threshold[node] else self.right[node]
            out[r] = self.value[node]
        return out


def best_split(X, y, min_leaf=1):
    """(feature, threshold) maximizing the drop in squared error, or None.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    m, F = X.shape
    if m < 2:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)
    total = csum[-1]
    k = np.arange(1, m)[:, None]  # left sizes
    left = csum[:-1]
    right = total - left
    # between-group sum of squares; maximizing it minimizes the children's SSE
    gain = left**2 / k + right**2 / (m - k) - total**2 / m
    valid = Xs[1:] > Xs[:-1]
    if min_leaf > 1:
        valid &= (k >= min_leaf) & (m - k >= min_leaf)
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain.T))  # feature-major so lower features win ties
    f, pos = divmod(flat, m - 1)
    if not np.isfinite(gain[pos, f]) or gain[pos, f] <= 1e-12:
        return None
    thr = 0.5 * (Xs[pos, f] + Xs[pos + 1, f])
    return f, thr


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class GBTModel:
    def __init__(self, task, base, lr, trees, loss_trace):
        self.task = task
        self.base = base
        self.lr = lr
        self.trees = trees
        self.loss_trace = loss_trace

    def raw(self, X):
        X = np.asarray(X, dtype=float)
        out = np.full(len(X), self.base)
        for t in self.trees:
            out += self.lr * t.predict(X)
        return out

    def predict(self, X):
        r = self.raw(X)
        return _sigmoid(r) if self.task == "classification" else r


def gbt_fit(X, y, n_estimators=16, max_depth=10, lr=0.3, task="regression", seed=0):
    """Gradient boosting with squared loss (regression) or logistic loss (classification).

    The fit is deterministic; ``seed`` is accepted for interface symmetry
    since no subsampling is done.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise ValueError("need at least two samples")
    trees = []
    trace = []
    if task == "regression":
        base = float(np.mean(y))
        pred = np.full(len(y), base)
        trace.append(float(np.mean((y - pred) ** 2)))
        for _ in range(n_estimators):
            resid = y - pred
            tree = _Tree(max_depth).fit(X, resid, lambda idx, r=resid: float(np.mean(r[idx])))
            pred = pred + lr * tree.predict(X)
            trees.append(tree)
            trace.append(float(np.mean((y - pred) ** 2)))
        return GBTModel(task, base, lr, trees, trace)
    if task == "classification":
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("classification targets must be 0/1")
        p0 = np.clip(np.mean(y), 1e-6, 1 - 1e-6)
        base = float(np.log(p0 / (1 - p0)))
        raw = np.full(len(y), base)
        trace.append(_logloss(y, raw))
        for _ in range(n_estimators):
            p = _sigmoid(raw)
            resid = y - p
            hess = p * (1 - p)

            def leaf(idx, r=resid, h=hess):
                den = float(np.sum(h[idx]))
                return float(np.sum(r[idx])) / max(den, 1e-12)

            tree = _Tree(max_depth).fit(X, resid, leaf)
            raw = raw + lr * tree.predict(X)
            trees.append(tree)
            trace.append(_logloss(y, raw))
        return GBTModel(task, base, lr, trees, trace)
    raise ValueError(f"unknown task {task!r}")


def _logloss(y, raw):
    # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0, computed stably
    z = np.where(y == 1, raw, -raw)
    return float(np.mean(np.logaddexp(0.0, -z)))


# ---------------------------------------------------------------------------
# prediction metrics


def auc_score(scores, labels):
    """Area under the ROC curve from the rank-sum statistic (ties get average ranks)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined for single-class targets")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate_predictions(preds, targets, task="regression"):
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.shape != targets.shape:
        raise ValueError("predictions and targets differ in length")
    if task == "regression":
        mae = float(np.mean(np.abs(preds - targets)))
        # R^2 after standardizing with the target statistics (scale-free)
        mu, sd = targets.mean(), targets.std()
        sd = sd if sd > 0 else 1.0
        t = (targets - mu) / sd
        p = (preds - mu) / sd
        ss_tot = float(np.sum(t**2))
        ss_res = float(np.sum((t - p) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
        return {"mae": mae, "r2": r2}
    if task == "classification":
        acc = float(np.mean((preds >= 0.5) == (targets == 1)))
        return {"accuracy": acc, "auc": auc_score(preds, targets)}
    raise ValueError(f"unknown task {task!r}")


def split_protocol(X, y, task="regression", seeds=(0, 1, 2), test_frac=0.2, **gbt):
    """Random 80/20 split per seed; returns per-seed metrics, mean and std."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    runs = []
    for s in seeds:
        rng = np.random.default_rng(s)
        perm = rng.permutation(len(y))
        n_test = max(1, int(round(test_frac * len(y))))
        test, tr = perm[:n_test], perm[n_test:]
        model = gbt_fit(X[tr], y[tr], task=task, seed=s, **gbt)
        pred = model.predict(X[test])
        runs.append({"seed": int(s), "test": test.tolist(), "pred": pred.tolist(), **evaluate_predictions(pred, y[test], task)})
    keys = [k for k in runs[0] if k not in ("seed", "test", "pred")]
    mean = {k: float(np.mean([r[k] for r in runs])) for k in keys}
    std = {k: float(np.std([r[k] for r in runs])) for k in keys}
    return {"runs": runs, "mean": mean, "std": std}
