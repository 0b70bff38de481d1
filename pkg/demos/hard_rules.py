"""Reading a trained grammar as rewrite rules.

A rule is a walk prefix (lhs) after which the next step is forced (rhs).
Rules are printed in walk notation, where "A[->B]" means: go to B and come
back to A.
"""
from importlib import resources

from motifwalk import grammar as gm
from motifwalk.fragment import load_annotations
from motifwalk.pipeline import build_from_annotations

path = resources.files("motifwalk") / "data" / "toy_annotations.json"
graph, corpus = build_from_annotations(load_annotations(str(path)))
for m in graph.motifs:
    print(f"{m.id}: {len(m.graph)} atoms, red groups {len(m.red_groups)}")

params, _ = gm.train(corpus.dags, graph, gm.TrainConfig(epochs=30, lr=1e-2))
rules = gm.extract_hard_rules(params, graph, theta_min=0.05)
print(f"\n{len(rules)} forced transitions; the first 10:")
for r in rules[:10]:
    prob, _, _ = gm.replay_rule(params, graph, r)
    print(f"  {'->'.join(r.lhs):30s} => {'->'.join(r.rhs):12s} (prefix p={r.probability:.3f}, forced {prob:.3f})")
