"""From annotated molecules to new molecules.

Builds the motif graph for the bundled synthetic set, shows a few molecules
as walks over it, trains the grammar briefly and samples new molecules.
"""
import json
from importlib import resources

import numpy as np

from motifwalk import evalkit as ek
from motifwalk import grammar as gm
from motifwalk.fragment import annotation_from_record
from motifwalk.molgraph import canonical_smiles
from motifwalk.pipeline import build_from_annotations
from motifwalk.walks import euler_linearize, print_walk

path = resources.files("motifwalk") / "data" / "synthetic_annotations.json"
records = json.loads(path.read_text())
graph, corpus = build_from_annotations([annotation_from_record(r) for r in records])
print(f"{len(records)} molecules -> {len(graph.motifs)} motifs")
print(f"base graph (|V|,|E|) = {graph.base().size()}, with duplicates {graph.size()}")

print("\nmolecules as walks:")
for mol, dag in list(zip(corpus.molecules, corpus.dags))[10:14]:
    print(f"  {canonical_smiles(mol):45s} {print_walk(dag)}")
    print(f"  {'':45s} visits {' '.join(euler_linearize(dag).names)}")

params, losses = gm.train(corpus.dags, graph, gm.TrainConfig(epochs=20))
print(f"\ntraining loss {losses[0]:.3g} -> {losses[-1]:.3g} over {len(losses)} epochs")

rng = np.random.default_rng(0)
samples = [gm.generate(params, graph, rng=rng) for _ in range(200)]
print("\nsome samples:")
for r in samples[:5]:
    print(f"  {canonical_smiles(r.molecule):45s} {print_walk(r.walk)}")

report = ek.evaluate_generations([r.molecule for r in samples], corpus.molecules,
                                 ek.DEFAULT_MEMBERSHIP["hopv"])
print("\n" + json.dumps(report.to_json(), indent=1, sort_keys=True))
