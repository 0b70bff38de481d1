"""End-to-end glue: annotations -> motif graph -> walks."""
from dataclasses import dataclass

from .fragment import AnnotationError, fragment_annotation
from .motifgraph import augment, build_motif_graph, dedupe_motifs
from .walks import form_fragment_graph, split_name, traverse_dag


@dataclass
class Corpus:
    ids: list
    molecules: list
    fragmentations: list
    assignments: list
    dags: list


def fragment_all(annotations):
    return [(a.molecule, fragment_annotation(a)) for a in annotations]


def _walks(frags, assignments, base):
    dags = []
    for (parent, frag), assign in zip(frags, assignments):
        fg = form_fragment_graph(parent, frag, assign, base)
        dags.append(traverse_dag(fg, base))
    return dags


def build_from_annotations(annotations, jobs=None):
    """Fragment, dedupe, match every motif pair, extract walks and add duplicates.

    Returns ``(augmented_graph, corpus)``; corpus walks name augmented nodes.
    """
    if not annotations:
        raise AnnotationError("no annotations given")
    frags = fragment_all(annotations)
    motifs, assignments = dedupe_motifs(frags)
    base = build_motif_graph(motifs, jobs=jobs)
    dags = _walks(frags, assignments, base)
    graph = augment(base, [_base_indices(d, base) for d in dags])
    corpus = Corpus(
        [a.molecule_id for a in annotations],
        [a.molecule for a in annotations],
        [f for _, f in frags],
        assignments,
        dags,
    )
    return graph, corpus


def extract_walks(annotations, graph):
    """Walks of annotated molecules over an existing (augmented) motif graph."""
    frags = fragment_all(annotations)
    known = len(graph.motifs)
    motifs, assignments = dedupe_motifs(frags, graph.motifs)
    if len(motifs) > known:
        for ann, assign in zip(annotations, assignments):
            if any(fm.motif >= known for fm in assign):
                raise AnnotationError(f"{ann.molecule_id}: has a motif that is not in the graph")
    dags = _walks(frags, assignments, graph.base())
    for ann, d in zip(annotations, dags):
        missing = [n for n in d.names if n not in graph.node_index]
        if missing:
            raise AnnotationError(
                f"{ann.molecule_id}: walk needs node {missing[0]} which the graph lacks"
            )
    return Corpus(
        [a.molecule_id for a in annotations],
        [a.molecule for a in annotations],
        [f for _, f in frags],
        assignments,
        dags,
    )


def _base_indices(dag, graph):
    return [graph.motif_index[split_name(n)[0]] for n in dag.names]
