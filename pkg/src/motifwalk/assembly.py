"""Build molecules by attaching motif instances along certified edges."""
from dataclasses import dataclass, field

from .molgraph import MolecularGraph, validate_valence


@dataclass
class Instance:
    motif: int
    atom_map: dict  # motif local black atom -> molecule atom
    consumed: set = field(default_factory=set)  # local red atoms already used up


class AttachError(ValueError):
    pass


class Assembly:
    """A growing molecule plus the motif instances it was assembled from."""

    def __init__(self, graph):
        self.graph = graph  # MotifGraph
        self.atoms = []
        self.bonds = {}
        self.instances = []

    def copy(self):
        new = Assembly(self.graph)
        new.atoms = list(self.atoms)
        new.bonds = dict(self.bonds)
        new.instances = [Instance(i.motif, dict(i.atom_map), set(i.consumed)) for i in self.instances]
        return new

    def _add_black(self, motif_index):
        motif = self.graph.motifs[motif_index]
        amap = {}
        for a in motif.black_atoms:
            amap[a] = len(self.atoms)
            self.atoms.append(motif.graph.atoms[a])
        for i, j, o in motif.graph.bonds:
            if i in amap and j in amap:
                self.bonds[(amap[i], amap[j])] = o
        inst = Instance(motif_index, amap)
        self.instances.append(inst)
        return len(self.instances) - 1

    def start(self, motif_index):
        if self.instances:
            raise AttachError("assembly already started")
        return self._add_black(motif_index)

    def red_available(self, inst, l):
        motif = self.graph.motifs[self.instances[inst].motif]
        return not (motif.red_groups[l] & self.instances[inst].consumed)

    def _new_bonds(self, inst, edge, offset):
        """Molecule bonds formed by ``edge``; new atoms numbered from ``offset``."""
        v = self.graph.motifs[edge.v]
        vmap = {a: offset + k for k, a in enumerate(v.black_atoms)}
        umap = self.instances[inst].atom_map
        return [(umap[a], vmap[x], o) for a, x, o in edge.attach], vmap

    def valence_ok(self, inst, edge):
        """Would attaching ``edge`` at ``inst`` keep every touched atom within valence?"""
        g, touched = self._trial(inst, edge)
        return not validate_valence(g, atoms=touched)

    def _trial(self, inst, edge):
        v = self.graph.motifs[edge.v]
        offset = len(self.atoms)
        new, vmap = self._new_bonds(inst, edge, offset)
        atoms = self.atoms + [v.graph.atoms[a] for a in v.black_atoms]
        bonds = dict(self.bonds)
        for i, j, o in v.graph.bonds:
            if i in vmap and j in vmap:
                bonds[(vmap[i], vmap[j])] = o
        for i, j, o in new:
            key = (min(i, j), max(i, j))
            if key in bonds:
                raise AttachError("attachment would create a parallel bond")
            bonds[key] = o
        g = MolecularGraph(atoms, [(i, j, o) for (i, j), o in bonds.items()])
        touched = {i for i, _, _ in new} | {j for _, j, _ in new}
        return g, touched

    def can_attach(self, inst, edge):
        if edge.u != self.instances[inst].motif:
            return False
        if not self.red_available(inst, edge.l1):
            return False
        try:
            return self.valence_ok(inst, edge)
        except AttachError:
            return False

    def attach(self, inst, edge, check=True):
        """Attach ``edge.v`` to instance ``inst``; returns the new instance index."""
        if edge.u != self.instances[inst].motif:
            raise AttachError("edge source does not match the instance motif")
        if not self.red_available(inst, edge.l1):
            raise AttachError("red group already consumed")
        if check and not self.valence_ok(inst, edge):
            raise AttachError("attachment violates valence")
        new, _ = self._new_bonds(inst, edge, len(self.atoms))
        u = self.graph.motifs[edge.u]
        v = self.graph.motifs[edge.v]
        child = self._add_black(edge.v)
        for i, j, o in new:
            self.bonds[(min(i, j), max(i, j))] = o
        self.instances[inst].consumed |= u.red_groups[edge.l1]
        self.instances[child].consumed |= v.red_groups[edge.l2]
        return child

    def molecule(self):
        return MolecularGraph(self.atoms, [(i, j, o) for (i, j), o in self.bonds.items()])
