"""Graded finite-volume meshes on the interval and the radial disk."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dul.geometry import INTERVAL

MIN_NODES = 16


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Cell-centred mesh: ``nodes`` inside the open domain, ``faces`` between them.

    ``faces[0]`` and ``faces[-1]`` lie on the domain boundary (the disk centre
    for ``faces[0]`` in the radial case).  ``volumes`` and ``areas`` carry the
    n-dimensional metric (cell volume and face area per unit solid angle);
    both are plain lengths/ones on the interval.
    """

    geom: object
    nodes: np.ndarray
    faces: np.ndarray
    grading: float

    @property
    def size(self):
        return self.nodes.size

    @property
    def distance(self):
        return self.geom.distance(self.nodes)

    @property
    def spacing(self):
        return np.diff(self.nodes)

    def areas(self, positions=None):
        f = self.faces if positions is None else np.asarray(positions, dtype=float)
        if self.geom.kind == INTERVAL:
            return np.ones_like(f)
        return f ** (self.geom.n - 1)

    @property
    def volumes(self):
        f = self.faces
        if self.geom.kind == INTERVAL:
            return np.diff(f)
        n = self.geom.n
        return np.diff(f**n) / n

    @property
    def measure_weights(self):
        """Cell measures in the geometry's n-dimensional volume (solid angle included)."""
        return self.volumes * self.geom.sphere_area()


def _graded(m, grading):
    xi = (np.arange(m) + 0.5) / m
    return xi**grading


def build_mesh(geom, n_nodes, grading=2.0):
    """Mesh clustered at the boundary by the law ``d ~ xi**grading``.

    Interval meshes use ``n_nodes/2`` nodes per half mirrored about the
    midpoint, so neither the endpoints nor the ridge are ever nodes.  Disk
    meshes place ``r = R (1 - (1 - xi)**grading)``.
    """
    if int(n_nodes) != n_nodes or n_nodes < MIN_NODES:
        raise MeshError(f"n_nodes must be an integer >= {MIN_NODES}")
    if not np.isfinite(grading) or grading < 1:
        raise MeshError("grading exponent must be >= 1")
    n_nodes = int(n_nodes)
    if geom.kind == INTERVAL:
        if n_nodes % 2:
            raise MeshError("interval meshes need an even node count")
        H = geom.half_width
        left = geom.x_lo + H * _graded(n_nodes // 2, grading)
        nodes = np.concatenate([left, (geom.x_lo + geom.x_hi) - left[::-1]])
        lo, hi = geom.x_lo, geom.x_hi
    else:
        xi = (np.arange(n_nodes) + 0.5) / n_nodes
        nodes = geom.R * (1.0 - (1.0 - xi) ** grading)
        lo, hi = 0.0, geom.R
    faces = np.concatenate([[lo], 0.5 * (nodes[1:] + nodes[:-1]), [hi]])
    if np.any(np.diff(nodes) <= 0):
        raise MeshError("mesh nodes are not strictly increasing; lower the node count or grading")
    return Mesh1D(geom, nodes, faces, float(grading))
