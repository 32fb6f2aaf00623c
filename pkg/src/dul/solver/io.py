"""Trajectory export: CSV rows ``(t, x, u)`` and the ``DUL1`` binary snapshot.

Snapshot layout (little-endian)::

    b"DUL1" | uint32 node_count | uint32 level_count
    | node_count doubles (nodes) | level_count doubles (times)
    | level_count * node_count doubles (values, level-major)
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from dul.geometry import INTERVAL
from dul.weighted_norms import SampledField

MAGIC = b"DUL1"
_HEADER = struct.Struct("<4sII")


class SnapshotError(IOError):
    pass


@dataclass(frozen=True, eq=False)
class Snapshot:
    nodes: np.ndarray
    times: np.ndarray
    values: np.ndarray

    def to_field(self, geom):
        """Sampled field with cell measures from midpoint faces and the domain boundary."""
        x = self.nodes
        faces = np.concatenate([[geom.lower], 0.5 * (x[1:] + x[:-1]), [geom.upper]])
        if geom.kind == INTERVAL:
            vols = np.diff(faces)
        else:
            vols = np.diff(faces**geom.n) / geom.n * geom.sphere_area()
        return SampledField(x, self.times, self.values, vols, faces=faces)


def write_snapshot(path, traj):
    nodes = np.ascontiguousarray(traj.mesh.nodes, dtype="<f8")
    times = np.ascontiguousarray(traj.times, dtype="<f8")
    values = np.ascontiguousarray(traj.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, nodes.size, times.size))
        fh.write(nodes.tobytes())
        fh.write(times.tobytes())
        fh.write(values.tobytes())


def read_snapshot(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise SnapshotError(f"{path}: truncated header")
    magic, n, levels = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * (n + levels + n * levels)
    if len(blob) != expected:
        raise SnapshotError(f"{path}: expected {expected} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    nodes = data[:n].copy()
    times = data[n:n + levels].copy()
    values = data[n + levels:].reshape(levels, n).copy()
    return Snapshot(nodes, times, values)


def write_csv(path, traj, every=1):
    """Long-format CSV with header ``t,x,u`` (every ``every``-th level plus the last)."""
    levels = list(range(0, traj.levels, every))
    if levels[-1] != traj.levels - 1:
        levels.append(traj.levels - 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "x", "u"])
        for k in levels:
            t = repr(float(traj.times[k]))
            for x, u in zip(traj.mesh.nodes, traj.values[k]):
                writer.writerow([t, repr(float(x)), repr(float(u))])
