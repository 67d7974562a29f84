"""Triangle meshes carrying a discrete conformal structure.

A :class:`TriMesh` is a closed oriented triangulated surface.  Each edge has a
positive length (the input conformal model, usually a flat metric) and each
vertex a conformal factor ``u``.  Cusp vertices are punctures; they carry no
conformal factor of their own.  Named loops are closed paths in the dual graph
given as triangle sequences; they define the marking used for holonomy.

The ASCII format is line oriented::

    graftlab-mesh 1
    vertices V
    <index> <cusp 0|1> <x> <y> <u>
    triangles F
    <index> <v0> <v1> <v2>
    edges E
    <index> <v0> <v1> <length>
    loop <name> <n> <t0> <t1> ... <tn-1>
    meta <key> <json value>
    end
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_TAG = "graftlab-mesh 1"


class MeshError(ValueError):
    """Raised for malformed meshes (open boundary, inconsistent lengths, bad loops)."""


@dataclass
class TriMesh:
    triangles: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    tri_edges: np.ndarray
    cusp: np.ndarray
    u: np.ndarray
    positions: np.ndarray
    loops: dict[str, list[int]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._adjacency = None

    @property
    def n_vertices(self) -> int:
        return len(self.cusp)

    @property
    def n_faces(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def euler_characteristic(self) -> int:
        """Euler characteristic of the punctured surface (cusps removed)."""
        return self.n_vertices - self.n_edges + self.n_faces - int(self.cusp.sum())

    @classmethod
    def from_lifted(
        cls,
        triangles,
        corners,
        cusp,
        positions=None,
        loops=None,
        meta=None,
        tol: float = 1e-9,
    ) -> "TriMesh":
        """Build a mesh from triangles given with developed corner positions.

        ``corners[f, k]`` is the position of local vertex ``k`` of face ``f`` in
        some flat chart (complex number).  Edge lengths are read off the corner
        differences and must agree between the two faces sharing an edge.
        """
        tris = np.asarray(triangles, dtype=np.int64)
        corners = np.asarray(corners, dtype=complex)
        area2 = np.imag(np.conj(corners[:, 1] - corners[:, 0]) * (corners[:, 2] - corners[:, 0]))
        if np.any(area2 <= 0):
            bad = int(np.argmin(area2))
            raise MeshError(f"face {bad} is not counterclockwise")
        # local edge k is opposite local vertex k
        loc = np.stack(
            [np.abs(corners[:, 2] - corners[:, 1]), np.abs(corners[:, 0] - corners[:, 2]), np.abs(corners[:, 1] - corners[:, 0])],
            axis=1,
        )
        return cls.from_face_lengths(tris, loc, cusp, positions, loops, meta, tol)

    @classmethod
    def from_face_lengths(
        cls,
        triangles,
        face_lengths,
        cusp,
        positions=None,
        loops=None,
        meta=None,
        tol: float = 1e-9,
    ) -> "TriMesh":
        """Build a mesh from per-face edge lengths.

        ``face_lengths[f, k]`` is the length of the edge of face ``f`` opposite
        its local vertex ``k``; the two faces on an edge must agree to ``tol``.
        """
        tris = np.asarray(triangles, dtype=np.int64)
        loc = np.asarray(face_lengths, dtype=float)
        cusp = np.asarray(cusp, dtype=bool)
        if np.any(~(loc > 0)):
            raise MeshError("edge lengths must be positive")
        edge_index: dict[tuple[int, int], int] = {}
        edges: list[tuple[int, int]] = []
        lengths: list[float] = []
        uses: list[int] = []
        tri_edges = np.empty_like(tris)
        for f, (a, b, c) in enumerate(tris):
            for k, (p, q) in enumerate(((b, c), (c, a), (a, b))):
                key = (min(p, q), max(p, q))
                if p == q:
                    raise MeshError(f"face {f} has a repeated vertex")
                e = edge_index.get(key)
                if e is None:
                    e = len(edges)
                    edge_index[key] = e
                    edges.append(key)
                    lengths.append(loc[f, k])
                    uses.append(0)
                elif abs(lengths[e] - loc[f, k]) > tol * max(1.0, lengths[e]):
                    raise MeshError(f"edge {key} has inconsistent lengths {lengths[e]} vs {loc[f, k]}")
                uses[e] += 1
                tri_edges[f, k] = e
        if any(n != 2 for n in uses):
            bad = [edges[e] for e, n in enumerate(uses) if n != 2][:5]
            raise MeshError(f"surface is not closed or has repeated edges, e.g. {bad}")
        for e, (p, q) in enumerate(edges):
            if cusp[p] and cusp[q]:
                raise MeshError(f"edge {(p, q)} joins two cusps")
        if positions is None:
            positions = np.full(len(cusp), np.nan + 0j)
        mesh = cls(
            triangles=tris,
            edges=np.array(edges, dtype=np.int64),
            lengths=np.array(lengths),
            tri_edges=tri_edges,
            cusp=cusp,
            u=np.zeros(len(cusp)),
            positions=np.asarray(positions, dtype=complex),
            loops=dict(loops or {}),
            meta=dict(meta or {}),
        )
        for name, path in mesh.loops.items():
            mesh.check_loop(path, name)
        return mesh

    def copy(self) -> "TriMesh":
        return TriMesh(
            triangles=self.triangles.copy(),
            edges=self.edges.copy(),
            lengths=self.lengths.copy(),
            tri_edges=self.tri_edges.copy(),
            cusp=self.cusp.copy(),
            u=self.u.copy(),
            positions=self.positions.copy(),
            loops={k: list(v) for k, v in self.loops.items()},
            meta=dict(self.meta),
        )

    def adjacency(self) -> np.ndarray:
        """``adj[f, k] = (g, j)``: face across local edge k of f, and its local edge index."""
        if self._adjacency is None:
            owner: dict[int, list[tuple[int, int]]] = {}
            for f in range(self.n_faces):
                for k in range(3):
                    owner.setdefault(int(self.tri_edges[f, k]), []).append((f, k))
            adj = np.empty((self.n_faces, 3, 2), dtype=np.int64)
            for pair in owner.values():
                (f, k), (g, j) = pair
                adj[f, k] = (g, j)
                adj[g, j] = (f, k)
            self._adjacency = adj
        return self._adjacency

    def shared_edge(self, f: int, g: int) -> int:
        """Local index in f of the edge shared with face g."""
        adj = self.adjacency()
        hits = [k for k in range(3) if adj[f, k, 0] == g]
        if len(hits) != 1:
            raise MeshError(f"faces {f} and {g} are not adjacent across a single edge")
        return hits[0]

    def check_loop(self, path, name: str = "loop") -> None:
        if len(path) < 2:
            raise MeshError(f"{name}: a dual loop needs at least two faces")
        for f, g in zip(path, list(path[1:]) + [path[0]]):
            try:
                self.shared_edge(int(f), int(g))
            except MeshError as exc:
                raise MeshError(f"{name}: {exc}") from None

    def vertex_valence(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    # ASCII IO ---------------------------------------------------------

    def dumps(self) -> str:
        out = [FORMAT_TAG, f"vertices {self.n_vertices}"]
        for v in range(self.n_vertices):
            p = complex(self.positions[v])
            out.append(f"{v} {int(self.cusp[v])} {p.real!r} {p.imag!r} {float(self.u[v])!r}")
        out.append(f"triangles {self.n_faces}")
        for f, (a, b, c) in enumerate(self.triangles):
            out.append(f"{f} {a} {b} {c}")
        out.append(f"edges {self.n_edges}")
        for e, (a, b) in enumerate(self.edges):
            out.append(f"{e} {a} {b} {float(self.lengths[e])!r}")
        for name, path in self.loops.items():
            out.append(f"loop {name} {len(path)} " + " ".join(str(int(f)) for f in path))
        for key, val in self.meta.items():
            out.append(f"meta {key} {json.dumps(val)}")
        out.append("end")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "TriMesh":
        lines = iter(text.splitlines())
        if next(lines).strip() != FORMAT_TAG:
            raise MeshError("not a graftlab mesh file")

        def header(word):
            head = next(lines).split()
            if head[0] != word:
                raise MeshError(f"expected '{word}' section, got {head[0]!r}")
            return int(head[1])

        nv = header("vertices")
        cusp = np.zeros(nv, dtype=bool)
        pos = np.zeros(nv, dtype=complex)
        u = np.zeros(nv)
        for _ in range(nv):
            i, c, x, y, uu = next(lines).split()
            i = int(i)
            cusp[i], pos[i], u[i] = bool(int(c)), complex(float(x), float(y)), float(uu)
        nf = header("triangles")
        tris = np.zeros((nf, 3), dtype=np.int64)
        for _ in range(nf):
            i, a, b, c = map(int, next(lines).split())
            tris[i] = (a, b, c)
        ne = header("edges")
        edges = np.zeros((ne, 2), dtype=np.int64)
        lengths = np.zeros(ne)
        for _ in range(ne):
            i, a, b, ln = next(lines).split()
            edges[int(i)] = (int(a), int(b))
            lengths[int(i)] = float(ln)
        loops: dict[str, list[int]] = {}
        meta: dict = {}
        for line in lines:
            if line.startswith("loop "):
                parts = line.split()
                loops[parts[1]] = [int(x) for x in parts[3:]]
            elif line.startswith("meta "):
                _, key, val = line.split(" ", 2)
                meta[key] = json.loads(val)
            elif line.strip() == "end":
                break
        index = {(int(a), int(b)): e for e, (a, b) in enumerate(edges)}
        tri_edges = np.empty_like(tris)
        for f, (a, b, c) in enumerate(tris):
            for k, (p, q) in enumerate(((b, c), (c, a), (a, b))):
                key = (min(p, q), max(p, q))
                if key not in index:
                    raise MeshError(f"face {f} uses edge {key} missing from the edge table")
                tri_edges[f, k] = index[key]
        mesh = cls(tris, edges, lengths, tri_edges, cusp, u, pos, loops, meta)
        for name, path in loops.items():
            mesh.check_loop(path, name)
        return mesh

    @classmethod
    def load(cls, path) -> "TriMesh":
        return cls.loads(Path(path).read_text())
