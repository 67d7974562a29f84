"""Triangulated models of once-punctured tori built from a marked Fuchsian group.

Given free generators X, Y whose commutator is parabolic, the ideal
quadrilateral with vertices q, Xq, XYq, Yq (q the fixed point of
Y^-1 X^-1 Y X) is a fundamental domain: Y pairs the bottom side [q, Xq]
with the top side and X pairs the left side [q, Yq] with the right side.
The quadrilateral is meshed by a transfinite grid in Klein coordinates whose
top and right boundary samples are the images of the bottom and left ones, so
the grid closes up into a torus with one ideal vertex.

Edge lengths are ``2 sinh(d/2)`` for the hyperbolic distance d, and cusp edges
carry ``exp(B/2)`` for a Busemann function B of an equivariant horocycle.  In
the vertex-scaling model these are exactly the hyperbolic lengths at u = 0, so
the mesh is a discretely exact copy of the surface.
"""

from __future__ import annotations

import math

import numpy as np

from .grafting import walk_to_faces
from .hyp_core import MobiusMap
from .mesh import MeshError, TriMesh
from .pants import MarkedGroup

_CAYLEY = np.array([[1.0, -1j], [1.0, 1j]])
_CAYLEY_INV = np.array([[1j, 1j], [-1.0, 1.0]]) / (2j)


def disk_matrix(m: MobiusMap) -> np.ndarray:
    """Complex matrix of the same isometry acting on the unit disk."""
    return _CAYLEY @ m.as_array().astype(complex) @ _CAYLEY_INV


def _act(md: np.ndarray, w):
    return (md[0, 0] * w + md[0, 1]) / (md[1, 0] * w + md[1, 1])


def _parabolic_point(md: np.ndarray) -> complex:
    a, c, d = md[0, 0], md[1, 0], md[1, 1]
    if abs(c) < 1e-14:
        raise MeshError("commutator fixes a point outside the closed disk")
    w = (a - d) / (2.0 * c)
    return w / abs(w)


def _to_klein(w):
    return 2.0 * w / (1.0 + np.abs(w) ** 2)


def _from_klein(k):
    return k / (1.0 + np.sqrt(np.maximum(1.0 - np.abs(k) ** 2, 0.0)))


def _busemann(xi: complex, w) -> np.ndarray:
    """Busemann function of the ideal point xi, zero at the origin."""
    return np.log(np.abs(xi - w) ** 2 / (1.0 - np.abs(w) ** 2))


def _cyclic_order(pts) -> bool:
    ang = np.mod(np.angle(np.asarray(pts)) - np.angle(pts[0]), 2 * math.pi)
    return bool(np.all(np.diff(ang) > 0))


def torus_mesh(x: MobiusMap, y: MobiusMap, n: int = 24) -> TriMesh:
    """Mesh of H / <x, y> with loops ``x`` and ``y`` realizing the two generators.

    Both loops start at the same face, and their holonomies are conjugate to
    ``x`` and ``y`` by one common isometry.
    """
    if n < 4:
        raise MeshError("need at least 4 cells per side")
    gl, gb = disk_matrix(x), disk_matrix(y)
    comm = np.linalg.inv(gb) @ np.linalg.inv(gl) @ gb @ gl
    if abs(abs(np.trace(comm).real) - 2.0) > 1e-7:
        raise MeshError("commutator of the generators is not parabolic")
    q = _parabolic_point(comm)
    corners = [q, _act(gl, q), _act(gl @ gb, q), _act(gb, q)]
    swapped = not _cyclic_order(corners)
    if swapped:
        # the other cyclic order: let y pair the left and right sides instead
        gl, gb = gb, gl
        corners = [q, _act(gl, q), _act(gl @ gb, q), _act(gb, q)]
        if not _cyclic_order(corners):
            raise MeshError("generators do not bound an ideal quadrilateral")
    k00, k10, k11, k01 = corners  # ideal points are fixed by the Klein map
    s = np.arange(n + 1) / n
    bottom = k00 + s * (k10 - k00)
    left = k00 + s * (k01 - k00)
    top = _to_klein(_act(gb, _from_klein(bottom[1:-1])))
    right = _to_klein(_act(gl, _from_klein(left[1:-1])))
    top = np.concatenate([[k01], top, [k11]])
    right = np.concatenate([[k10], right, [k11]])
    S, R = np.meshgrid(s, s, indexing="ij")  # [i, j]
    grid = (
        (1 - R) * bottom[:, None]
        + R * top[:, None]
        + (1 - S) * left[None, :]
        + S * right[None, :]
        - ((1 - S) * (1 - R) * k00 + S * (1 - R) * k10 + (1 - S) * R * k01 + S * R * k11)
    )
    wgrid = _from_klein(grid)

    def vid(i, j):
        return (j % n) * n + (i % n)

    lifts = {(0, 0): np.eye(2), (n, 0): gl, (n, n): gl @ gb, (0, n): gb}
    lift_inv = {key: np.linalg.inv(m) for key, m in lifts.items()}
    tris, lens = [], []
    for j in range(n):
        for i in range(n):
            a, b, c, d = (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)
            for tri in ((a, b, c), (a, c, d)):
                k3 = [grid[p] for p in tri]
                area = ((k3[1] - k3[0]).conjugate() * (k3[2] - k3[0])).imag
                if area <= 0:
                    raise MeshError(f"grid cell {(i, j)} folds over in the Klein chart")
                tris.append([vid(*p) for p in tri])
                lens.append([_edge_length(tri[(m + 1) % 3], tri[(m + 2) % 3], wgrid, lift_inv, q) for m in range(3)])
    cusp = np.zeros(n * n, dtype=bool)
    cusp[0] = True
    pos = np.array([wgrid[i, j] for j in range(n) for i in range(n)])
    mesh = TriMesh.from_face_lengths(
        tris, lens, cusp, positions=pos, meta={"kind": "torus-group", "chart": "disk", "n": n}, tol=1e-8
    )

    def face_of(cell):
        base = 2 * ((cell[1] % n) * n + (cell[0] % n))
        return base, base + 1

    c0 = n // 2
    vertical = [(c0, c0 + k) for k in range(n + 1)]
    horizontal = [(c0 + k, c0) for k in range(n + 1)]
    # a vertical loop crosses the side pair glued by gb, a horizontal one gl
    loops = {"y": vertical, "x": horizontal} if not swapped else {"x": vertical, "y": horizontal}
    mesh.loops = {name: walk_to_faces(w, face_of) for name, w in loops.items()}
    for name, path in mesh.loops.items():
        mesh.check_loop(path, name)
    return mesh


def _edge_length(p, q, wgrid, lift_inv, xi) -> float:
    corner_p, corner_q = p in lift_inv, q in lift_inv
    if corner_p and corner_q:
        raise MeshError("edge joins two ideal corners")
    if corner_p or corner_q:
        corner, other = (p, q) if corner_p else (q, p)
        # pull the finite end back next to the base corner and use its horocycle
        w = _act(lift_inv[corner], wgrid[other])
        return float(math.exp(0.5 * _busemann(xi, w)))
    wa, wb = wgrid[p], wgrid[q]
    return float(2.0 * abs(wa - wb) / math.sqrt((1.0 - abs(wa) ** 2) * (1.0 - abs(wb) ** 2)))


def punctured_torus_marking() -> dict[str, tuple]:
    """Generator formulas of the punctured-torus pants marking in terms of loops x, y."""
    return {
        "P.c0": (("x", 1),),
        "t:a": (("y", 1),),
        "P.c1": (("y", -1), ("x", -1), ("y", 1)),
    }


def group_mesh(group: MarkedGroup, n: int = 24) -> TriMesh:
    """Remesh a marked punctured-torus group (pants ``P``, curve ``a``)."""
    return torus_mesh(group.generators["P.c0"], group.generators["t:a"], n)
