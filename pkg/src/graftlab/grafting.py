"""Grafted surfaces S_t and the limit surface S_inf as triangulated conformal models.

The flat-Strebel family starts from a flat torus with lattice ``Z + (s + i h0) Z``
and one or two punctures.  The grafting curve ``a`` is the horizontal circle
``y = 0``; the strip ``0 <= y <= h0`` is the complement S_E.  Its bottom edge
traversed in the +x direction is the ``+`` side (S_E on the left), with
parametrization ``x -> (x, 0)``; the top edge is the ``-`` side with
parametrization ``x -> (x + s, h0)``.

* S_t inserts a straight cylinder of height ``t`` below the strip, so S_t is the
  flat torus ``Z + (s + i (h0 + t)) Z`` with the same punctures.
* S_inf glues half-infinite cylinders to both edges of the strip.  They are
  truncated at height H and closed off by a fan to an ideal vertex, which is
  exact conformally: a half-infinite cylinder is a punctured disk.

Meshes are regular right-triangle grids with N cells per unit of circumference.
Marked loops are walks through grid cells, converted to dual face paths that
all start at the lower triangle of cell (0, 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hyp_core import IdealPoint, MobiusMap, axis, distance
from .mesh import MeshError, TriMesh
from .pants import (
    MarkedGroup,
    PantsDecomposition,
    Slot,
    evaluate,
    inverse_word,
    pants_words,
    punctured_torus,
    twice_punctured_torus,
)
from .uniformize import Developer, holonomy

SCHEMA_VERSION = 1


class SpecError(ValueError):
    """Invalid surface description or grafting vector."""


@dataclass
class SurfaceSpec:
    """A flat-Strebel marked surface: shear, strip height and puncture positions."""

    shear: float = 0.0
    height: float = 1.0
    punctures: list[tuple[float, float]] = field(default_factory=lambda: [(0.5, 0.5)])
    mode: str = "flat-strebel"
    curve: str = "a"

    def __post_init__(self):
        if self.mode != "flat-strebel":
            raise SpecError(f"unsupported grafting mode {self.mode!r}")
        if self.height <= 0:
            raise SpecError("strip height must be positive")
        if len(self.punctures) not in (1, 2):
            raise SpecError("the flat-Strebel family supports one or two punctures")
        for x, y in self.punctures:
            if not (0 < x < 1 and 0 < y < self.height):
                raise SpecError(f"puncture {(x, y)} must lie inside the open strip")
        self.punctures = [tuple(map(float, p)) for p in self.punctures]

    @property
    def decomposition(self) -> PantsDecomposition:
        return punctured_torus() if len(self.punctures) == 1 else twice_punctured_torus()

    @property
    def E(self) -> list[str]:
        return [self.curve]

    def side_offset(self, sign: str) -> float:
        """Flat x coordinate of the curve parameter origin on the given side."""
        return 0.0 if sign == "+" else self.shear

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": SCHEMA_VERSION,
                "mode": self.mode,
                "shear": self.shear,
                "height": self.height,
                "punctures": [list(p) for p in self.punctures],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SurfaceSpec":
        data = json.loads(text)
        if data.get("schema") != SCHEMA_VERSION:
            raise SpecError(f"unsupported schema version {data.get('schema')!r}")
        return cls(
            shear=float(data.get("shear", 0.0)),
            height=float(data.get("height", 1.0)),
            punctures=[tuple(p) for p in data.get("punctures", [(0.5, 0.5)])],
            mode=data.get("mode", "flat-strebel"),
        )


@dataclass(frozen=True)
class GraftingVector:
    """Cylinder moduli per grafting curve."""

    t: dict[str, float]

    def __post_init__(self):
        for c, v in self.t.items():
            if not (v >= 0 and math.isfinite(v)):
                raise SpecError(f"grafting modulus for {c} must be finite and >= 0, got {v}")

    def __ge__(self, other: "GraftingVector") -> bool:
        return all(self.t[c] >= other.t[c] for c in other.t)

    def __le__(self, other: "GraftingVector") -> bool:
        return other >= self


# grid surfaces ----------------------------------------------------------------


class _Grid:
    """Bookkeeping for a grid of cells on a cylinder of circumference 1."""

    def __init__(self, n: int, row_lines: np.ndarray, j_min: int):
        self.n = n
        self.y = row_lines  # y of row line j is y[j - j_min]
        self.j_min = j_min
        self.rows = len(row_lines) - 1

    def yl(self, j: int) -> float:
        return float(self.y[j - self.j_min])

    def faces(self, i: int, j: int) -> tuple[int, int]:
        """(lower, upper) face ids of a cell given in mesh-local coordinates."""
        base = 2 * ((j - self.j_min) * self.n + (i % self.n))
        return base, base + 1


_SIDE_FACE = {"right": 0, "bottom": 0, "left": 1, "top": 1}
_OPPOSITE = {"right": "left", "left": "right", "top": "bottom", "bottom": "top"}


def _move_side(a, b) -> str:
    di, dj = b[0] - a[0], b[1] - a[1]
    return {(1, 0): "right", (-1, 0): "left", (0, 1): "top", (0, -1): "bottom"}[(di, dj)]


def walk_to_faces(cells, face_of) -> list[int]:
    """Convert a closed walk of 4-adjacent cells into a dual face loop.

    ``cells`` are universal-cover cell coordinates whose last entry is the deck
    translate of the first.  The loop is based at the lower face of the first
    cell; ``face_of(cell) -> (lower, upper)`` resolves cover coordinates.
    """
    m = len(cells) - 1
    out: list[int] = []
    for k in range(m):
        cur = cells[k]
        entry = _OPPOSITE[_move_side(cells[k - 1] if k > 0 else cells[m - 1], cur if k > 0 else cells[m])]
        exit_ = _move_side(cur, cells[k + 1])
        fl = face_of(cur)
        a, b = fl[_SIDE_FACE[entry]], fl[_SIDE_FACE[exit_]]
        out.extend([a] if a == b else [a, b])
    base_l, base_u = face_of(cells[0])
    if base_l not in out[:2]:
        # enter and leave the base cell through its upper face: detour through the lower one
        return [base_l] + out + [base_u]
    k = out.index(base_l)
    return out[k:] + out[:k]


def _open_walk_faces(cells, face_of, last_exit: str) -> list[int]:
    """Faces along an open cell walk starting at the lower face of the first cell."""
    out: list[int] = []
    for k, cur in enumerate(cells):
        entry = "bottom" if k == 0 else _OPPOSITE[_move_side(cells[k - 1], cur)]
        exit_ = last_exit if k == len(cells) - 1 else _move_side(cur, cells[k + 1])
        fl = face_of(cur)
        a, b = fl[_SIDE_FACE[entry]], fl[_SIDE_FACE[exit_]]
        out.extend([a] if a == b else [a, b])
    return out


def _rect_walk(i0, i1, j0, j1, clockwise: bool) -> list[tuple[int, int]]:
    """Closed boundary walk of the cell rectangle [i0, i1] x [j0, j1] from (i0, j0)."""
    up = [(i0, j) for j in range(j0, j1 + 1)]
    right = [(i, j1) for i in range(i0 + 1, i1 + 1)]
    down = [(i1, j) for j in range(j1 - 1, j0 - 1, -1)]
    left = [(i, j0) for i in range(i1 - 1, i0, -1)]
    walk = up + right + down + left
    if not clockwise:
        walk = [walk[0]] + walk[1:][::-1]
    return walk + [walk[0]]


@dataclass
class FlatModel:
    """Mesh plus the grid data needed to trace curves back to flat coordinates."""

    mesh: TriMesh
    grid: _Grid
    spec: SurfaceSpec
    kind: str  # "St" or "Sinf"
    t: float
    H: float
    n: int
    cusp_vertices: dict[str, int]
    loops: dict[str, list[tuple[int, int]]] = field(default_factory=dict)

    def marked_group(self, u=None) -> MarkedGroup:
        hol = holonomy(self.mesh, u=u)
        return _marked_group_from_holonomy(hol, self.spec, self.kind)


def _grid_counts(spec: SurfaceSpec, n: int) -> tuple[int, list[tuple[int, int]]]:
    if n < 8 or n % 2:
        raise SpecError("resolution must be an even number of cells >= 8 per unit")
    n0 = int(round(spec.height * n))
    if abs(n0 - spec.height * n) > 1e-9:
        raise SpecError("strip height times resolution must be an integer")
    if abs(spec.shear * n - round(spec.shear * n)) > 1e-9:
        raise SpecError("shear times resolution must be an integer")
    pts = []
    for x, y in spec.punctures:
        ip, jp = x * n, y * n
        if abs(ip - round(ip)) > 1e-9 or abs(jp - round(jp)) > 1e-9:
            raise SpecError(f"puncture {(x, y)} is not a grid vertex at resolution {n}")
        pts.append((int(round(ip)), int(round(jp))))
    return n0, pts


def _cell_triangles(i, j, vid, y0, y1, n):
    a, b, c, d = (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)
    pos = {a: complex(i / n, y0), b: complex((i + 1) / n, y0), c: complex((i + 1) / n, y1), d: complex(i / n, y1)}
    out = []
    for tri in ((a, b, c), (a, c, d)):
        out.append(([vid(*p) for p in tri], [pos[p] for p in tri]))
    return out


def build_St_mesh(spec: SurfaceSpec, t: GraftingVector | float, n: int = 32) -> FlatModel:
    """Grafted surface S_t: the strip plus a straight cylinder of height t."""
    tt = t.t[spec.curve] if isinstance(t, GraftingVector) else float(t)
    if tt < 0:
        raise SpecError("grafting modulus must be >= 0")
    n0, pts = _grid_counts(spec, n)
    nt = int(round(tt * n)) if tt > 0 else 0
    if tt > 0 and nt == 0:
        nt = 1
    period = n0 + nt
    shift = int(round(spec.shear * n))
    lines = np.concatenate([np.linspace(-tt, 0.0, nt + 1)[:-1] if nt else np.zeros(0), np.arange(n0 + 1) * spec.height / n0])
    grid = _Grid(n, lines, -nt)

    def vid(i, j):
        if j == n0:
            i, j = i - shift, -nt
        return (j + nt) * n + (i % n)

    tris, corners = [], []
    for j in range(-nt, n0):
        for i in range(n):
            for tri, cor in _cell_triangles(i, j, vid, grid.yl(j), grid.yl(j + 1), n):
                tris.append(tri)
                corners.append(cor)
    nv = period * n
    cusp = np.zeros(nv, dtype=bool)
    names = {}
    for k, (ip, jp) in enumerate(pts):
        v = vid(ip, jp)
        cusp[v] = True
        names[f"@p{k + 1}" if len(pts) > 1 else "@p"] = v
    pos = np.array([complex(i / n, grid.yl(j)) for j in range(-nt, n0) for i in range(n)])
    mesh = TriMesh.from_lifted(tris, corners, cusp, positions=pos, meta={"kind": "St", "t": tt, "n": n})
    model = FlatModel(mesh, grid, spec, "St", tt, 0.0, n, names)

    def face_of(cell):
        i, j = cell
        q = math.floor((j + nt) / period)
        return grid.faces(i - q * shift, j - q * period)

    _attach_loops(model, pts, n0, face_of, t_walk=_t_walk(n0, nt, shift))
    return model


def build_Sinfty_mesh(spec: SurfaceSpec, H: float = 8.0, n: int = 32) -> FlatModel:
    """Limit surface: the strip with half-infinite cylinders on both sides."""
    if H < 5:
        raise SpecError("truncation height H must be at least 5 for the seam-angle fit window")
    n0, pts = _grid_counts(spec, n)
    nh = int(round(H * n))
    h0 = spec.height
    lines = np.concatenate(
        [np.linspace(-H, 0.0, nh + 1)[:-1], np.arange(n0) * h0 / n0, h0 + np.linspace(0.0, H, nh + 1)]
    )
    grid = _Grid(n, lines, -nh)
    top = n0 + nh
    nv_grid = (top + nh + 1) * n
    c_bot, c_top = nv_grid, nv_grid + 1

    def vid(i, j):
        return (j + nh) * n + (i % n)

    tris, corners = [], []
    for j in range(-nh, top):
        for i in range(n):
            for tri, cor in _cell_triangles(i, j, vid, grid.yl(j), grid.yl(j + 1), n):
                tris.append(tri)
                corners.append(cor)
    # fan caps; radius chosen so the ring edges have length 1/n exactly
    rho = 1.0 / (2.0 * n * math.sin(math.pi / n))
    for i in range(n):
        w0, w1 = rho * np.exp(-2j * math.pi * i / n), rho * np.exp(-2j * math.pi * (i + 1) / n)
        tris.append([vid(i + 1, -nh), vid(i, -nh), c_bot])
        corners.append([w1, w0, 0.0])
    for i in range(n):
        w0, w1 = rho * np.exp(2j * math.pi * i / n), rho * np.exp(2j * math.pi * (i + 1) / n)
        tris.append([vid(i, top), vid(i + 1, top), c_top])
        corners.append([w0, w1, 0.0])
    cusp = np.zeros(nv_grid + 2, dtype=bool)
    cusp[[c_bot, c_top]] = True
    names = {"a+": c_bot, "a-": c_top}
    for k, (ip, jp) in enumerate(pts):
        v = vid(ip, jp)
        cusp[v] = True
        names[f"@p{k + 1}" if len(pts) > 1 else "@p"] = v
    pos = np.concatenate(
        [
            np.array([complex(i / n, grid.yl(j)) for j in range(-nh, top + 1) for i in range(n)]),
            np.array([complex(np.nan, -np.inf), complex(np.nan, np.inf)]),
        ]
    )
    mesh = TriMesh.from_lifted(tris, corners, cusp, positions=pos, meta={"kind": "Sinf", "H": H, "n": n})
    model = FlatModel(mesh, grid, spec, "Sinf", math.inf, H, n, names)
    _attach_loops(model, pts, n0, lambda cell: grid.faces(*cell), t_walk=None)
    return model


def _t_walk(n0: int, nt: int, shift: int) -> list[tuple[int, int]]:
    """Walk from cell (0, 0) down across the cylinder to the translate of (0, 0).

    The sideways leg runs along the top row of the strip copy below, so the
    conjugated top loop bounds only the cylinder and never a puncture.
    """
    period = n0 + nt
    top = -nt - 1
    walk = [(0, j) for j in range(0, top - 1, -1)]
    step = -1 if shift > 0 else 1
    walk += [(i, top) for i in range(step, -shift + step, step)] if shift else []
    walk += [(-shift, j) for j in range(top - 1, -period - 1, -1)]
    return walk


def _attach_loops(model: FlatModel, pts, n0: int, face_of, t_walk) -> None:
    n = model.n
    walks: dict[str, list[tuple[int, int]]] = {}
    walks["a+"] = [(i, 0) for i in range(n + 1)]
    walks["a-"] = (
        [(0, j) for j in range(n0)]
        + [(i, n0 - 1) for i in range(-1, -n - 1, -1)]
        + [(-n, j) for j in range(n0 - 2, -1, -1)]
    )
    # clockwise around the whole interior of the strip: the remaining pants boundary
    walks["rest"] = _rect_walk(0, n - 1, 0, n0 - 1, clockwise=True)
    if len(pts) == 2:
        (i1, _), (i2, _) = sorted(pts)
        mid = (i1 + i2) // 2
        if not i1 < mid < i2:
            raise SpecError("punctures need distinct columns at least two cells apart")
        walks["p_left"] = _rect_walk(0, mid - 1, 0, n0 - 1, clockwise=True)
        walks["p_right"] = (
            [(i, 0) for i in range(0, mid)]
            + _rect_walk(mid, n - 1, 0, n0 - 1, clockwise=True)
            + [(i, 0) for i in range(mid - 1, -1, -1)]
        )
    if t_walk is not None:
        walks["t"] = t_walk
    model.loops = walks
    mesh = model.mesh
    mesh.loops = {name: walk_to_faces(w, face_of) for name, w in walks.items()}
    for name, path in mesh.loops.items():
        mesh.check_loop(path, name)


def _marked_group_from_holonomy(hol: dict[str, MobiusMap], spec: SurfaceSpec, kind: str) -> MarkedGroup:
    """Name the loop holonomies after the pants generators of the surface decomposition."""
    pd = spec.decomposition
    gens: dict[str, MobiusMap] = {}
    relations = []
    if len(spec.punctures) == 1:
        gens["P.c0"], gens["P.c1"] = hol["a+"], hol["a-"]
        words = {"P": pants_words("P")}
    else:
        gens["P0.c0"], gens["P0.c1"] = hol["a+"], hol["a-"]
        rest = hol["rest"]
        # P1 = (b-, @p1, @p2) with P1.c0 = rest^-1; the lasso order fixes which cusp is c1
        gens["P1.c0"] = rest.inverse()
        left, right = hol["p_left"], hol["p_right"]
        c0 = gens["P1.c0"].as_array()
        if np.max(np.abs(c0 @ left.as_array() @ right.as_array() - np.eye(2))) < np.max(
            np.abs(c0 @ right.as_array() @ left.as_array() - np.eye(2))
        ):
            gens["P1.c1"] = left
        else:
            gens["P1.c1"] = right
        words = {"P0": pants_words("P0"), "P1": pants_words("P1")}
    curve_sides: dict = {}
    for curve in pd.curves:
        a, b = pd.side(curve, "+"), pd.side(curve, "-")
        wa, wb = words[a.pants][a.index], words[b.pants][b.index]
        if curve == spec.curve:
            if kind != "St":
                continue
            gens[f"t:{curve}"] = hol["t"]
            tw = ((f"t:{curve}", 1),)
            curve_sides[curve] = (a, b, tw)
            relations.append(tw + wb + inverse_word(tw) + wa)
        else:
            curve_sides[curve] = (a, b, ())
            relations.append(wb + wa)
    return MarkedGroup(gens, words, curve_sides, relations)


# seam tracing ---------------------------------------------------------------


@dataclass
class SeamTrace:
    """Samples of a seam inside a grafted half-cylinder.

    ``depth`` is the distance from the strip edge into the cylinder and
    ``theta`` the unwrapped seam angle (full turns) at that depth.  Angles
    are counted from the curve parameter origin against the orientation of
    the curve, which makes ``theta+ - theta-`` agree with the twist sign
    used by :func:`graftlab.pants.measure_fn` (left earthquakes positive).
    """

    side: str
    depth: np.ndarray
    theta: np.ndarray
    limit: float = math.nan
    amplitude: float = math.nan
    residual: float = math.nan

    def fit(self, lo: float, hi: float) -> tuple[float, float, float]:
        """Least-squares fit theta = limit + A exp(-2 pi depth) on lo <= depth <= hi."""
        sel = (self.depth >= lo) & (self.depth <= hi)
        if sel.sum() < 3:
            raise SpecError("too few seam samples in the fit window")
        d, th = self.depth[sel], self.theta[sel]
        if np.any(np.diff(d) <= 0):
            raise SpecError("seam depth is not monotone in the fit window")
        basis = np.stack([np.ones_like(d), np.exp(-2.0 * math.pi * d)], axis=1)
        coef, *_ = np.linalg.lstsq(basis, th, rcond=None)
        res = float(np.sqrt(np.mean((basis @ coef - th) ** 2)))
        return float(coef[0]), float(coef[1]), res


def _geodesic_x_crossing(p: complex, q: complex, x0: float):
    """Height at which the vertical line Re z = x0 meets the geodesic [p, q]."""
    xp, xq = p.real, q.real
    if abs(xp - xq) < 1e-15 * max(1.0, abs(xp)):
        return None
    if not (min(xp, xq) <= x0 <= max(xp, xq)):
        return None
    c = (abs(p) ** 2 - abs(q) ** 2) / (2.0 * (xp - xq))
    r2 = (xp - c) ** 2 + p.imag**2
    h2 = r2 - (x0 - c) ** 2
    if h2 <= 0:
        return None
    return math.sqrt(h2)


def _apply(m: np.ndarray, z):
    if isinstance(z, float) and math.isinf(z):
        return m[0, 0] / m[1, 0] if m[1, 0] != 0 else math.inf
    return (m[0, 0] * z + m[0, 1]) / (m[1, 0] * z + m[1, 1])


def trace_seam(model: FlatModel, sign: str, u=None) -> SeamTrace:
    """Trace the seam from the cusp replacing side ``sign`` of the grafting curve.

    The seam runs to the fixed point of the peripheral element of the seam
    target slot.  Points are mapped back to flat coordinates by arclength
    interpolation along the crossed edges.
    """
    if model.kind != "Sinf":
        raise SpecError("seams are traced on the limit surface")
    mesh = model.mesh
    spec = model.spec
    pd = spec.decomposition
    slot = pd.side(spec.curve, sign)
    grp = model.marked_group(u)
    words = grp.pants
    own = evaluate(words[slot.pants][slot.index], grp.generators)
    target = evaluate(words[slot.pants][pd.seam_target(slot)], grp.generators)
    # normalize the cusp of this side to infinity with translation length 1
    q = axis(own).x
    s_map = np.array([[0.0, -1.0], [1.0, -q]])
    par = s_map @ own.as_array() @ np.linalg.inv(s_map)
    shift = par[0, 1] / par[1, 1]
    scale = np.array([[1.0 / math.sqrt(abs(shift)), 0.0], [0.0, math.sqrt(abs(shift))]])
    norm = scale @ s_map
    carrier = axis(target)
    if isinstance(carrier, IdealPoint):
        x_target = float(_apply(norm, carrier.x))
    else:
        # a vertical geodesic meets a semicircle orthogonally through its centre
        x_target = 0.5 * float(_apply(norm, carrier.start) + _apply(norm, carrier.end))
    dev = Developer(mesh, u)
    grid = model.grid
    if sign == "+":
        cells = [(0, j) for j in range(0, grid.j_min - 1, -1)]
        path = _open_walk_faces(cells, lambda c: grid.faces(*c), "bottom")
    else:
        cells = [(0, j) for j in range(0, grid.j_min + grid.rows)]
        path = _open_walk_faces(cells, lambda c: grid.faces(*c), "top")
    cap = _cap_face(model, sign, path[-1])
    path.append(cap)
    frame = norm.copy()
    for f, g in zip(path, path[1:]):
        frame = frame @ dev.transition(f, g)
    ring = _cap_ring(model, sign, cap)
    frames = [frame]
    for f, g in zip(ring, ring[1:]):
        frames.append(frames[-1] @ dev.transition(f, g))
    face, fr, x0 = _bracket(mesh, dev, ring, frames, x_target)
    depth, theta = [], []
    y_prev = math.inf
    entry = None
    for _ in range(mesh.n_faces):
        tri = mesh.triangles[face]
        pts = _developed_corners(mesh, dev, face, fr)
        best = None
        for k in range(3):
            p, qv = tri[(k + 1) % 3], tri[(k + 2) % 3]
            if entry is not None and {p, qv} == entry:
                continue
            zp, zq = pts[(k + 1) % 3], pts[(k + 2) % 3]
            if isinstance(zp, float) or isinstance(zq, float):
                continue
            y = _geodesic_x_crossing(complex(zp), complex(zq), x0)
            if y is not None and y < y_prev and (best is None or y > best[0]):
                best = (y, k, p, qv, complex(zp), complex(zq))
        if best is None:
            break
        y, k, p, qv, zp, zq = best
        z = complex(x0, y)
        lam = distance(zp, z) / distance(zp, zq)
        fp, fq = _flat_pair(mesh, p, qv)
        w = fp + lam * (fq - fp)
        d = -w.imag if sign == "+" else w.imag - spec.height
        if d < 0:
            break
        depth.append(d)
        theta.append(spec.side_offset(sign) - w.real)
        g = int(mesh.adjacency()[face, k, 0])
        fr = fr @ dev.transition(face, g)
        face = g
        y_prev = y
        entry = {p, qv}
    depth_a = np.array(depth[::-1])
    theta_a = np.unwrap(np.array(theta[::-1]) * 2 * math.pi) / (2 * math.pi)
    return SeamTrace(sign, depth_a, theta_a)


def _flat_pair(mesh: TriMesh, p: int, q: int) -> tuple[complex, complex]:
    fp, fq = mesh.positions[p], mesh.positions[q]
    dx = fq.real - fp.real
    fq = fq - round(dx)
    return fp, fq


def _developed_corners(mesh, dev: Developer, f: int, fr: np.ndarray):
    tri = mesh.triangles[f]
    out = []
    for m in range(3):
        if mesh.cusp[tri[m]]:
            nn = next(x for x in range(3) if x != m)
            g = fr @ dev.frame(f, nn, m)
            out.append(float(g[0, 0] / g[1, 0]) if g[1, 0] != 0 else math.inf)
        else:
            nn = (m + 1) % 3 if not mesh.cusp[tri[(m + 1) % 3]] else (m + 2) % 3
            g = fr @ dev.frame(f, m, nn)
            out.append(complex(_apply(g, 1j)))
    return out


def _cap_face(model: FlatModel, sign: str, last: int) -> int:
    mesh = model.mesh
    cusp = model.cusp_vertices["a+" if sign == "+" else "a-"]
    adj = mesh.adjacency()
    for k in range(3):
        g = int(adj[last, k, 0])
        if cusp in mesh.triangles[g]:
            return g
    raise MeshError("cap face not adjacent to the end of the column walk")


def _cap_ring(model: FlatModel, sign: str, start: int) -> list[int]:
    mesh = model.mesh
    cusp = model.cusp_vertices["a+" if sign == "+" else "a-"]
    adj = mesh.adjacency()
    ring = [start]
    prev = -1
    while True:
        f = ring[-1]
        nxt = None
        for k in range(3):
            g = int(adj[f, k, 0])
            if g != prev and cusp in mesh.triangles[g]:
                nxt = g
                break
        if nxt is None or nxt == start:
            break
        prev = f
        ring.append(nxt)
    ring.append(start)
    return ring


def _bracket(mesh, dev, ring, frames, x_target):
    spans = []
    for f, fr in zip(ring[:-1], frames[:-1]):
        pts = _developed_corners(mesh, dev, f, fr)
        xs = [complex(z).real for z in pts if not isinstance(z, float)]
        spans.append((min(xs), max(xs)))
    lo = min(s[0] for s in spans)
    hi = max(s[1] for s in spans)
    period = hi - lo
    x0 = lo + ((x_target - lo) % period) if period > 0 else x_target
    for (a, b), f, fr in zip(spans, ring[:-1], frames[:-1]):
        if a <= x0 <= b:
            return f, fr, x0
    raise MeshError("seam target not bracketed by the cap ring")


def limiting_angles(model: FlatModel, u=None, window: tuple[float, float] | None = None):
    """Fitted limiting seam angles (theta+, theta-) and the traces behind them."""
    if model.kind != "Sinf":
        raise SpecError("limiting angles need the limit surface")
    H = model.H
    lo, hi = window if window is not None else (0.5 * H, H - 1.0 / model.n)
    out = {}
    for sign in ("+", "-"):
        tr = trace_seam(model, sign, u)
        tr.limit, tr.amplitude, tr.residual = tr.fit(lo, hi)
        out[sign] = tr
    return out["+"].limit, out["-"].limit, out


def predicted_twist(theta_plus: float, theta_minus: float) -> float:
    """Predicted limit of the half-twist about the grafting curve."""
    from .pants import half_twist

    return half_twist(theta_plus - theta_minus)


__all__ = [
    "SurfaceSpec",
    "GraftingVector",
    "FlatModel",
    "SeamTrace",
    "build_St_mesh",
    "build_Sinfty_mesh",
    "limiting_angles",
    "predicted_twist",
    "trace_seam",
    "walk_to_faces",
    "Slot",
]
