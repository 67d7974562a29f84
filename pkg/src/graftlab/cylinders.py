"""Moduli of cylinders, collars, and lattice approximations of extremal length.

Closed forms cover hyperbolic collars (the cylinder metric |dz| / cos y on
``l S^1 x (-pi/2, pi/2)``) and the pinching and crossing-distance bounds.
:class:`GridRegion` describes an annulus in the flat cylinder C/Z sampled on a
square lattice; :func:`grid_modulus` computes the modulus of its family of
essential loops from the piecewise-linear finite element space on that lattice.

Conventions: C/Z has circumference 1, so the modulus of a straight cylinder
is its height and the round annulus r < |w| < R has modulus log(R/r) / 2 pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components
from scipy.special import ellipk, ellipkm1

REGION_TAG = "graftlab-region 1"


class GridError(ValueError):
    """Region is not an essential annulus, or a file is malformed."""


@dataclass(frozen=True)
class StraightCylinder:
    circumference: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.circumference > 0 and self.y1 > self.y0):
            raise ValueError("need positive circumference and y1 > y0")

    @property
    def modulus(self) -> float:
        return (self.y1 - self.y0) / self.circumference


# hyperbolic collars -----------------------------------------------------------


def _check_length(ell: float) -> None:
    if not ell > 0:
        raise ValueError(f"length must be positive, got {ell}")


def collar_width(ell: float) -> float:
    """Width of the standard embedded collar around a closed geodesic of length ell."""
    _check_length(ell)
    return math.asinh(1.0 / math.sinh(0.5 * ell))


def collar_modulus(ell: float) -> float:
    """Modulus of the standard collar, solving sec(m ell / 2) = cosh(width)."""
    _check_length(ell)
    # cosh(width) = coth(ell/2), so m ell / 2 = arccos(tanh(ell/2))
    return 2.0 * math.acos(math.tanh(0.5 * ell)) / ell


def collar_modulus_bounds(ell: float) -> tuple[float, float, float]:
    """(pi/ell - 1, pi/ell, exact collar modulus) for 0 < ell < pi."""
    if not 0 < ell < math.pi:
        raise ValueError(f"collar bounds need 0 < ell < pi, got {ell}")
    return math.pi / ell - 1.0, math.pi / ell, collar_modulus(ell)


def pinching_bound(t: float) -> float:
    """Largest hyperbolic length a curve can have once a cylinder of modulus t surrounds it."""
    if not t > 0:
        raise ValueError(f"modulus must be positive, got {t}")
    return math.pi / t


def distance_across_bound(t: float, c: float) -> float:
    """Lower bound log(1 + 2 b / c) on the length of a path crossing half of the grafted cylinder.

    ``b = t/2 - 1`` is the modulus of the straight cylinder guaranteed inside
    each half; the bound is 0 when b <= 0.
    """
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    b = 0.5 * t - 1.0
    if b <= 0:
        return 0.0
    return math.log1p(2.0 * b / c)


def crossing_length(t: float, c: float, ell: float) -> float:
    """Exact cylinder-metric length of the vertical segment that the crossing bound estimates.

    Integrates dy / cos y over ((pi - ell (c + 2b)) / 2, (pi - ell c) / 2).
    """
    b = 0.5 * t - 1.0
    if b <= 0:
        return 0.0
    u = 0.5 * (math.pi - ell * (c + 2.0 * b))
    v = 0.5 * (math.pi - ell * c)
    if not (-0.5 * math.pi < u < v < 0.5 * math.pi):
        raise ValueError("crossing interval leaves the cylinder")

    def gd_inv(y):
        return math.log(abs(1.0 / math.cos(y) + math.tan(y)))

    return gd_inv(v) - gd_inv(u)


# Teichmüller annulus ----------------------------------------------------------


def teichmuller_modulus(b: float) -> float:
    """Modulus of the complement of [-1, 0] and [e^{2 pi b}, oo) in the plane.

    The ring is the double of a Grötzsch ring with radius r, r^2 = 1/(1 + P),
    giving K'(r) / (2 K(r)).
    """
    p = math.exp(2.0 * math.pi * b)
    m = 1.0 / (1.0 + p)
    return float(ellipkm1(m) / (2.0 * ellipk(m)))


def teichmuller_bounds(b: float) -> tuple[float, float]:
    return b + 4.0 * math.log(2.0) / (2.0 * math.pi), b + 5.0 * math.log(2.0) / (2.0 * math.pi)


# lattice regions ----------------------------------------------------------------


@dataclass
class GridRegion:
    """Nodes of a square lattice on C/Z that belong to an annulus.

    ``mask[j, i]`` is the node at x = i/n, y = y0 + j/n.  Nodes outside the
    mask are walls; the rows just below and above the array count as walls of
    the lower and upper boundary component.
    """

    mask: np.ndarray
    y0: float = 0.0
    _labels: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2 or self.mask.shape[1] < 4:
            raise GridError("mask must be a 2D array with at least 4 columns")

    @property
    def n(self) -> int:
        return self.mask.shape[1]

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def rows(self) -> int:
        return self.mask.shape[0]

    @classmethod
    def straight(cls, height: float, n: int, y0: float = 0.0) -> "GridRegion":
        """Straight cylinder y0 < y < y0 + height; height * n must be an integer."""
        k = round(height * n)
        if abs(k - height * n) > 1e-9 or k < 2:
            raise GridError("height must be a multiple of the lattice spacing (at least 2 cells)")
        return cls(np.ones((k - 1, n), dtype=bool), y0 + 1.0 / n)

    @classmethod
    def between(cls, lower, upper, n: int) -> "GridRegion":
        """Region strictly between two functions of x (vectorized callables)."""
        x = np.arange(n) / n
        lo, hi = np.asarray(lower(x), float), np.asarray(upper(x), float)
        j0 = math.floor(lo.min() * n) - 1
        j1 = math.ceil(hi.max() * n) + 1
        y = (np.arange(j0, j1 + 1) / n)[:, None]
        return cls((y > lo[None, :]) & (y < hi[None, :]), j0 / n)

    @classmethod
    def teichmuller(cls, b: float, n: int, reach: float = 4.0) -> "GridRegion":
        """The Teichmüller ring pulled back by w = e^{2 pi i z}, truncated at distance ``reach``.

        The slit [-1, 0] becomes the ray x = 1/2, y >= 0 and [e^{2 pi b}, oo)
        the ray x = 0, y <= -b; the straight band -b < y < 0 sits between them.
        """
        if n % 2:
            raise GridError("the Teichmüller region needs an even number of columns")
        kb, kr = round(b * n), round(reach * n)
        if abs(kb - b * n) > 1e-9:
            raise GridError("b must be a multiple of the lattice spacing")
        j = np.arange(-kb - kr + 1, kr)
        mask = np.ones((len(j), n), dtype=bool)
        mask[j >= 0, n // 2] = False
        mask[j <= -kb, 0] = False
        return cls(mask, j[0] / n)

    def y_of_row(self, j) -> np.ndarray:
        return self.y0 + np.asarray(j) / self.n

    # topology -------------------------------------------------------------

    def _padded_walls(self) -> np.ndarray:
        walls = ~self.mask
        pad = np.ones((1, self.n), dtype=bool)
        return np.vstack([pad, walls, pad])

    def wall_labels(self) -> tuple[np.ndarray, int, int]:
        """Labels of wall components on the padded grid, plus the lower and upper labels."""
        if self._labels is None:
            walls = self._padded_walls()
            lab = _periodic_components(walls)
            lower, upper = int(lab[0, 0]), int(lab[-1, 0])
            if lower == upper:
                raise GridError("region is not essential: its boundary components touch")
            extra = set(np.unique(lab[walls])) - {lower, upper}
            if extra:
                raise GridError("region has holes besides the two boundary components")
            inner = _periodic_components(self.mask)
            if inner.max() > 1:
                raise GridError("region is not connected")
            self._labels = (lab, lower, upper)
        return self._labels

    def is_essential(self) -> bool:
        try:
            self.wall_labels()
        except GridError:
            return False
        return True

    # IO -------------------------------------------------------------------

    def dumps(self) -> str:
        out = [REGION_TAG, f"columns {self.n} rows {self.rows} y0 {self.y0!r}"]
        for row in self.mask:
            runs, cur, count = [], bool(row[0]), 0
            for v in row:
                if bool(v) == cur:
                    count += 1
                else:
                    runs.append(f"{count}{'#' if cur else '.'}")
                    cur, count = bool(v), 1
            runs.append(f"{count}{'#' if cur else '.'}")
            out.append(" ".join(runs))
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "GridRegion":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#!")]
        if not lines or lines[0].strip() != REGION_TAG:
            raise GridError("not a graftlab region file")
        head = lines[1].split()
        if len(head) != 6 or head[0] != "columns" or head[2] != "rows" or head[4] != "y0":
            raise GridError(f"line 2: expected 'columns N rows M y0 Y', got {lines[1]!r}")
        n, rows, y0 = int(head[1]), int(head[3]), float(head[5])
        body = lines[2:]
        if len(body) != rows:
            raise GridError(f"expected {rows} mask rows, found {len(body)}")
        mask = np.zeros((rows, n), dtype=bool)
        for j, line in enumerate(body):
            pos = 0
            for tok in line.split():
                if tok[-1] not in "#." or not tok[:-1].isdigit():
                    raise GridError(f"line {j + 3}: bad run {tok!r}")
                k = int(tok[:-1])
                mask[j, pos : pos + k] = tok[-1] == "#"
                pos += k
            if pos != n:
                raise GridError(f"line {j + 3}: runs cover {pos} columns, expected {n}")
        return cls(mask, y0)

    @classmethod
    def load(cls, path) -> "GridRegion":
        return cls.loads(Path(path).read_text())


def _periodic_components(mask: np.ndarray) -> np.ndarray:
    """4-connected component labels (1-based, 0 = background) with x periodic."""
    rows, n = mask.shape
    idx = np.arange(rows * n).reshape(rows, n)
    right = mask & np.roll(mask, -1, axis=1)
    up = mask[:-1] & mask[1:]
    src = np.concatenate([idx[right], idx[:-1][up]])
    dst = np.concatenate([np.roll(idx, -1, axis=1)[right], idx[1:][up]])
    g = sp.coo_matrix((np.ones(len(src)), (src, dst)), shape=(rows * n, rows * n))
    _, comp = connected_components(g, directed=False)
    lab = np.zeros(rows * n, dtype=np.int64)
    on = mask.ravel()
    _, dense = np.unique(comp[on], return_inverse=True)
    lab[on] = dense + 1
    return lab.reshape(rows, n)


@dataclass(frozen=True)
class ModulusEstimate:
    """Two-sided lattice estimate of the modulus of the essential loops.

    ``upper`` is the energy of the best piecewise-linear multivalued function
    with period 1 around the annulus: its gradient is an admissible metric, so
    it approximates the infimum defining the modulus from above.  ``lower`` is
    the reciprocal Dirichlet energy of the best piecewise-linear potential
    between the two boundary components.  Both are exact for straight
    cylinders.
    """

    lower: float
    upper: float

    @property
    def value(self) -> float:
        return self.upper


class _Cells:
    """Cells of the lattice that touch the region, on the padded grid."""

    def __init__(self, region: GridRegion):
        lab, lower, upper = region.wall_labels()
        n = region.n
        inside = np.vstack([np.zeros((1, n), bool), region.mask, np.zeros((1, n), bool)])
        rows = inside.shape[0]
        self.n, self.rows = n, rows
        self.inside = inside
        # node value class: 0 lower wall, 1 upper wall, 2 interior
        kind = np.full(inside.shape, 2, dtype=np.int8)
        kind[lab == lower] = 0
        kind[lab == upper] = 1
        self.kind = kind.ravel()
        jj, ii = np.meshgrid(np.arange(rows - 1), np.arange(n), indexing="ij")
        ci, cj = ii.ravel(), jj.ravel()
        corners = np.stack(
            [cj * n + ci, cj * n + (ci + 1) % n, (cj + 1) * n + (ci + 1) % n, (cj + 1) * n + ci], axis=1
        )
        keep = (self.kind[corners] == 2).any(axis=1)
        self.corners = corners[keep]
        self.ci = ci[keep]


def _side_list(cells: _Cells):
    """(cell, corner a, corner b, crosses seam) for the four sides of every cell."""
    out = []
    wrap = cells.ci == cells.n - 1
    for a, b in ((0, 1), (1, 2), (3, 2), (0, 3)):
        seam = wrap if (a, b) in ((0, 1), (3, 2)) else np.zeros_like(wrap)
        out.append((a, b, seam))
    return out


def _assemble(pa, pb, size, weight=0.5):
    """Stiffness matrix of sum weight * (x[pb] - x[pa])^2 over the given pairs."""
    r = np.concatenate([pa, pb, pa, pb])
    c = np.concatenate([pa, pb, pb, pa])
    w = np.full(len(pa), weight)
    v = np.concatenate([w, w, -w, -w])
    return sp.csr_matrix((v, (r, c)), shape=(size, size))


def _side_pairs(cells: _Cells):
    pa = np.concatenate([cells.corners[:, a] for a, _, _ in _side_list(cells)])
    pb = np.concatenate([cells.corners[:, b] for _, b, _ in _side_list(cells)])
    return pa, pb


def _dirichlet_energy(cells: _Cells) -> float:
    kind = cells.kind
    pa, pb = _side_pairs(cells)
    L = _assemble(pa, pb, len(kind)).tocsr()
    free = kind == 2
    phi = (kind == 1).astype(float)
    A = L[free][:, free]
    rhs = -L[free][:, ~free] @ phi[~free]
    phi[free] = spla.spsolve(A.tocsc(), rhs)
    return float(0.5 * ((phi[pb] - phi[pa]) ** 2).sum())


def _conjugate_energy(cells: _Cells) -> float:
    kind = cells.kind
    n = cells.n
    nc = len(cells.corners)
    slot = np.arange(4 * nc).reshape(nc, 4)
    row = cells.corners[:, 0] // n
    cell_id = np.full((cells.rows, n), -1)
    cell_id[row, cells.ci] = np.arange(nc)
    src, dst = [], []
    # right neighbour: our side (1, 2) is its side (0, 3)
    r = cell_id[row, (cells.ci + 1) % n]
    ok = (r >= 0) & _open(kind, cells.corners[:, 1], cells.corners[:, 2])
    src += [slot[ok, 1], slot[ok, 2]]
    dst += [slot[r[ok], 0], slot[r[ok], 3]]
    # upper neighbour: our side (3, 2) is its side (0, 1)
    up = np.where(row + 1 < cells.rows, cell_id[np.minimum(row + 1, cells.rows - 1), cells.ci], -1)
    ok = (up >= 0) & _open(kind, cells.corners[:, 3], cells.corners[:, 2])
    src += [slot[ok, 3], slot[ok, 2]]
    dst += [slot[up[ok], 0], slot[up[ok], 1]]
    src, dst = np.concatenate(src), np.concatenate(dst)
    g = sp.coo_matrix((np.ones(len(src)), (src, dst)), shape=(4 * nc, 4 * nc))
    ncopy, copy = connected_components(g, directed=False)
    copy = copy.reshape(nc, 4)
    sides = _side_list(cells)
    pa = np.concatenate([copy[:, a] for a, _, _ in sides])
    pb = np.concatenate([copy[:, b] for _, b, _ in sides])
    jump = np.concatenate([seam for _, _, seam in sides]).astype(float)
    L = _assemble(pa, pb, ncopy).tocsr()
    # gradient of 0.5 * sum (psi[pb] - psi[pa] + jump)^2 at psi = 0
    g0 = np.zeros(ncopy)
    np.add.at(g0, pb, 0.5 * jump)
    np.add.at(g0, pa, -0.5 * jump)
    # the energy only sees differences: pin one copy in each connected piece
    _, comp = connected_components(L, directed=False)
    keep = np.ones(ncopy, dtype=bool)
    keep[np.unique(comp, return_index=True)[1]] = False
    psi = np.zeros(ncopy)
    psi[keep] = spla.spsolve(L[keep][:, keep].tocsc(), -g0[keep])
    return float(0.5 * ((psi[pb] - psi[pa] + jump) ** 2).sum())


def _open(kind: np.ndarray, v, w):
    """A lattice side is part of the boundary only when both ends are walls of one component."""
    kv, kw = kind[v], kind[w]
    return ~((kv != 2) & (kv == kw))


def grid_modulus_bounds(region: GridRegion) -> ModulusEstimate:
    """Lower (Dirichlet) and upper (conjugate) lattice estimates of the modulus."""
    cells = _Cells(region)
    # Dirichlet energy is conformally invariant, so unit lattice spacing is fine
    return ModulusEstimate(lower=1.0 / _dirichlet_energy(cells), upper=_conjugate_energy(cells))


def grid_modulus(region: GridRegion) -> float:
    """Modulus of the essential loops of a lattice region (conjugate-energy estimate)."""
    return grid_modulus_bounds(region).value


def largest_straight_subcylinder(region: GridRegion) -> float:
    """Modulus of the largest straight cylinder contained in the region.

    A run of full rows j0..j1 leaves the open band between rows j0-1 and j1+1
    free of walls, so its height is (j1 - j0 + 2) h.
    """
    region.wall_labels()
    full = region.mask.all(axis=1)
    best, run = 0, 0
    for f in full:
        run = run + 1 if f else 0
        best = max(best, run)
    return (best + 1) * region.h if best else 0.0


@dataclass(frozen=True)
class NotchedCylinder:
    """Straight cylinder 0 < y < height with wavy walls and vertical slits cut in from both sides.

    Slit positions and depths are multiples of 1/64, so every lattice with a
    multiple of 64 columns samples the same region.
    """

    height: float
    wave: tuple[float, int, float]  # amplitude, frequency, phase of both walls
    slits: tuple[tuple[float, float, int], ...]  # (x, depth, side) with side -1 bottom, +1 top

    def lower(self, x):
        amp, k, ph = self.wave
        return amp * (1.0 + np.sin(2 * np.pi * k * x + ph))

    def upper(self, x):
        amp, k, ph = self.wave
        return self.height - amp * (1.0 + np.cos(2 * np.pi * k * x + ph))

    def region(self, n: int) -> GridRegion:
        r = GridRegion.between(self.lower, self.upper, n)
        y = r.y_of_row(np.arange(r.rows))
        for x, depth, side in self.slits:
            i = round(x * n) % n
            cut = y <= depth + 1e-12 if side < 0 else y >= self.height - depth - 1e-12
            r.mask[cut, i] = False
        return GridRegion(r.mask, r.y0)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "NotchedCylinder":
        height = rng.integers(96, 192) / 64
        amp = float(rng.uniform(0.0, 0.08))
        wave = (amp, int(rng.integers(1, 4)), float(rng.uniform(0, 2 * np.pi)))
        slits = []
        for side in (-1, 1):
            for _ in range(int(rng.integers(0, 4))):
                depth = rng.integers(1, 32) / 64
                slits.append((int(rng.integers(0, 64)) / 64, float(depth), side))
        # keep the walls apart so the region stays an essential annulus
        lo_reach = max([d for _, d, s in slits if s < 0] + [2 * amp])
        hi_reach = max([d for _, d, s in slits if s > 0] + [2 * amp])
        if lo_reach + hi_reach > height - 0.25:
            height = float(np.ceil((lo_reach + hi_reach + 0.25) * 64) / 64)
        return cls(float(height), wave, tuple(slits))
