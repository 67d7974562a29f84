"""Discrete uniformization of triangle meshes by hyperbolic vertex scaling.

The conformal factor ``u`` rescales every edge through
``sinh(a_ij / 2) = exp((u_i + u_j) / 2) * l_ij / 2`` where ``l_ij`` is the
input length.  Faces with a cusp corner are hyperbolic triangles with one
ideal vertex; their shape is fixed by the decorated distances of the two finite
corners to a horocycle at the cusp.  Angles extend continuously to degenerate
faces, which keeps the energy convex on all of R^V and its minimizer is the
discrete hyperbolic metric with total angle 2 pi at every finite vertex.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hyp_core import MobiusMap, classify
from .mesh import MeshError, TriMesh
from .special import lobachevsky

TWO_PI = 2.0 * math.pi


class UniformizeError(RuntimeError):
    """Solver failure (non-hyperbolic type or no convergence)."""


@dataclass
class _Faces:
    """Face classification with cusp corners rotated to local slot 2."""

    fin: np.ndarray  # indices of faces without cusp
    fin_v: np.ndarray  # (nf, 3) vertices
    fin_l: np.ndarray  # (nf, 3) lengths opposite each corner
    cus: np.ndarray  # indices of faces with one cusp corner
    cus_v: np.ndarray  # (nc, 3) vertices (j, k, cusp)
    cus_l: np.ndarray  # (nc, 3): l_jk, l_cj, l_ck
    cus_roll: np.ndarray  # local slot of the cusp in the original face


def _classify_faces(mesh: TriMesh) -> _Faces:
    tris = mesh.triangles
    ncusp = mesh.cusp[tris].sum(axis=1)
    if np.any(ncusp > 1):
        raise MeshError("a face has more than one cusp corner")
    fin = np.flatnonzero(ncusp == 0)
    cus = np.flatnonzero(ncusp == 1)
    lf = mesh.lengths[mesh.tri_edges]
    c = np.argmax(mesh.cusp[tris[cus]], axis=1)
    j, k = (c + 1) % 3, (c + 2) % 3
    rows = np.arange(len(cus))
    ct = tris[cus]
    cl = lf[cus]
    cus_v = np.stack([ct[rows, j], ct[rows, k], ct[rows, c]], axis=1)
    cus_l = np.stack([cl[rows, c], cl[rows, k], cl[rows, j]], axis=1)
    return _Faces(fin, tris[fin], lf[fin], cus, cus_v, cus_l, c)


def _faces(mesh: TriMesh) -> _Faces:
    cache = getattr(mesh, "_faces_cache", None)
    if cache is None or cache[0] is not mesh.lengths:
        cache = (mesh.lengths, _classify_faces(mesh))
        mesh._faces_cache = cache
    return cache[1]


# finite faces -------------------------------------------------------------


def _finite_geometry(u3: np.ndarray, l3: np.ndarray):
    """Hyperbolic side lengths and angles; corner k is opposite side k."""
    usum = u3.sum(axis=1, keepdims=True)
    # side k joins the two corners other than k
    x = np.exp(0.5 * (usum - u3)) * 0.5 * l3
    a = 2.0 * np.arcsinh(x)
    s = 0.5 * a.sum(axis=1, keepdims=True)
    sm = s - a
    degenerate = np.any(sm <= 0.0, axis=1)
    alpha = np.empty_like(a)
    ok = ~degenerate
    if np.any(ok):
        sh = np.sinh(sm[ok])
        ss = np.sinh(s[ok])
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            alpha[ok, k] = 2.0 * np.arctan2(np.sqrt(sh[:, i] * sh[:, j]), np.sqrt(ss[:, 0] * sh[:, k]))
    if np.any(degenerate):
        big = np.argmax(a[degenerate], axis=1)
        ang = np.zeros((int(degenerate.sum()), 3))
        ang[np.arange(len(big)), big] = math.pi
        alpha[degenerate] = ang
    return a, alpha, degenerate


def _finite_jacobian(a, alpha, degenerate) -> np.ndarray:
    """d alpha_corner / d u_corner, shape (n, 3, 3)."""
    n = len(a)
    jac = np.zeros((n, 3, 3))
    ok = ~degenerate
    if not np.any(ok):
        return jac
    a, al = a[ok], alpha[ok]
    sa = np.sinh(a)
    # dalpha_i / da_m
    da = np.zeros((len(a), 3, 3))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        d_ii = sa[:, i] / (sa[:, j] * sa[:, k] * np.sin(al[:, i]))
        da[:, i, i] = d_ii
        da[:, i, j] = -d_ii * np.cos(al[:, k])
        da[:, i, k] = -d_ii * np.cos(al[:, j])
    th = np.tanh(0.5 * a)
    # da_m / du_v = tanh(a_m/2) when v is an endpoint of side m (v != m)
    dau = np.zeros((len(a), 3, 3))
    for m in range(3):
        for v in range(3):
            if v != m:
                dau[:, m, v] = th[:, m]
    jac[ok] = np.einsum("nim,nmv->niv", da, dau)
    return jac


def _finite_potential(u3, l3, alpha) -> np.ndarray:
    usum = u3.sum(axis=1, keepdims=True)
    lam = (usum - u3) + 2.0 * np.log(0.5 * l3)
    half = 0.5 * alpha.sum(axis=1, keepdims=True)
    omega = half - alpha
    big_omega = half[:, 0]
    h = (
        lobachevsky(0.5 * math.pi - omega).sum(axis=1)
        + lobachevsky(0.5 * math.pi - big_omega)
        + lobachevsky(alpha).sum(axis=1)
    )
    return (omega * lam).sum(axis=1) - h


# faces with one cusp --------------------------------------------------------


def _cusp_geometry(u2: np.ndarray, l3: np.ndarray):
    """Angles at the two finite corners of a face with an ideal third corner.

    In a chart with the cusp at infinity and the horocycle at height 1, the
    finite corners sit at heights y_j, y_k a fixed euclidean distance K apart.
    """
    ljk, lcj, lck = l3[:, 0], l3[:, 1], l3[:, 2]
    yj = np.exp(-u2[:, 0]) / lcj**2
    yk = np.exp(-u2[:, 1]) / lck**2
    kk = ljk / (lcj * lck)
    diff = yj - yk
    degenerate = np.abs(diff) >= kk
    beta = np.empty((len(yj), 2))
    ok = ~degenerate
    d = np.sqrt(np.maximum(kk[ok] ** 2 - diff[ok] ** 2, 0.0))
    beta[ok, 0] = np.arctan2(2.0 * d * yj[ok], kk[ok] ** 2 - 2.0 * yj[ok] * diff[ok])
    beta[ok, 1] = np.arctan2(2.0 * d * yk[ok], kk[ok] ** 2 + 2.0 * yk[ok] * diff[ok])
    # the higher corner sees the lower one straight down
    hi = diff[degenerate] > 0
    beta[degenerate, 0] = np.where(hi, math.pi, 0.0)
    beta[degenerate, 1] = np.where(hi, 0.0, math.pi)
    return beta, degenerate, np.log(yj), np.log(yk), kk


def _cusp_jacobian(beta, degenerate) -> np.ndarray:
    """d(beta_j, beta_k) / d(u_j, u_k), shape (n, 2, 2)."""
    jac = np.zeros((len(beta), 2, 2))
    ok = ~degenerate
    b, g = beta[ok, 0], beta[ok, 1]
    t = 0.5 * np.tan(0.5 * (b + g))
    p11 = 1.0 / np.tan(b) + t
    p22 = 1.0 / np.tan(g) + t
    det = p11 * p22 - t * t
    # (p11, t; t, p22) is d(-log y_j, -log y_k)/d(beta_j, beta_k); its inverse
    # is -d(beta)/d(u) since -log y_j = u_j + const
    jac[ok, 0, 0] = -p22 / det
    jac[ok, 0, 1] = t / det
    jac[ok, 1, 0] = t / det
    jac[ok, 1, 1] = -p11 / det
    return jac


def _cusp_potential(beta, logyj, logyk, kk) -> np.ndarray:
    b, g = beta[:, 0], beta[:, 1]
    sig = b + g
    return (
        -b * logyj
        - g * logyk
        + sig * (np.log(kk) - math.log(2.0))
        - 2.0 * lobachevsky(0.5 * (math.pi - sig))
        - lobachevsky(b)
        - lobachevsky(g)
    )


# assembled quantities -------------------------------------------------------


@dataclass
class FaceState:
    """Angles of every face corner for a given conformal factor."""

    angles: np.ndarray  # (F, 3), zero at cusp corners
    degenerate: np.ndarray  # (F,) bool
    potential: np.ndarray  # (F,)
    side_lengths: np.ndarray  # (F, 3) hyperbolic side lengths, inf on cusp sides


def face_state(mesh: TriMesh, u: np.ndarray) -> FaceState:
    fc = _faces(mesh)
    nf = mesh.n_faces
    angles = np.zeros((nf, 3))
    degen = np.zeros(nf, dtype=bool)
    pot = np.zeros(nf)
    sides = np.full((nf, 3), np.inf)
    if len(fc.fin):
        a, al, dg = _finite_geometry(u[fc.fin_v], fc.fin_l)
        angles[fc.fin] = al
        degen[fc.fin] = dg
        pot[fc.fin] = _finite_potential(u[fc.fin_v], fc.fin_l, al)
        sides[fc.fin] = a
    if len(fc.cus):
        beta, dg, lj, lk, kk = _cusp_geometry(u[fc.cus_v[:, :2]], fc.cus_l)
        c = fc.cus_roll
        angles[fc.cus[:, None], np.stack([(c + 1) % 3, (c + 2) % 3], axis=1)] = beta
        degen[fc.cus] = dg
        pot[fc.cus] = _cusp_potential(beta, lj, lk, kk)
        x = np.exp(0.5 * (u[fc.cus_v[:, 0]] + u[fc.cus_v[:, 1]])) * 0.5 * fc.cus_l[:, 0]
        sides[fc.cus, c] = 2.0 * np.arcsinh(x)
    return FaceState(angles, degen, pot, sides)


def angle_sums(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    st = face_state(mesh, u)
    return np.bincount(mesh.triangles.ravel(), weights=st.angles.ravel(), minlength=mesh.n_vertices)


def energy(mesh: TriMesh, u: np.ndarray) -> float:
    """Convex energy whose gradient is 2 pi minus the angle sum at finite vertices."""
    st = face_state(mesh, u)
    fin = ~mesh.cusp
    return float(TWO_PI * u[fin].sum() - st.potential.sum())


def gradient(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
    g = TWO_PI - angle_sums(mesh, u)
    g[mesh.cusp] = 0.0
    return g


def hessian(mesh: TriMesh, u: np.ndarray) -> sp.csr_matrix:
    """Hessian of :func:`energy`, i.e. minus the derivative of the angle sums."""
    fc = _faces(mesh)
    rows, cols, vals = [], [], []
    if len(fc.fin):
        a, al, dg = _finite_geometry(u[fc.fin_v], fc.fin_l)
        jac = _finite_jacobian(a, al, dg)
        v = fc.fin_v
        rows.append(np.repeat(v, 3, axis=1).ravel())
        cols.append(np.tile(v, (1, 3)).ravel())
        vals.append(-jac.ravel())
    if len(fc.cus):
        beta, dg, *_ = _cusp_geometry(u[fc.cus_v[:, :2]], fc.cus_l)
        jac = _cusp_jacobian(beta, dg)
        v = fc.cus_v[:, :2]
        rows.append(np.repeat(v, 2, axis=1).ravel())
        cols.append(np.tile(v, (1, 2)).ravel())
        vals.append(-jac.ravel())
    n = mesh.n_vertices
    h = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return h.tocsr()


# solver ---------------------------------------------------------------------


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual: float
    energy: float
    log: list[dict] = field(default_factory=list)

    def json_lines(self) -> str:
        return "\n".join(json.dumps(rec) for rec in self.log)


def initial_guess(mesh: TriMesh) -> np.ndarray:
    """Uniform scaling that gives the flat model the hyperbolic area 2 pi |chi|."""
    chi = mesh.euler_characteristic
    if chi >= 0:
        raise UniformizeError(f"surface of Euler characteristic {chi} is not hyperbolic")
    lf = mesh.lengths[mesh.tri_edges]
    s = 0.5 * lf.sum(axis=1)
    flat_area = np.sqrt(np.maximum(s * (s - lf[:, 0]) * (s - lf[:, 1]) * (s - lf[:, 2]), 0.0)).sum()
    u = np.full(mesh.n_vertices, math.log(TWO_PI * abs(chi) / flat_area))
    u[mesh.cusp] = 0.0
    return u


def solve(
    mesh: TriMesh,
    u0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    regularization: float = 1e-12,
    max_step: float = 1.0,
    log_stream=None,
) -> SolveReport:
    """Damped Newton minimization of :func:`energy`; writes the result into ``mesh.u``.

    Newton steps are clipped to ``max_step`` in the max norm.  The energy is
    only linear along directions where every face around a vertex has
    degenerated, so the regularized Newton step can be arbitrarily long there.
    """
    if mesh.euler_characteristic >= 0:
        raise UniformizeError(f"surface of Euler characteristic {mesh.euler_characteristic} is not hyperbolic")
    fin = np.flatnonzero(~mesh.cusp)
    u = initial_guess(mesh) if u0 is None else np.array(u0, dtype=float)
    e = energy(mesh, u)
    g = gradient(mesh, u)
    gn = float(np.max(np.abs(g)))
    log = []
    it = 0
    converged = gn < tol
    while not converged and it < max_iter:
        it += 1
        h = hessian(mesh, u)[fin][:, fin]
        h = h + regularization * sp.identity(len(fin), format="csr")
        step = np.zeros_like(u)
        step[fin] = -spla.spsolve(h.tocsc(), g[fin])
        big = float(np.max(np.abs(step)))
        if big > max_step:
            step *= max_step / big
        slope = float(g @ step)
        t = 1.0
        while True:
            un = u + t * step
            en = energy(mesh, un)
            gnew = gradient(mesh, un)
            gnn = float(np.max(np.abs(gnew)))
            # energy differences drown in roundoff near the minimum; then the
            # gradient norm decides
            flat = abs(en - e) <= 1e-12 * max(1.0, abs(e))
            if en <= e + 1e-4 * t * slope or (flat and gnn < gn):
                break
            t *= 0.5
            if t < 1e-12:
                raise UniformizeError(f"line search failed at iteration {it}, residual {gn:.3e}")
        u, e, g, gn = un, en, gnew, gnn
        rec = {"iteration": it, "energy": e, "gradient_norm": gn, "step": t}
        log.append(rec)
        if log_stream is not None:
            log_stream.write(json.dumps(rec) + "\n")
        converged = gn < tol
    mesh.u = u
    report = SolveReport(converged, it, gn, e, log)
    if not converged:
        raise UniformizeError(f"Newton did not converge after {it} iterations, residual {gn:.3e}")
    return report


def uniformize(mesh: TriMesh, **kwargs) -> TriMesh:
    """Return a copy of ``mesh`` carrying the hyperbolic conformal factors."""
    out = mesh.copy()
    report = solve(out, **kwargs)
    out.meta = dict(out.meta)
    out.meta["solve"] = {"iterations": report.iterations, "residual": report.residual, "energy": report.energy}
    return out


def hyperbolic_area(mesh: TriMesh, u: np.ndarray | None = None) -> float:
    """Total area: pi minus the angle sum per face (ideal corners contribute zero)."""
    st = face_state(mesh, mesh.u if u is None else u)
    return float((math.pi - st.angles.sum(axis=1)).sum())


# development and holonomy ---------------------------------------------------


def _lift(a: float) -> np.ndarray:
    e = math.exp(0.5 * a)
    return np.array([[e, 0.0], [0.0, 1.0 / e]])


def _turn(phi: float) -> np.ndarray:
    c, s = math.cos(0.5 * phi), math.sin(0.5 * phi)
    return np.array([[c, s], [-s, c]])


_HALF_TURN = _turn(math.pi)


class DevelopmentError(RuntimeError):
    """The developing map cannot pass through a face (degenerate triangle)."""


class Developer:
    """Face frames of a uniformized mesh.

    Every face gets a canonical placement in the upper half-plane: after
    rotating local indices so that a cusp corner (if any) is last, corner 0
    sits at i and corner 1 straight above it.  ``frame(f, m, n)`` is the
    isometry taking i to corner m with the upward direction pointing at
    corner n.
    """

    def __init__(self, mesh: TriMesh, u: np.ndarray | None = None):
        self.mesh = mesh
        st = face_state(mesh, mesh.u if u is None else u)
        self.angles = st.angles
        self.sides = st.side_lengths
        self.degenerate = st.degenerate
        # rotation so that the cusp corner (if any) becomes local slot 2
        rot = np.zeros(mesh.n_faces, dtype=np.int64)
        fc = _faces(mesh)
        rot[fc.cus] = (fc.cus_roll + 1) % 3
        self.rot = rot
        self._cache: dict[tuple[int, int, int], np.ndarray] = {}

    def frame(self, f: int, m: int, n: int) -> np.ndarray:
        """Frame at local corner m of face f pointing toward local corner n."""
        key = (f, m, n)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.degenerate[f]:
            raise DevelopmentError(f"face {f} is degenerate")
        r = self.rot[f]
        cm, cn = (m - r) % 3, (n - r) % 3  # canonical slots
        idx = lambda c: (c + r) % 3  # noqa: E731  canonical slot -> local corner
        al = self.angles[f]
        sd = self.sides[f]
        a01 = sd[idx(2)]  # side opposite canonical slot 2
        if (cm, cn) == (0, 1):
            out = np.eye(2)
        elif (cm, cn) == (1, 0):
            out = _lift(a01) @ _HALF_TURN
        elif (cm, cn) == (0, 2):
            out = _turn(al[idx(0)])
        elif (cm, cn) == (1, 2):
            out = _lift(a01) @ _HALF_TURN @ _turn(-al[idx(1)])
        elif (cm, cn) == (2, 0):
            out = _turn(al[idx(0)]) @ _lift(sd[idx(1)]) @ _HALF_TURN
        elif (cm, cn) == (2, 1):
            out = self.frame(f, m, idx(0)) @ _turn(al[idx(2)])
        else:
            raise ValueError("corner indices must differ")
        self._cache[key] = out
        return out

    def transition(self, f: int, g: int) -> np.ndarray:
        """Isometry carrying g's canonical placement onto its position next to f."""
        mesh = self.mesh
        k = mesh.shared_edge(f, g)
        p, q = mesh.triangles[f, (k + 1) % 3], mesh.triangles[f, (k + 2) % 3]
        if mesh.cusp[p]:
            p, q = q, p
        tf, tg = list(mesh.triangles[f]), list(mesh.triangles[g])
        ff = self.frame(f, tf.index(p), tf.index(q))
        fg = self.frame(g, tg.index(p), tg.index(q))
        # frames have det 1, so the inverse is the adjugate
        inv = np.array([[fg[1, 1], -fg[0, 1]], [-fg[1, 0], fg[0, 0]]])
        return ff @ inv

    def loop_holonomy(self, path) -> MobiusMap:
        """Deck transformation of a closed dual path (faces listed in order)."""
        acc = np.eye(2)
        path = [int(f) for f in path]
        for f, g in zip(path, path[1:] + path[:1]):
            acc = acc @ self.transition(f, g)
        return MobiusMap.from_array(acc)

    def develop(self, root: int = 0) -> np.ndarray:
        """Frames D_f placing every face relative to the root's canonical placement."""
        mesh = self.mesh
        adj = mesh.adjacency()
        dev = np.full((mesh.n_faces, 2, 2), np.nan)
        dev[root] = np.eye(2)
        queue = [root]
        head = 0
        while head < len(queue):
            f = queue[head]
            head += 1
            for k in range(3):
                g = int(adj[f, k, 0])
                if np.isnan(dev[g, 0, 0]) and not self.degenerate[g]:
                    dev[g] = dev[f] @ self.transition(f, g)
                    queue.append(g)
        return dev

    def corner_positions(self, dev: np.ndarray) -> np.ndarray:
        """Developed position of every face corner; ideal corners are real."""
        mesh = self.mesh
        out = np.full((mesh.n_faces, 3), np.nan + 0j)
        for f in range(mesh.n_faces):
            if np.isnan(dev[f, 0, 0]):
                continue
            tri = mesh.triangles[f]
            for m in range(3):
                if mesh.cusp[tri[m]]:
                    n = next(x for x in range(3) if x != m)
                    g = dev[f] @ self.frame(f, n, m)
                    out[f, m] = g[0, 0] / g[1, 0] if g[1, 0] != 0 else np.inf
                else:
                    n = (m + 1) % 3 if not mesh.cusp[tri[(m + 1) % 3]] else (m + 2) % 3
                    g = dev[f] @ self.frame(f, m, n)
                    out[f, m] = (g[0, 0] * 1j + g[0, 1]) / (g[1, 0] * 1j + g[1, 1])
        return out


def holonomy(mesh: TriMesh, loops=None, u: np.ndarray | None = None) -> dict[str, MobiusMap]:
    """Deck transformations of named dual loops, all based at the first face of each loop."""
    dev = Developer(mesh, u)
    names = mesh.loops.keys() if loops is None else loops
    return {name: dev.loop_holonomy(mesh.loops[name]) for name in names}


def marked_holonomy(mesh: TriMesh, template, formulas: dict, u: np.ndarray | None = None):
    """Marked group whose generators are words in the mesh's loop holonomies.

    ``template`` supplies the pants words, curve sides and relations;
    ``formulas[name]`` is a word over loop names giving generator ``name``.
    """
    from .pants import MarkedGroup, evaluate

    hol = holonomy(mesh, None, u)
    gens = {name: evaluate(word, hol) for name, word in formulas.items()}
    return MarkedGroup(gens, dict(template.pants), dict(template.curve_sides), list(template.relations))


def measure_surface(mesh: TriMesh, pd, template, formulas: dict, u: np.ndarray | None = None):
    """Fenchel-Nielsen coordinates of a uniformized, marked mesh."""
    from .pants import measure_fn

    return measure_fn(marked_holonomy(mesh, template, formulas, u), pd)


def geodesic_length(mesh: TriMesh, loop: str, u: np.ndarray | None = None) -> float:
    """Length of the closed geodesic freely homotopic to a marked loop (0 when parabolic)."""
    return classify(holonomy(mesh, [loop], u)[loop])[1]


def path_length_estimate(mesh: TriMesh, loop: str, u: np.ndarray | None = None) -> float:
    """Length of the shortest loop through a developed vertex of the strip along ``loop``.

    This is an upper bound for the geodesic length that shrinks with the mesh size;
    it cross-checks the trace-based value without using the trace.
    """
    from .hyp_core import distance

    dev = Developer(mesh, u)
    path = [int(f) for f in mesh.loops[loop]]
    frames = [np.eye(2)]
    for f, g in zip(path, path[1:] + path[:1]):
        frames.append(frames[-1] @ dev.transition(f, g))
    gam = MobiusMap.from_array(frames[-1])
    best = math.inf
    for f, d in zip(path, frames[:-1]):
        tri = mesh.triangles[f]
        for m in range(3):
            if mesh.cusp[tri[m]]:
                continue
            n = (m + 1) % 3 if not mesh.cusp[tri[(m + 1) % 3]] else (m + 2) % 3
            g = d @ dev.frame(f, m, n)
            z = complex((g[0, 0] * 1j + g[0, 1]) / (g[1, 0] * 1j + g[1, 1]))
            best = min(best, distance(z, gam(z)))
    return best
