"""Acceptance gate: one test per criterion, each printing a single pass/fail line."""

import math

import numpy as np
import pytest

from graftlab import lab
from graftlab.distortion import buffer_for_epsilon
from graftlab.grafting import SurfaceSpec, build_St_mesh
from graftlab.pants import FNCoords, build_group, half_twist_distance, measure_fn, punctured_torus
from graftlab.remesh import group_mesh, punctured_torus_marking
from graftlab.uniformize import energy, gradient, hyperbolic_area, initial_guess, measure_surface, solve

PUNCTURED_TORUS = SurfaceSpec(shear=0.25, height=1.0, punctures=[(0.5, 0.5)])


@pytest.fixture
def report(capsys):
    def emit(criterion: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[acceptance {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")

    return emit


def _length_times_t(t, n):
    model = build_St_mesh(PUNCTURED_TORUS, t, n)
    solve(model.mesh)
    fn = measure_fn(model.marked_group(), PUNCTURED_TORUS.decomposition)
    return fn.lengths[PUNCTURED_TORUS.curve] * t


def test_criterion_1_pinching(report):
    ts = (1.0, 2.0, 4.0, 8.0)
    coarse = [_length_times_t(t, 32) for t in ts]
    fine = [_length_times_t(t, 64) for t in ts]
    ok = max(coarse) <= math.pi + 0.05 and max(fine) <= math.pi + 0.01
    report(1, ok, "l*t at n=32 " + ", ".join(f"{v:.4f}" for v in coarse) + "; n=64 " + ", ".join(f"{v:.4f}" for v in fine))
    assert ok


def _sweep(surface, ts, resolution=32):
    cfg = lab.SweepConfig(surface=surface, t_grid=list(ts), resolution=resolution, H=8.0)
    return lab.graft_sweep(cfg, threads=2)


def test_criterion_2_twist_convergence(report):
    details, ok = [], True
    cases = [
        ("once-punctured", PUNCTURED_TORUS, 32),
        ("twice-punctured", SurfaceSpec(shear=0.25, punctures=[(0.25, 0.375), (0.625, 0.625)]), 32),
    ]
    for name, surface, n in cases:
        res = _sweep(surface, (2.0, 3.0, 4.0, 6.0, 8.0), n)
        tw = [r["half_twist_unrolled"] for r in res.rows]
        step = abs(tw[-1] - tw[-2])
        disc = res.footer_value("discrepancy")
        ok &= step < 1e-2 and disc < 1e-2
        details.append(f"{name}: |theta(8)-theta(6)|={step:.2e}, |limit-prediction|={disc:.2e}")
    report(2, ok, "; ".join(details))
    assert ok


def test_criterion_3_thick_part(report):
    surface = SurfaceSpec(shear=0.25, height=2.0, punctures=[(7 / 16, 1.0), (9 / 16, 1.0)])
    res = _sweep(surface, (2.0, 3.0, 4.0, 6.0, 8.0))
    others = [c for c in surface.decomposition.curves if c != surface.curve]
    diffs = {c: abs(res.rows[-1][f"length_{c}"] - res.footer_value(f"length_{c}_inf")) for c in others}
    dist = [r["group_distance"] for r in res.rows]
    monotone = all(b < a for a, b in zip(dist, dist[1:]))
    ok = bool(others) and all(d < 1e-2 for d in diffs.values()) and monotone
    detail = ", ".join(f"|l_{c}(S_8)-l_{c}(S_inf)|={d:.2e}" for c, d in diffs.items())
    report(3, ok, f"{detail}; group distance " + " > ".join(f"{d:.3g}" for d in dist))
    assert ok


def test_criterion_4_collar(report):
    res = lab.collar_audit(1000, seed=0, tol=1e-12)
    report(4, res.passed, f"{len(res.rows) - res.failures}/{len(res.rows)} collar moduli inside [pi/l - 1, pi/l]")
    assert res.passed


def test_criterion_5_non_squeezing(report):
    res = lab.nonsqueeze_audit(50, seed=0, n=128, refine=True, threads=4)
    by_n = {}
    for r in res.rows:
        by_n.setdefault(r["n"], []).append(r["largest_straight"] - r["required"])
    worst = {n: min(v) for n, v in by_n.items()}
    report(5, res.passed, f"{len(res.rows) - res.failures}/{len(res.rows)} regions pass; worst margin " + ", ".join(f"n={n}: {m:.3f}" for n, m in worst.items()))
    assert res.passed


def test_criterion_6_teichmuller(report):
    res = lab.modulus_audit((1.0, 2.0, 4.0), n=128, threads=3)
    detail = ", ".join(f"b={r['case'].split('=')[1]}: {r['modulus']:.5f} vs {r['oracle']:.5f} in [{r['lower_bound']:.4f}, {r['upper_bound']:.4f}]" for r in res.rows)
    report(6, res.passed, detail)
    assert res.passed


def test_criterion_7_distortion(report):
    res = lab.distortion_audit(100, seed=0, eps=1e-3, b_range=(4.0, 8.0))
    identity = res.rows[0]
    ok = res.passed and identity["margin"] == identity["bound"] and identity["c"] == buffer_for_epsilon(1e-3)
    violations = sum(r["lemma_violations"] for r in res.rows)
    report(7, ok, f"{res.failures} failed maps, {violations} lemma violations, c={identity['c']:.4f}, identity margin={identity['margin']:.3e}")
    assert ok


def test_criterion_8_uniformizer(report):
    pd = punctured_torus()
    rng = np.random.default_rng(0)
    worst_fn = 0.0
    for length, twist in [(2.0, 0.0), (1.0, 0.1), (3.0, 0.37), (0.7, -0.2)]:
        g = build_group(FNCoords({"a": length}, {"a": twist}), pd)
        m = group_mesh(g)
        r = rng.normal(0, 0.3, m.n_vertices)
        r[m.cusp] = 0
        e = m.edges
        m.lengths = m.lengths * np.exp(0.5 * (r[e[:, 0]] + r[e[:, 1]]))
        solve(m)
        out = measure_surface(m, pd, g, punctured_torus_marking())
        worst_fn = max(worst_fn, abs(out.lengths["a"] - length), half_twist_distance(out.twists["a"], twist))

    model = build_St_mesh(PUNCTURED_TORUS, 1.0, 32)
    mesh = model.mesh
    solve(mesh)
    chi = mesh.euler_characteristic
    area_err = abs(hyperbolic_area(mesh) + 2 * math.pi * chi)

    # a generic point away from the minimum, where the gradient is not small
    u0 = initial_guess(mesh) + rng.normal(0, 0.2, mesh.n_vertices) * ~mesh.cusp
    g0 = gradient(mesh, u0)
    h = 1e-3
    exact, fd = [], []
    for _ in range(100):
        d = rng.normal(size=mesh.n_vertices) * ~mesh.cusp
        d /= np.linalg.norm(d)
        e = [energy(mesh, u0 + k * h * d) for k in (-2, -1, 1, 2)]
        fd.append((8 * (e[2] - e[1]) - (e[3] - e[0])) / (12 * h))
        exact.append(g0 @ d)
    exact, fd = np.array(exact), np.array(fd)
    worst_grad = np.linalg.norm(fd - exact) / np.linalg.norm(exact)

    ok = worst_fn < 1e-3 and area_err < 1e-6 * abs(chi) and worst_grad < 1e-6
    report(8, ok, f"FN round trip {worst_fn:.2e}, area error {area_err:.2e}, gradient rel. error {worst_grad:.2e}")
    assert ok
