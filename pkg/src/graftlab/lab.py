"""Experiment harness: grafting sweeps, lemma audits and static plots.

Everything here returns plain rows so the CLI and the acceptance tests share
one code path.  Rows are computed by a thread pool and always assembled in
input order, and floats are written with a fixed format, so a given config
and seed reproduce the output byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cylinders as cyl
from . import distortion as dist
from .grafting import SpecError, SurfaceSpec, build_Sinfty_mesh, build_St_mesh, limiting_angles, predicted_twist
from .hyp_core import classify
from .pants import group_distance, half_twist, half_twist_distance, measure_fn
from .uniformize import UniformizeError, solve

CONFIG_SCHEMA = 1
FLOAT = "{:.10g}"

SWEEP_COLUMNS = (
    "t",
    "length_alpha",
    "pinch_bound",
    "length_times_t",
    "half_twist",
    "half_twist_unrolled",
    "group_distance",
    "status",
)
COLLAR_COLUMNS = ("case", "length", "modulus", "lower", "upper", "pass")
NONSQUEEZE_COLUMNS = ("case", "n", "modulus", "modulus_lower", "largest_straight", "required", "slack", "pass")
DISTORTION_COLUMNS = ("map_id", "b", "c", "empirical_sup", "bound", "margin", "lemma_violations", "pass")
MODULUS_COLUMNS = ("case", "n", "modulus", "modulus_lower", "largest_straight", "oracle", "lower_bound", "upper_bound", "pass")


class ConfigError(ValueError):
    """Malformed sweep configuration."""


def fmt(v) -> str:
    if isinstance(v, bool):
        return "pass" if v else "FAIL"
    if isinstance(v, (float, np.floating)):
        return FLOAT.format(float(v))
    return str(v)


def write_csv(rows: list[dict], columns, footer: list[tuple[str, object]] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c, "")) for c in columns])
    if footer:
        w.writerow([])
        for key, value in footer:
            w.writerow([key, fmt(value)])
    return buf.getvalue()


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# sweep ------------------------------------------------------------------------


@dataclass
class SweepConfig:
    surface: SurfaceSpec
    t_grid: list[float]
    resolution: int = 32
    H: float = 8.0
    seed: int = 0
    twist_tolerance: float = 1e-2

    def __post_init__(self):
        if len(self.t_grid) < 2 or any(b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ConfigError("t_grid must have at least two strictly increasing values")
        if self.t_grid[0] <= 0:
            raise ConfigError("t_grid values must be positive")
        if not 8 <= self.resolution <= 256 or self.resolution % 2:
            raise ConfigError("resolution must be an even integer in [8, 256]")
        if not 1.0 <= self.H <= 32.0:
            raise ConfigError("H must lie in [1, 32]")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        if d.get("schema") != CONFIG_SCHEMA:
            raise ConfigError(f"field 'schema': expected {CONFIG_SCHEMA}, got {d.get('schema')!r}")
        try:
            surf = d["surface"]
            surface = SurfaceSpec(
                shear=float(surf.get("shear", 0.0)),
                height=float(surf.get("height", 1.0)),
                punctures=[tuple(map(float, p)) for p in surf.get("punctures", [(0.5, 0.5)])],
                mode=surf.get("mode", "flat-strebel"),
            )
        except KeyError as exc:
            raise ConfigError(f"missing field {exc}") from None
        except (SpecError, TypeError, ValueError) as exc:
            raise ConfigError(f"field 'surface': {exc}") from None
        if "t" in d:
            grid = [float(x) for x in d["t"]]
        elif "t_geometric" in d:
            g = d["t_geometric"]
            try:
                grid = [float(g["start"]) * float(g["ratio"]) ** k for k in range(int(g["count"]))]
            except KeyError as exc:
                raise ConfigError(f"field 't_geometric' is missing {exc}") from None
        else:
            raise ConfigError("one of the fields 't' or 't_geometric' is required")
        known = {"schema", "surface", "t", "t_geometric", "resolution", "H", "seed", "twist_tolerance"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown field(s) {', '.join(unknown)}")
        return cls(
            surface=surface,
            t_grid=grid,
            resolution=int(d.get("resolution", 32)),
            H=float(d.get("H", 8.0)),
            seed=int(d.get("seed", 0)),
            twist_tolerance=float(d.get("twist_tolerance", 1e-2)),
        )

    @classmethod
    def load(cls, path) -> "SweepConfig":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls.from_dict(data)


@dataclass
class SweepResult:
    rows: list[dict]
    footer: list[tuple[str, object]]
    columns: tuple[str, ...]
    diagnostics: list[dict]

    def csv(self) -> str:
        return write_csv(self.rows, self.columns, self.footer)

    def footer_value(self, key: str):
        return dict(self.footer)[key]


def unroll(values: list[float]) -> list[float]:
    """Continuous lift of a sequence of half-twists: each value is moved by multiples of 1/2
    to the representative nearest its predecessor."""
    out = []
    for v in values:
        if not out or not math.isfinite(v):
            out.append(v)
            continue
        prev = next((p for p in reversed(out) if math.isfinite(p)), v)
        out.append(v + 0.5 * round((prev - v) / 0.5))
    return out


def fit_twist_limit(ts, thetas) -> tuple[float, float]:
    """Fit theta(t) = limit + B e^{-pi t} on the upper half of the grid; returns (limit, B)."""
    ts, thetas = np.asarray(ts, float), np.asarray(thetas, float)
    ok = np.isfinite(thetas)
    ts, thetas = ts[ok], thetas[ok]
    k = max(2, len(ts) // 2)
    ts, thetas = ts[-k:], thetas[-k:]
    basis = np.stack([np.ones_like(ts), np.exp(-math.pi * ts)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, thetas, rcond=None)
    return float(coef[0]), float(coef[1])


def _sweep_row(cfg: SweepConfig, t: float, limit_group) -> tuple[dict, dict]:
    spec = cfg.surface
    pd = spec.decomposition
    alpha = spec.curve
    t0 = time.perf_counter()
    row = {"t": t, "pinch_bound": math.pi / t}
    diag = {"t": t}
    try:
        model = build_St_mesh(spec, t, cfg.resolution)
        report = solve(model.mesh)
        group = model.marked_group()
        fn = measure_fn(group, pd)
    except (UniformizeError, SpecError, ValueError) as exc:
        row.update(status=f"error: {exc}")
        diag.update(status="error", message=str(exc))
        return row, diag
    row["length_alpha"] = fn.lengths[alpha]
    row["length_times_t"] = fn.lengths[alpha] * t
    row["half_twist"] = half_twist(fn.twists[alpha])
    for c in pd.curves:
        if c != alpha:
            row[f"length_{c}"] = fn.lengths[c]
            row[f"twist_{c}"] = fn.twists[c]
    row["group_distance"] = group_distance(group, limit_group) if limit_group is not None else math.nan
    row["status"] = "ok"
    diag.update(
        status="ok",
        iterations=report.iterations,
        residual=report.residual,
        relation_residual=group.relation_residual(),
        seconds=round(time.perf_counter() - t0, 3),
    )
    return row, diag


def graft_sweep(cfg: SweepConfig, threads: int = 1) -> SweepResult:
    spec = cfg.surface
    pd = spec.decomposition
    alpha = spec.curve
    diagnostics = []
    limit_group = None
    footer: list[tuple[str, object]] = []
    try:
        lim = build_Sinfty_mesh(spec, cfg.H, cfg.resolution)
        report = solve(lim.mesh)
        limit_group = lim.marked_group()
        theta_p, theta_m, _ = limiting_angles(lim)
        prediction = predicted_twist(theta_p, theta_m)
        diagnostics.append({"t": "inf", "status": "ok", "iterations": report.iterations, "residual": report.residual})
    except (UniformizeError, SpecError, ValueError) as exc:
        theta_p = theta_m = prediction = math.nan
        diagnostics.append({"t": "inf", "status": "error", "message": str(exc)})
    results = _pool_map(lambda t: _sweep_row(cfg, t, limit_group), cfg.t_grid, threads)
    rows = [r for r, _ in results]
    diagnostics += [d for _, d in results]
    raw = [r.get("half_twist", math.nan) for r in rows]
    for r, v in zip(rows, unroll(raw)):
        r["half_twist_unrolled"] = v
    extra = [c for c in pd.curves if c != alpha]
    columns = list(SWEEP_COLUMNS[:-1])
    for c in extra:
        columns += [f"length_{c}", f"twist_{c}"]
    columns.append("status")
    ts = [r["t"] for r in rows]
    unrolled = [r["half_twist_unrolled"] for r in rows]
    if sum(math.isfinite(v) for v in unrolled) >= 2:
        limit, amp = fit_twist_limit(ts, unrolled)
    else:
        limit = amp = math.nan
    last = next((v for v in reversed(unrolled) if math.isfinite(v)), math.nan)
    disc = half_twist_distance(limit, prediction) if math.isfinite(limit) and math.isfinite(prediction) else math.nan
    footer = [
        ("theta_plus_inf", theta_p),
        ("theta_minus_inf", theta_m),
        ("predicted_limit", prediction),
        ("extrapolated_limit", half_twist(limit) if math.isfinite(limit) else limit),
        ("fit_amplitude", amp),
        ("last_raw", half_twist(last) if math.isfinite(last) else last),
        ("discrepancy", disc),
        ("within_tolerance", bool(math.isfinite(disc) and disc < cfg.twist_tolerance)),
    ]
    if limit_group is not None:
        for c in extra:
            footer.append((f"length_{c}_inf", classify(limit_group.curve_element(c))[1]))
    return SweepResult(rows, footer, tuple(columns), diagnostics)


# audits -----------------------------------------------------------------------


@dataclass
class AuditResult:
    rows: list[dict]
    columns: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    @property
    def failures(self) -> int:
        return sum(not r["pass"] for r in self.rows)

    def csv(self) -> str:
        return write_csv(self.rows, self.columns)


def collar_audit(count: int = 1000, seed: int = 0, tol: float = 1e-12) -> AuditResult:
    rng = np.random.default_rng(seed)
    rows = []
    for k, ell in enumerate(rng.uniform(0.01, math.pi - 0.01, count)):
        lo, hi, m = cyl.collar_modulus_bounds(float(ell))
        rows.append(dict(case=k, length=float(ell), modulus=m, lower=lo, upper=hi, **{"pass": lo - tol <= m <= hi + tol}))
    return AuditResult(rows, COLLAR_COLUMNS)


def nonsqueeze_case(region: cyl.GridRegion, slack_factor: float = 10.0) -> dict:
    est = cyl.grid_modulus_bounds(region)
    largest = cyl.largest_straight_subcylinder(region)
    slack = slack_factor * region.h
    required = est.value - 1.0 - slack
    return dict(
        n=region.n,
        modulus=est.value,
        modulus_lower=est.lower,
        largest_straight=largest,
        required=required,
        slack=slack,
        **{"pass": largest >= required},
    )


def nonsqueeze_audit(count: int = 50, seed: int = 0, n: int = 128, refine: bool = False, threads: int = 1) -> AuditResult:
    """Random notched cylinders at spacing 1/n (and 1/2n when ``refine``)."""
    rng = np.random.default_rng(seed)
    shapes = [cyl.NotchedCylinder.random(rng) for _ in range(count)]
    jobs = [(k, s, n) for k, s in enumerate(shapes)]
    if refine:
        jobs += [(k, s, 2 * n) for k, s in enumerate(shapes)]

    def run(job):
        k, s, nn = job
        return dict(case=k, **nonsqueeze_case(s.region(nn)))

    return AuditResult(_pool_map(run, jobs, threads), NONSQUEEZE_COLUMNS)


def distortion_audit(
    count: int = 100, seed: int = 0, eps: float = 1e-3, b_range=(4.0, 8.0), c: float | None = None, threads: int = 1
) -> AuditResult:
    """Identity map plus ``count`` random certified maps; c defaults to buffer_for_epsilon(eps)."""
    rng = np.random.default_rng(seed)
    c = dist.buffer_for_epsilon(eps) if c is None else c
    specs = [dist.StripMapSpec(float(b_range[1]))]
    specs += [dist.random_strip_map(rng, float(rng.uniform(*b_range))) for _ in range(count)]

    def run(item):
        k, spec = item
        a = dist.audit_map(spec, c)
        return dict(
            map_id="identity" if k == 0 else k,
            b=a.b,
            c=a.c,
            empirical_sup=a.empirical,
            bound=a.bound,
            margin=a.margin,
            lemma_violations=a.lemma_violations,
            **{"pass": a.passed},
        )

    return AuditResult(_pool_map(run, list(enumerate(specs)), threads), DISTORTION_COLUMNS)


def modulus_case(name: str, region: cyl.GridRegion, oracle: float = math.nan, bounds=(math.nan, math.nan), rel: float = 0.01) -> dict:
    est = cyl.grid_modulus_bounds(region)
    ok = True
    if math.isfinite(bounds[0]):
        ok &= bounds[0] <= est.value <= bounds[1]
    if math.isfinite(oracle):
        ok &= abs(est.value - oracle) <= rel * oracle
    return dict(
        case=name,
        n=region.n,
        modulus=est.value,
        modulus_lower=est.lower,
        largest_straight=cyl.largest_straight_subcylinder(region),
        oracle=oracle,
        lower_bound=bounds[0],
        upper_bound=bounds[1],
        **{"pass": bool(ok)},
    )


def modulus_audit(bs=(1.0, 2.0, 4.0), n: int = 128, reach: float = 4.0, regions=(), threads: int = 1) -> AuditResult:
    """Teichmüller rings for each b, plus any region files given."""
    jobs = [("teichmuller b=" + fmt(float(b)), float(b)) for b in bs] + [(str(p), p) for p in regions]

    def run(job):
        name, what = job
        if isinstance(what, float):
            r = cyl.GridRegion.teichmuller(what, n, reach)
            return modulus_case(name, r, cyl.teichmuller_modulus(what), cyl.teichmuller_bounds(what))
        return modulus_case(name, cyl.GridRegion.load(what))

    return AuditResult(_pool_map(run, jobs, threads), MODULUS_COLUMNS)


# plots ------------------------------------------------------------------------


def svg_plot(xs, ys, title: str, xlabel: str, ylabel: str, logx: bool = False, logy: bool = False, reference=None) -> str:
    """Standalone SVG line plot; ``reference`` adds a dashed horizontal line."""
    pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y) and (not logx or x > 0) and (not logy or y > 0)]
    W, Hh, pad = 480, 320, 50

    def tx(v, log):
        return math.log10(v) if log else v

    if not pts:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{Hh}"><text x="10" y="20">{title}: no data</text></svg>\n'
    X = [tx(x, logx) for x, _ in pts]
    Y = [tx(y, logy) for _, y in pts]
    if reference is not None and math.isfinite(reference):
        Y_all = Y + [tx(reference, logy)]
    else:
        Y_all = Y
    x0, x1 = min(X), max(X)
    y0, y1 = min(Y_all), max(Y_all)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(v):
        return pad + (v - x0) / (x1 - x0) * (W - 2 * pad)

    def py(v):
        return Hh - pad - (v - y0) / (y1 - y0) * (Hh - 2 * pad)

    poly = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(X, Y))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{Hh}" font-family="sans-serif" font-size="12">',
        f'<text x="{W / 2}" y="20" text-anchor="middle">{title}</text>',
        f'<line x1="{pad}" y1="{Hh - pad}" x2="{W - pad}" y2="{Hh - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{Hh - pad}" stroke="black"/>',
        f'<text x="{W / 2}" y="{Hh - 10}" text-anchor="middle">{xlabel}{" (log)" if logx else ""}</text>',
        f'<text x="15" y="{Hh / 2}" transform="rotate(-90 15 {Hh / 2})" text-anchor="middle">{ylabel}{" (log)" if logy else ""}</text>',
        f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{poly}"/>',
    ]
    for a, b in zip(X, Y):
        out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="steelblue"/>')
    if reference is not None and math.isfinite(reference):
        r = py(tx(reference, logy))
        out.append(f'<line x1="{pad}" y1="{r:.2f}" x2="{W - pad}" y2="{r:.2f}" stroke="firebrick" stroke-dasharray="5,4"/>')
    for v, label in ((x0, x0), (x1, x1)):
        out.append(f'<text x="{px(v):.2f}" y="{Hh - pad + 15}" text-anchor="middle">{FLOAT.format(10 ** label if logx else label)}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{pad - 4}" y="{py(v) + 4:.2f}" text-anchor="end">{FLOAT.format(10 ** v if logy else v)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_sweep_outputs(result: SweepResult, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    ts = [r["t"] for r in result.rows]
    paths = {
        "sweep.csv": result.csv(),
        "diagnostics.jsonl": "".join(json.dumps(d, sort_keys=True) + "\n" for d in result.diagnostics),
        "twist.svg": svg_plot(
            ts,
            [r.get("half_twist_unrolled", math.nan) for r in result.rows],
            "half-twist about the grafting curve",
            "t",
            "half-twist",
            reference=result.footer_value("predicted_limit"),
        ),
        "length.svg": svg_plot(
            ts,
            [r.get("length_alpha", math.nan) for r in result.rows],
            "length of the grafting curve",
            "t",
            "length",
            logx=True,
            logy=True,
        ),
    }
    written = []
    for name, text in paths.items():
        p = out / name
        p.write_text(text)
        written.append(p)
    return written
