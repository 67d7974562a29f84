"""Explicit distortion bounds for conformal embeddings of long flat cylinders, and an audit corpus.

A map in the audited family is a Z-equivariant holomorphic function on the
strip B(b) = {|Im z| < b} of the form

    f(z) = z + sum_{k != 0} a_k (e^{2 pi i k z} - 1),

so f(0) = 0 and f(z + 1) = f(z) + 1.  When sum 2 pi |k| |a_k| e^{2 pi |k| b} < 1
we have |f' - 1| < 1 on B(b), hence f is injective there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Evaluated with mpmath at 50 significant digits:
#   C1 = sqrt(8 / pi)
#   C2 = 8 pi e^{5 pi} (C1 + 1)
C1 = 1.5957691216057307117597842397375274739034345246597
C2 = 432900104.65161026680983773644756555709213643843277


class DomainError(ValueError):
    """Bound requested outside the range where it is proved."""


class CertificateError(ValueError):
    """Strip map without a univalence certificate."""


def bound_fprime(b: float | None = None) -> float:
    """Bound C1 on |f'| over B(b - 5/2)."""
    if b is not None and not b > 3:
        raise DomainError(f"need b > 3, got {b}")
    return C1


def bound_fsecond(y: float, b: float) -> float:
    if not abs(y) < b - 3:
        raise DomainError(f"need |y| < b - 3, got y={y}, b={b}")
    return C2 * math.exp(2 * math.pi * (abs(y) - b))


def bound_fprime_real(b: float) -> float:
    if not b > 3:
        raise DomainError(f"need b > 3, got {b}")
    return C2 * (b + 1) * math.exp(-2 * math.pi * b)


def bound_displacement(y: float, b: float) -> float:
    if not abs(y) < b - 3:
        raise DomainError(f"need |y| < b - 3, got y={y}, b={b}")
    return C2 * (math.exp(2 * math.pi * abs(y)) + (b + 1) ** 2) * math.exp(-2 * math.pi * b)


def buffer_profile(c: float) -> float:
    """Worst displacement bound over the strips B(b - c), attained at b = c and y = 0."""
    return C2 * math.exp(-2 * math.pi * c) * (1 + (c + 1) ** 2)


def buffer_for_epsilon(eps: float, tol: float = 1e-12) -> float:
    """Smallest c >= 1 with buffer_profile(c) <= eps (bisection; the profile decreases on c >= 1)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    lo, hi = 1.0, 2.0
    if buffer_profile(lo) <= eps:
        return lo
    while buffer_profile(hi) > eps:
        lo, hi = hi, 2 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if buffer_profile(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class StripMapSpec:
    """Finite Fourier perturbation of the identity on the strip of half-height b."""

    b: float
    coeffs: tuple[tuple[int, complex], ...] = ()

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        if any(k == 0 for k, _ in self.coeffs):
            raise ValueError("mode 0 is not allowed")

    @property
    def certificate(self) -> float:
        return sum(2 * math.pi * abs(k) * abs(a) * math.exp(2 * math.pi * abs(k) * self.b) for k, a in self.coeffs)

    @property
    def certified(self) -> bool:
        return self.certificate < 1.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = z.copy()
        for k, a in self.coeffs:
            out = out + a * (np.exp(2j * math.pi * k * z) - 1.0)
        return out

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for k, a in self.coeffs:
            out = out + 2j * math.pi * k * a * np.exp(2j * math.pi * k * z)
        return out

    def second_derivative(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for k, a in self.coeffs:
            out = out - (2 * math.pi * k) ** 2 * a * np.exp(2j * math.pi * k * z)
        return out

    def lipschitz_defect(self, ymax: float) -> float:
        """Upper bound on |f' - 1| over |Im z| <= ymax."""
        return sum(2 * math.pi * abs(k) * abs(a) * math.exp(2 * math.pi * abs(k) * ymax) for k, a in self.coeffs)

    def to_json(self) -> dict:
        return {"b": self.b, "coeffs": [[k, a.real, a.imag] for k, a in self.coeffs]}

    @classmethod
    def from_json(cls, d: dict) -> "StripMapSpec":
        return cls(float(d["b"]), tuple((int(k), complex(re, im)) for k, re, im in d["coeffs"]))


def random_strip_map(rng: np.random.Generator, b: float, max_mode: int = 4) -> StripMapSpec:
    """Random certified map: a few modes scaled so the certificate sum lands in (0.2, 0.95)."""
    modes = [k for k in range(-max_mode, max_mode + 1) if k]
    picked = rng.choice(modes, size=int(rng.integers(1, len(modes) + 1)), replace=False)
    raw = [(int(k), complex(rng.normal(), rng.normal())) for k in sorted(picked)]
    weight = sum(2 * math.pi * abs(k) * abs(a) * math.exp(2 * math.pi * abs(k) * b) for k, a in raw)
    target = rng.uniform(0.2, 0.95)
    return StripMapSpec(b, tuple((k, a * target / weight) for k, a in raw))


def _grid(ymax: float, spacing: float):
    nx = max(4, math.ceil(1.0 / spacing))
    ny = max(1, math.ceil(2 * ymax / spacing)) if ymax > 0 else 0
    x = np.arange(nx) / nx
    y = np.linspace(-ymax, ymax, ny + 1) if ny else np.zeros(1)
    diag = math.hypot(1.0 / nx, (2 * ymax / ny) if ny else 0.0)
    return x[None, :] + 1j * y[:, None], diag


def empirical_distortion(spec: StripMapSpec, c: float, eps_grid: float = 0.05) -> float:
    """Certified upper estimate of sup |f(z) - z| over B(b - c), or 0 when that strip is empty.

    Samples a grid whose cell diagonal is at most eps_grid / C1 and adds the
    Lipschitz correction (sup |f' - 1|) * diag / 2, with sup |f' - 1| bounded
    from the Fourier coefficients.
    """
    if not spec.certified:
        raise CertificateError(f"certificate sum {spec.certificate:.3g} is not below 1")
    if c < 3:
        raise DomainError(f"buffer must be at least 3, got {c}")
    ymax = spec.b - c
    if ymax < 0:
        return 0.0
    z, diag = _grid(ymax, eps_grid / C1 / math.sqrt(2))
    sup = float(np.abs(spec(z) - z).max())
    return sup + 0.5 * diag * spec.lipschitz_defect(ymax)


@dataclass(frozen=True)
class AuditRow:
    b: float
    c: float
    empirical: float
    bound: float
    lemma_violations: int

    @property
    def margin(self) -> float:
        return self.bound - self.empirical

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound and self.lemma_violations == 0


def audit_map(spec: StripMapSpec, c: float, samples: int = 64) -> AuditRow:
    """Check the theorem on B(b - c) and the pointwise lemma bounds on B(b - 3)."""
    b = spec.b
    empirical = empirical_distortion(spec, c)
    bound = bound_displacement(b - c, b) if b >= c else buffer_profile(c)
    violations = 0
    if b > 3:
        x = np.arange(samples) / samples
        ys = np.linspace(-(b - 3), b - 3, samples + 2)[1:-1]
        z = x[None, :] + 1j * ys[:, None]
        disp = np.abs(spec(z) - z)
        lim = np.array([bound_displacement(y, b) for y in ys])[:, None]
        violations += int((disp > lim).sum())
        violations += int((np.abs(spec.derivative(x) - 1) > bound_fprime_real(b)).sum())
        y25 = np.linspace(-(b - 2.5), b - 2.5, samples)
        z25 = x[None, :] + 1j * y25[:, None]
        violations += int((np.abs(spec.derivative(z25)) > C1).sum())
        fs = np.abs(spec.second_derivative(z))
        lim2 = np.array([bound_fsecond(y, b) for y in ys])[:, None]
        violations += int((fs > lim2).sum())
    return AuditRow(b, c, empirical, bound, violations)
