"""Clausen and Lobachevsky functions, vectorized over numpy arrays."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def _bernoulli_even(n: int) -> list[Fraction]:
    """|B_2|, |B_4|, ..., |B_2n| via the Akiyama-Tanigawa algorithm."""
    m_max = 2 * n
    out = {}
    a = [Fraction(0)] * (m_max + 1)
    for m in range(m_max + 1):
        a[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            a[j - 1] = j * (a[j - 1] - a[j])
        out[m] = a[0]
    return [abs(out[2 * k]) for k in range(1, n + 1)]


_NTERMS = 40
# Cl2(t) = t - t log|t| + sum_k |B_2k| t^(2k+1) / (2k (2k+1)!)  for |t| < 2 pi
_COEF = np.array(
    [float(b / (2 * k * math.factorial(2 * k + 1))) for k, b in enumerate(_bernoulli_even(_NTERMS), start=1)]
)


def clausen2(theta) -> np.ndarray:
    """Clausen function Cl_2(theta) = -int_0^theta log|2 sin(t/2)| dt."""
    t = np.asarray(theta, dtype=float)
    t = np.remainder(t + np.pi, 2 * np.pi) - np.pi
    at = np.abs(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.where(at > 0, t - t * np.log(at), 0.0)
    t2 = t * t
    acc = np.zeros_like(t)
    for c in _COEF[::-1]:
        acc = acc * t2 + c
    return base + acc * t2 * t


def lobachevsky(x) -> np.ndarray:
    """Milnor's Lobachevsky function L(x) = -int_0^x log|2 sin t| dt."""
    return 0.5 * clausen2(2.0 * np.asarray(x, dtype=float))
