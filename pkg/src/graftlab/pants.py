"""Pants decompositions, Fenchel-Nielsen coordinates and marked Fuchsian groups.

Every pair of pants ``P`` carries three peripheral generators ``P.c0, P.c1,
P.c2`` with ``P.c0 * P.c1 * P.c2 = 1``; each is oriented with the pants on its
left.  A curve has two sides; side A is the ``+`` side (the pants on the left
of the curve's orientation).  Gluings along a spanning tree of the pants graph
identify ``Q.cb`` with ``(P.ca)^-1`` directly; the remaining curves get a
stable letter ``t:<curve>`` with ``t Q.cb t^-1 = (P.ca)^-1``.

Twists are measured between seams: on each side the seam runs to the
neighbouring slot with the smaller label.  The twist is the displacement of
the B-side foot relative to the A-side foot along the A orientation, in units
of the curve length, so a left earthquake increases it.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .hyp_core import (
    ClassificationError,
    Geodesic,
    IdealPoint,
    MobiusMap,
    axis,
    classify,
    frame,
    orthogeodesic,
    point_on,
    position_on,
    standardizer,
)

SCHEMA_VERSION = 1

Word = tuple  # tuple of (generator name, +1 | -1)


class StructureError(ValueError):
    """Malformed pants decomposition or marking."""


class AssemblyError(ValueError):
    """Coordinates that do not produce a Fuchsian group."""


class DegenerateLengthError(ValueError):
    """A curve of the decomposition is represented by a parabolic element."""


@dataclass(frozen=True)
class Slot:
    pants: str
    index: int

    @property
    def label(self) -> str:
        return f"{self.pants}.c{self.index}"


@dataclass
class PantsDecomposition:
    """Combinatorics of a pants decomposition.

    ``pants`` maps a pants name to its three slots.  A slot is ``"<curve>+"``
    or ``"<curve>-"`` for the two sides of a curve, or ``"@<name>"`` for a
    cusp.  ``E`` lists the curves along which grafting happens.
    """

    pants: dict[str, list[str]]
    E: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.sides: dict[str, dict[str, Slot]] = {}
        self.cusps: dict[str, Slot] = {}
        for name, slots in self.pants.items():
            if "." in name:
                raise StructureError(f"pants name {name!r} must not contain '.'")
            if len(slots) != 3:
                raise StructureError(f"pants {name} needs exactly three slots")
            for k, s in enumerate(slots):
                if s.startswith("@"):
                    if s in self.cusps:
                        raise StructureError(f"cusp {s} appears twice")
                    self.cusps[s] = Slot(name, k)
                    continue
                curve, sign = s[:-1], s[-1:]
                if sign not in "+-" or not curve:
                    raise StructureError(f"slot {s!r} must be '<curve>+', '<curve>-' or '@<cusp>'")
                side = self.sides.setdefault(curve, {})
                if sign in side:
                    raise StructureError(f"side {s} appears twice")
                side[sign] = Slot(name, k)
        for curve, side in self.sides.items():
            if set(side) != {"+", "-"}:
                raise StructureError(f"curve {curve} is glued on one side only")
        for c in self.E:
            if c not in self.sides:
                raise StructureError(f"grafting curve {c} is not a curve of the decomposition")
        n_pants = len(self.pants)
        n_cusps = len(self.cusps)
        twice_g = 2 - n_cusps + n_pants
        if n_pants == 0 or twice_g < 0 or twice_g % 2:
            raise StructureError("pants count inconsistent with a closed-up surface")
        if len(self.sides) != (3 * n_pants - n_cusps) // 2:
            raise StructureError("curve count inconsistent with the pants count")
        if self._components() != 1:
            raise StructureError("pants graph is disconnected")

    @property
    def curves(self) -> list[str]:
        return sorted(self.sides)

    @property
    def genus(self) -> int:
        return (2 - len(self.cusps) + len(self.pants)) // 2

    @property
    def euler_characteristic(self) -> int:
        return -len(self.pants)

    def side(self, curve: str, sign: str) -> Slot:
        return self.sides[curve][sign]

    def slot_kind(self, slot: Slot) -> str:
        return self.pants[slot.pants][slot.index]

    def seam_target(self, slot: Slot) -> int:
        """Slot index the seam from ``slot`` runs to (smallest other label)."""
        others = [Slot(slot.pants, k) for k in range(3) if k != slot.index]
        return min(others, key=lambda s: s.label).index

    def _components(self) -> int:
        names = list(self.pants)
        seen = {names[0]}
        queue = [names[0]]
        while queue:
            p = queue.pop()
            for side in self.sides.values():
                a, b = side["+"].pants, side["-"].pants
                for x, y in ((a, b), (b, a)):
                    if x == p and y not in seen:
                        seen.add(y)
                        queue.append(y)
        return len(names) - len(seen) + 1

    def to_json(self) -> str:
        return json.dumps({"schema": SCHEMA_VERSION, "pants": self.pants, "E": list(self.E)}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PantsDecomposition":
        data = json.loads(text)
        _check_schema(data)
        return cls({k: list(v) for k, v in data["pants"].items()}, list(data.get("E", [])))


def _check_schema(data: dict) -> None:
    if data.get("schema") != SCHEMA_VERSION:
        raise StructureError(f"unsupported schema version {data.get('schema')!r}")


@dataclass
class FNCoords:
    """Lengths and twists per curve; twists are in units of full turns."""

    lengths: dict[str, float]
    twists: dict[str, float]

    def __post_init__(self):
        for c, ln in self.lengths.items():
            if not (ln > 0 and math.isfinite(ln)):
                raise ValueError(f"length of {c} must be positive and finite, got {ln}")
        if set(self.lengths) != set(self.twists):
            raise ValueError("lengths and twists must cover the same curves")

    def half_twists(self) -> dict[str, float]:
        return {c: half_twist(t) for c, t in self.twists.items()}

    def to_json(self) -> str:
        return json.dumps({"schema": SCHEMA_VERSION, "lengths": self.lengths, "twists": self.twists}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FNCoords":
        data = json.loads(text)
        _check_schema(data)
        return cls(dict(data["lengths"]), dict(data["twists"]))


def half_twist(t: float) -> float:
    """Reduce a twist to [0, 1/2)."""
    r = math.fmod(t, 0.5)
    if r < 0:
        r += 0.5
    return 0.0 if r >= 0.5 else r


def half_twist_distance(a: float, b: float) -> float:
    """Distance between two twists in R / (1/2) Z."""
    d = half_twist(a - b)
    return min(d, 0.5 - d)


def hexagon_side(l1: float, l2: float, l3: float) -> float:
    """Side of a right-angled hexagon between alternate sides l1 and l2 (opposite l3).

    Inputs are the half-lengths of the pants boundaries.  ``l3 = 0`` is the
    limit in which the third boundary becomes a cusp.
    """
    if l1 <= 0 or l2 <= 0 or l3 < 0:
        raise ValueError("hexagon half-lengths must be positive (l3 = 0 allowed for a cusp)")
    c = (math.cosh(l3) + math.cosh(l1) * math.cosh(l2)) / (math.sinh(l1) * math.sinh(l2))
    return math.acosh(c)


# words ----------------------------------------------------------------------


def inverse_word(w: Word) -> Word:
    return tuple((g, -e) for g, e in reversed(w))


def evaluate(word: Word, gens: dict[str, MobiusMap]) -> MobiusMap:
    acc = np.eye(2)
    for name, e in word:
        m = gens[name]
        acc = acc @ (m.as_array() if e > 0 else m.inverse().as_array())
    return MobiusMap.from_array(acc)


def pants_words(name: str) -> tuple[Word, Word, Word]:
    c0, c1 = f"{name}.c0", f"{name}.c1"
    return ((c0, 1),), ((c1, 1),), ((c1, -1), (c0, -1))


@dataclass
class MarkedGroup:
    """Generators labelled by name together with the marking of the pants curves.

    ``curve_sides[c] = (A, B, w)`` where A and B are the slots on the two sides
    and ``w`` is a word with ``w * B * w^-1 = A^-1`` as group elements.
    """

    generators: dict[str, MobiusMap]
    pants: dict[str, tuple[Word, Word, Word]]
    curve_sides: dict[str, tuple[Slot, Slot, Word]]
    relations: list[Word] = field(default_factory=list)

    def element(self, word: Word) -> MobiusMap:
        return evaluate(word, self.generators)

    def peripheral(self, slot: Slot) -> MobiusMap:
        return self.element(self.pants[slot.pants][slot.index])

    def curve_element(self, curve: str) -> MobiusMap:
        return self.peripheral(self.curve_sides[curve][0])

    def relation_residual(self) -> float:
        ident = MobiusMap.identity()
        res = 0.0
        for w in self.relations:
            res = max(res, self.element(w).distance_to(ident))
        for name in self.pants:
            res = max(res, self.element(sum(self.pants[name], ())).distance_to(ident))
        return res

    def conjugate(self, g: MobiusMap) -> "MarkedGroup":
        gi = g.inverse()
        gens = {k: g @ m @ gi for k, m in self.generators.items()}
        return MarkedGroup(gens, dict(self.pants), dict(self.curve_sides), list(self.relations))


# assembly -------------------------------------------------------------------


def _carrier(m: MobiusMap):
    kind, _ = classify(m)
    if kind not in ("hyperbolic", "parabolic"):
        raise AssemblyError(f"peripheral element is {kind}")
    return axis(m)


def _on_left(g: Geodesic, other) -> bool:
    s = standardizer(g)
    pts = [other.x] if isinstance(other, IdealPoint) else [other.start, other.end]
    vals = [s(p) for p in pts]
    return all((not math.isinf(v)) and v < 0 for v in vals)


def standard_pants(lengths: tuple[float, float, float]) -> tuple[MobiusMap, MobiusMap, MobiusMap]:
    """Peripheral generators of a pants with boundary lengths (0 for a cusp).

    Returns (c0, c1, c2) with c0 c1 c2 = 1 and the pants on the left of every axis.
    """
    x = 2.0 * math.cosh(0.5 * lengths[0])
    y = 2.0 * math.cosh(0.5 * lengths[1])
    z = -2.0 * math.cosh(0.5 * lengths[2])
    s = 0.5 * (z - math.sqrt(max(z * z - 4.0, 0.0)))
    a = np.array([[x, -1.0], [1.0, 0.0]])
    b = np.array([[0.0, s], [-1.0 / s, y]])
    for flip in (False, True):
        if flip:
            r = np.diag([1.0, -1.0])
            a2, b2 = r @ a @ r, r @ b @ r
        else:
            a2, b2 = a, b
        c0, c1 = MobiusMap.from_array(a2), MobiusMap.from_array(b2)
        c2 = (c0 @ c1).inverse()
        gens = (c0, c1, c2)
        carriers = [_carrier(m) for m in gens]
        ok = True
        for k in range(3):
            if isinstance(carriers[k], Geodesic):
                ok &= all(_on_left(carriers[k], carriers[j]) for j in range(3) if j != k)
        if ok:
            return gens
    raise AssemblyError(f"no consistent pants orientation for lengths {lengths}")


def _seam_foot(gens: dict[str, MobiusMap], pd: PantsDecomposition, slot: Slot, words) -> complex:
    """Foot on the axis of the peripheral element of ``slot`` of the seam to the target slot."""
    m = evaluate(words[slot.pants][slot.index], gens)
    kind, _ = classify(m)
    if kind != "hyperbolic":
        raise DegenerateLengthError(f"curve at {slot.label} is {kind}")
    target = evaluate(words[slot.pants][pd.seam_target(slot)], gens)
    seg = orthogeodesic(axis(m), _carrier(target))
    return seg.foot_a


def build_group(fn: FNCoords, pd: PantsDecomposition) -> MarkedGroup:
    """Marked Fuchsian group with the given Fenchel-Nielsen coordinates."""
    if set(fn.lengths) != set(pd.curves):
        raise StructureError("coordinates must cover exactly the curves of the decomposition")

    def boundary_lengths(p):
        out = []
        for s in pd.pants[p]:
            out.append(0.0 if s.startswith("@") else fn.lengths[s[:-1]])
        return tuple(out)

    std = {p: standard_pants(boundary_lengths(p)) for p in pd.pants}
    words = {p: pants_words(p) for p in pd.pants}
    conj: dict[str, MobiusMap] = {}
    root = sorted(pd.pants)[0]
    conj[root] = MobiusMap.identity()
    gens: dict[str, MobiusMap] = {}

    def place(p):
        y = conj[p]
        yi = y.inverse()
        gens[f"{p}.c0"] = y @ std[p][0] @ yi
        gens[f"{p}.c1"] = y @ std[p][1] @ yi

    place(root)

    def gluing_map(curve: str) -> MobiusMap:
        """Map taking the B-side pants (as placed) to its position across side A."""
        a, b = pd.side(curve, "+"), pd.side(curve, "-")
        ga = evaluate(words[a.pants][a.index], gens)
        g = axis(ga)
        foot_a = _seam_foot(gens, pd, a, words)
        if b.pants in conj:
            local = gens
        else:
            local = {}
            local[f"{b.pants}.c0"], local[f"{b.pants}.c1"] = std[b.pants][0], std[b.pants][1]
        gb = evaluate(words[b.pants][b.index], local)
        foot_b = _seam_foot(local, pd, b, words)
        target = point_on(g, position_on(g, foot_a) + fn.twists[curve] * fn.lengths[curve])
        src = frame(foot_b, axis(gb).end)
        dst = frame(target, g.start)
        return dst @ src.inverse()

    curve_sides: dict[str, tuple[Slot, Slot, Word]] = {}
    relations: list[Word] = []
    tree_curves = set()
    queue = deque([root])
    while queue:
        p = queue.popleft()
        for curve in pd.curves:
            a, b = pd.side(curve, "+"), pd.side(curve, "-")
            for x, y, flip in ((a, b, False), (b, a, True)):
                if x.pants == p and y.pants not in conj and curve not in tree_curves:
                    tree_curves.add(curve)
                    if not flip:
                        conj[y.pants] = gluing_map(curve)
                    else:
                        # place P across Q's side by inverting the gluing seen from B
                        conj[y.pants] = _inverse_gluing(curve, pd, fn, std, words, gens)
                    place(y.pants)
                    queue.append(y.pants)
    for curve in pd.curves:
        a, b = pd.side(curve, "+"), pd.side(curve, "-")
        wa, wb = words[a.pants][a.index], words[b.pants][b.index]
        if curve in tree_curves:
            curve_sides[curve] = (a, b, ())
            relations.append(wb + wa)
        else:
            tname = f"t:{curve}"
            gens[tname] = gluing_map(curve)
            tw: Word = ((tname, 1),)
            curve_sides[curve] = (a, b, tw)
            relations.append(tw + wb + inverse_word(tw) + wa)
    group = MarkedGroup(gens, words, curve_sides, relations)
    res = group.relation_residual()
    if res > 1e-6:
        raise AssemblyError(f"assembled group violates its relations (residual {res:.2e})")
    for curve in pd.curves:
        kind, _ = classify(group.curve_element(curve))
        if kind != "hyperbolic":
            raise AssemblyError(f"curve {curve} came out {kind}")
    return group


def _inverse_gluing(curve, pd, fn, std, words, gens) -> MobiusMap:
    """Conjugator for the A-side pants when only the B side is placed."""
    a, b = pd.side(curve, "+"), pd.side(curve, "-")
    gb = evaluate(words[b.pants][b.index], gens)
    g_b = axis(gb)
    foot_b = _seam_foot(gens, pd, b, words)
    local = {f"{a.pants}.c0": std[a.pants][0], f"{a.pants}.c1": std[a.pants][1]}
    ga = evaluate(words[a.pants][a.index], local)
    foot_a = _seam_foot(local, pd, a, words)
    # along B's orientation the A foot sits at -twist relative to the B foot
    target = point_on(g_b, position_on(g_b, foot_b) + fn.twists[curve] * fn.lengths[curve])
    src = frame(foot_a, axis(ga).end)
    dst = frame(target, g_b.start)
    return dst @ src.inverse()


def measure_fn(group: MarkedGroup, pd: PantsDecomposition) -> FNCoords:
    """Lengths and half-twists (in [0, 1/2)) of every curve of ``pd``."""
    lengths: dict[str, float] = {}
    twists: dict[str, float] = {}
    for curve in pd.curves:
        if curve not in group.curve_sides:
            raise StructureError(f"group carries no marking for curve {curve}")
        a, b, w = group.curve_sides[curve]
        ga = group.peripheral(a)
        kind, ln = classify(ga)
        if kind != "hyperbolic":
            raise DegenerateLengthError(f"curve {curve} is {kind}: the surface is pinched")
        g = axis(ga)
        foot_a = _seam_foot(group.generators, pd, a, group.pants)
        foot_b = _seam_foot(group.generators, pd, b, group.pants)
        foot_b = group.element(w)(foot_b)
        shift = position_on(g, foot_b) - position_on(g, foot_a)
        lengths[curve] = ln
        twists[curve] = half_twist(shift / ln)
    return FNCoords(lengths, twists)


def group_distance(g1: MarkedGroup, g2: MarkedGroup, names=None) -> float:
    """Largest entrywise difference between equally named generators."""
    common = sorted(set(g1.generators) & set(g2.generators)) if names is None else list(names)
    if not common:
        raise StructureError("groups share no generator names")
    for n in common:
        if n not in g1.generators or n not in g2.generators:
            raise StructureError(f"generator {n} missing from one of the groups")
    return max(g1.generators[n].distance_to(g2.generators[n]) for n in common)


# common decompositions ------------------------------------------------------


def punctured_torus() -> PantsDecomposition:
    return PantsDecomposition({"P": ["a+", "a-", "@p"]}, ["a"])


def twice_punctured_torus() -> PantsDecomposition:
    return PantsDecomposition({"P0": ["a+", "a-", "b+"], "P1": ["b-", "@p1", "@p2"]}, ["a"])


def four_punctured_sphere() -> PantsDecomposition:
    return PantsDecomposition({"P0": ["@p1", "@p2", "g+"], "P1": ["g-", "@p3", "@p4"]}, [])


def genus_two() -> PantsDecomposition:
    return PantsDecomposition({"P0": ["a+", "b+", "c+"], "P1": ["a-", "c-", "b-"]}, [])


__all__ = [
    "PantsDecomposition",
    "FNCoords",
    "MarkedGroup",
    "Slot",
    "hexagon_side",
    "build_group",
    "measure_fn",
    "group_distance",
    "half_twist",
    "half_twist_distance",
    "standard_pants",
    "evaluate",
    "inverse_word",
    "pants_words",
    "punctured_torus",
    "twice_punctured_torus",
    "four_punctured_sphere",
    "genus_two",
    "StructureError",
    "AssemblyError",
    "DegenerateLengthError",
    "ClassificationError",
]
