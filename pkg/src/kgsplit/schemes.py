"""Splitting schemes as ordered stage sequences, and the built-in catalog.

A scheme approximates one step of length ``tau`` of ``H = A(p) + B(q)`` by a
product of exact part flows.  Each :class:`Stage` carries the multiple of
``tau`` (or ``tau**3`` for corrector stages) for which its flow is applied.
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

SUM_TOL = 1e-14


class SchemeError(ValueError):
    """Unknown catalog name, illegal composition, or a scheme failing validation."""


class StageKind(enum.Enum):
    DRIFT_A = "A"
    KICK_B = "B"
    CORRECTOR_C = "C"


@dataclass(frozen=True)
class Stage:
    kind: StageKind
    coeff: float

    def __str__(self) -> str:
        return f"{self.kind.value}({self.coeff!r})"


@dataclass(frozen=True)
class Scheme:
    """Immutable symbolic form of a splitting integrator.

    ``order`` is the nominal order tag: ``"2"``, ``"4"`` or a generalized
    order such as ``"(8,2)"``.  ``full_order`` is the order observed on a
    generic (non-perturbative) splitting, which is what convergence tests
    measure.
    """

    name: str
    stages: tuple[Stage, ...]
    order: str
    full_order: int = field(default=0)

    def __post_init__(self) -> None:
        if not self.full_order:
            object.__setattr__(self, "full_order", _full_order_from_tag(self.order))

    def coeffs(self, kind: StageKind) -> tuple[float, ...]:
        return tuple(s.coeff for s in self.stages if s.kind is kind)

    def count(self, kind: StageKind) -> int:
        return sum(1 for s in self.stages if s.kind is kind)

    @property
    def is_symmetric(self) -> bool:
        return _palindrome_residual(self.stages) == 0.0

    def scaled(self, factor: float) -> list[Stage]:
        """Stages of this scheme applied over a step ``factor * tau``.

        Drift and kick coefficients scale linearly, corrector coefficients
        with the cube of the factor.
        """
        out = []
        for s in self.stages:
            power = 3 if s.kind is StageKind.CORRECTOR_C else 1
            out.append(Stage(s.kind, s.coeff * factor**power))
        return out

    def __str__(self) -> str:
        return f"{self.name} [{self.order}]: " + " ".join(str(s) for s in self.stages)


def _full_order_from_tag(tag: str) -> int:
    tag = tag.strip()
    if tag.startswith("("):
        # generalized (m, n, ...) order: the last entry governs the generic case
        return int(tag.strip("()").split(",")[-1])
    return int(tag)


def merge_stages(stages) -> tuple[Stage, ...]:
    """Merge neighbouring stages of the same kind and drop exact zeros."""
    out: list[Stage] = []
    for s in stages:
        if s.coeff == 0.0:
            continue
        if out and out[-1].kind is s.kind:
            merged = out[-1].coeff + s.coeff
            out.pop()
            if merged != 0.0:
                out.append(Stage(s.kind, merged))
        else:
            out.append(Stage(s.kind, float(s.coeff)))
    return tuple(out)


def make_scheme(name: str, stages, order: str) -> Scheme:
    return Scheme(name, merge_stages(stages), order)


def _palindrome_residual(stages) -> float:
    ab = [s for s in stages if s.kind is not StageKind.CORRECTOR_C]
    worst = 0.0
    for s, r in zip(ab, reversed(ab)):
        if s.kind is not r.kind:
            return math.inf
        worst = max(worst, abs(s.coeff - r.coeff))
    return worst


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float


@dataclass(frozen=True)
class ValidationReport:
    scheme: str
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __str__(self) -> str:
        lines = [f"{self.scheme}: {'ok' if self.ok else 'FAILED'}"]
        for c in self.checks:
            lines.append(f"  {'pass' if c.passed else 'FAIL'} {c.name} residual={c.residual:.3e}")
        return "\n".join(lines)


def validate(s: Scheme) -> ValidationReport:
    """Check every structural invariant of ``s``; never raises."""
    coeffs = [st.coeff for st in s.stages]
    nonfinite = sum(1 for c in coeffs if not math.isfinite(c))
    a_res = abs(math.fsum(s.coeffs(StageKind.DRIFT_A)) - 1.0)
    b_res = abs(math.fsum(s.coeffs(StageKind.KICK_B)) - 1.0)
    pal = _palindrome_residual(s.stages)
    adjacent = sum(1 for x, y in zip(s.stages, s.stages[1:]) if x.kind is y.kind)
    checks = (
        Check("finite", nonfinite == 0, float(nonfinite)),
        Check("a_sum", a_res <= SUM_TOL, a_res),
        Check("b_sum", b_res <= SUM_TOL, b_res),
        Check("palindrome", pal <= SUM_TOL, pal),
        Check("no_adjacent_same_kind", adjacent == 0, float(adjacent)),
    )
    return ValidationReport(s.name, checks)


def require_valid(s: Scheme) -> Scheme:
    report = _cached_validate(s)
    if not report.ok:
        raise SchemeError(str(report))
    return s


@lru_cache(maxsize=256)
def _cached_validate(s: Scheme) -> ValidationReport:
    return validate(s)


# -- constructions ------------------------------------------------------------

CBRT2 = 2.0 ** (1.0 / 3.0)
YOSHIDA_OUTER = 1.0 / (2.0 - CBRT2)
YOSHIDA_INNER = -CBRT2 / (2.0 - CBRT2)


def yoshida_compose(s2: Scheme, name: str | None = None) -> Scheme:
    """Triple-jump composition ``S2(a1 tau) S2(a0 tau) S2(a1 tau)``.

    The inner weight is negative so that ``2*a1 + a0 == 1``.  Stages meeting
    at the seams are merged.
    """
    if any(st.kind is StageKind.CORRECTOR_C for st in s2.stages):
        raise SchemeError(f"cannot compose {s2.name}: contains corrector stages")
    if not s2.is_symmetric:
        raise SchemeError(f"cannot compose {s2.name}: scheme is not symmetric")
    stages = s2.scaled(YOSHIDA_OUTER) + s2.scaled(YOSHIDA_INNER) + s2.scaled(YOSHIDA_OUTER)
    return make_scheme(name or f"{s2.name}Y4", stages, "4")


def with_corrector(s2: Scheme, c: float, name: str) -> Scheme:
    """Sandwich ``s2`` between two corrector flows of coefficient ``-c/2``."""
    corr = Stage(StageKind.CORRECTOR_C, -c / 2.0)
    return make_scheme(name, (corr, *s2.stages, corr), "4")


def _aba(name: str, a, b, order: str) -> Scheme:
    stages = []
    for i, ai in enumerate(a):
        stages.append(Stage(StageKind.DRIFT_A, ai))
        if i < len(b):
            stages.append(Stage(StageKind.KICK_B, b[i]))
    return make_scheme(name, stages, order)


def _bab(name: str, b, a, order: str) -> Scheme:
    stages = []
    for i, bi in enumerate(b):
        stages.append(Stage(StageKind.KICK_B, bi))
        if i < len(a):
            stages.append(Stage(StageKind.DRIFT_A, a[i]))
    return make_scheme(name, stages, order)


def _leapfrog() -> Scheme:
    return _aba("LF", (0.5, 0.5), (1.0,), "2")


def _saba2() -> Scheme:
    c1 = 0.5 - 0.5 / math.sqrt(3.0)
    c2 = 1.0 / math.sqrt(3.0)
    return _aba("SABA2", (c1, c2, c1), (0.5, 0.5), "2")


def _sbab2() -> Scheme:
    return _bab("SBAB2", (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0), (0.5, 0.5), "2")


SABA2_CORRECTOR = (2.0 - math.sqrt(3.0)) / 24.0
SBAB2_CORRECTOR = 1.0 / 72.0


def _sz4() -> Scheme:
    # leapfrog triple jump written out with the seams already merged
    a1, a0 = YOSHIDA_OUTER, YOSHIDA_INNER
    return _aba("Sz4", (a1 / 2, (a1 + a0) / 2, (a1 + a0) / 2, a1 / 2), (a1, a0, a1), "4")


def _fro4() -> Scheme:
    theta = 1.0 / (2.0 - CBRT2)
    return _aba(
        "FRo4",
        (theta / 2, (1 - theta) / 2, (1 - theta) / 2, theta / 2),
        (theta, 1 - 2 * theta, theta),
        "4",
    )


def _load_table() -> dict[str, Scheme]:
    """Read the generalized-order coefficient table shipped as package data."""
    parser = configparser.ConfigParser()
    parser.read_string(resources.files("kgsplit.data").joinpath("coefficients.ini").read_text())
    out = {}
    for name in parser.sections():
        sec = parser[name]
        values = {k: float(v) for k, v in sec.items() if k not in ("order", "layout", "source")}
        stages = []
        for token in sec["layout"].split():
            kind = StageKind(token[0])
            stages.append(Stage(kind, values[token.lower()]))
        out[name] = make_scheme(name, stages, sec["order"])
    return out


CATALOG_NAMES = (
    "LF",
    "SABA2",
    "SBAB2",
    "SABA2wc",
    "SBAB2wc",
    "SABA2Y4",
    "SBAB2Y4",
    "Sz4",
    "FRo4",
    "ABA82",
    "ABA864",
    "ABAH864",
)


@lru_cache(maxsize=None)
def _catalog() -> dict[str, Scheme]:
    lf, saba2, sbab2 = _leapfrog(), _saba2(), _sbab2()
    cat = {
        "LF": lf,
        "SABA2": saba2,
        "SBAB2": sbab2,
        "SABA2wc": with_corrector(saba2, SABA2_CORRECTOR, "SABA2wc"),
        "SBAB2wc": with_corrector(sbab2, SBAB2_CORRECTOR, "SBAB2wc"),
        "SABA2Y4": yoshida_compose(saba2),
        "SBAB2Y4": yoshida_compose(sbab2),
        "Sz4": _sz4(),
        "FRo4": _fro4(),
    }
    cat.update(_load_table())
    for name, s in cat.items():
        report = validate(s)
        if not report.ok:
            raise SchemeError(f"catalog scheme {name} is broken:\n{report}")
    return cat


def catalog_scheme(name: str) -> Scheme:
    try:
        return _catalog()[name]
    except KeyError:
        raise SchemeError(
            f"unknown scheme {name!r}; valid names: {', '.join(CATALOG_NAMES)}"
        ) from None


def format_catalog(names=CATALOG_NAMES) -> str:
    """Plain-text dump of the catalog at full (round-trip) precision."""
    lines = []
    for name in names:
        s = catalog_scheme(name)
        lines.append(f"{s.name}\torder={s.order}\tstages={len(s.stages)}")
        for i, st in enumerate(s.stages, 1):
            lines.append(f"  {i:2d} {st.kind.value} {st.coeff!r}")
    return "\n".join(lines)
