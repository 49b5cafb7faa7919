"""Wave-packet diagnostics computed from the normalized site-energy distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kgsplit.lattice import Lattice, State, site_energies


class DegenerateDistributionError(ValueError):
    pass


@dataclass(frozen=True)
class Diagnostics:
    t: float
    ree: float
    m2: float
    p: float
    ibar: float
    energy: float


def moments(h) -> tuple[float, float, float]:
    """Return (ibar, m2, participation number) of the energy profile ``h``.

    Sites are labelled 1..N.  Only the normalized profile ``h / sum(h)``
    enters, so any positive rescaling of ``h`` gives the same result.
    """
    h = np.asarray(h, dtype=np.float64)
    total = h.sum()
    if not total > 0:
        raise DegenerateDistributionError(f"energy distribution sums to {total}")
    frac = h / total
    sites = np.arange(1, h.size + 1, dtype=np.float64)
    ibar = float(sites @ frac)
    m2 = float(((sites - ibar) ** 2) @ frac)
    part = float(1.0 / (frac @ frac))
    return ibar, m2, part


def relative_energy_error(energy: float, e0: float) -> float:
    if e0 == 0:
        raise ValueError("relative error against a zero reference energy")
    return abs(energy - e0) / abs(e0)


def diagnostics(lat: Lattice, st: State, e0: float, t: float = 0.0) -> Diagnostics:
    if not e0 > 0:
        raise ValueError(f"reference energy must be positive, got {e0}")
    h = site_energies(lat, st)
    ibar, m2, part = moments(h)
    energy = float(h.sum())
    return Diagnostics(t, relative_energy_error(energy, e0), m2, part, ibar, energy)
