"""Disordered quartic Klein-Gordon chain with fixed ends.

    H = sum_i p_i^2/2 + eps_i q_i^2/2 + q_i^4/4 + (q_{i+1} - q_i)^2 / (2W)

with q_0 = q_{N+1} = 0, so the bond sum runs over N + 1 bonds.  The split
used by every integrator is ``A = sum p^2/2`` (drift) and ``B = V(q)`` (kick).

``Lattice.b_scale`` multiplies the whole of ``B``; it is 1 for the physical
model and only differs in perturbative probes of generalized-order schemes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EPS_LOW, EPS_HIGH = 0.5, 1.5


class LatticeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Lattice:
    eps: np.ndarray
    w: float
    seed: int | None = None
    b_scale: float = 1.0

    def __post_init__(self) -> None:
        eps = np.array(self.eps, dtype=np.float64)
        if eps.ndim != 1 or eps.size < 1:
            raise LatticeError("eps must be a non-empty 1-d array")
        if not self.w > 0:
            raise LatticeError(f"coupling W must be positive, got {self.w}")
        if not self.b_scale > 0:
            raise LatticeError(f"b_scale must be positive, got {self.b_scale}")
        eps.setflags(write=False)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "w", float(self.w))

    @property
    def n(self) -> int:
        return self.eps.size

    @property
    def center(self) -> int:
        """0-based index of the central site (1-based label ceil(N/2))."""
        return math.ceil(self.n / 2) - 1

    def with_b_scale(self, scale: float) -> "Lattice":
        return Lattice(self.eps, self.w, self.seed, self.b_scale * scale)


@dataclass(frozen=True, eq=False)
class State:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.q, dtype=np.float64)
        p = np.array(self.p, dtype=np.float64)
        if q.shape != p.shape or q.ndim != 1:
            raise LatticeError(f"q and p must be equal-length vectors, got {q.shape} and {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def zeros(cls, n: int) -> "State":
        return cls(np.zeros(n), np.zeros(n))

    def copy(self) -> "State":
        return State(self.q.copy(), self.p.copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, z) -> "State":
        z = np.asarray(z, dtype=np.float64)
        n = z.size // 2
        return cls(z[:n], z[n:])


def make_lattice(n: int, w: float, seed: int | None = 0) -> Lattice:
    """Draw eps_i i.i.d. uniform on [1/2, 3/2] with numpy's PCG64 generator."""
    if n < 1:
        raise LatticeError(f"site count must be >= 1, got {n}")
    if not w > 0:
        raise LatticeError(f"coupling W must be positive, got {w}")
    rng = np.random.default_rng(seed)
    return Lattice(rng.uniform(EPS_LOW, EPS_HIGH, n), w, seed)


def central_excitation(lat: Lattice, energy: float) -> State:
    """Zero displacement everywhere, all energy as momentum on the central site."""
    if not energy > 0:
        raise LatticeError(f"excitation energy must be positive, got {energy}")
    st = State.zeros(lat.n)
    st.p[lat.center] = math.sqrt(2.0 * energy)
    return st


def _check(lat: Lattice, *arrays) -> None:
    for a in arrays:
        if np.shape(a) != (lat.n,):
            raise LatticeError(f"expected {lat.n} sites, got shape {np.shape(a)}")


def _padded(q: np.ndarray) -> np.ndarray:
    out = np.zeros(q.size + 2)
    out[1:-1] = q
    return out


def potential_b(lat: Lattice, q) -> float:
    q = np.asarray(q, dtype=np.float64)
    _check(lat, q)
    bonds = np.diff(_padded(q))
    onsite = 0.5 * lat.eps * q**2 + 0.25 * q**4
    return lat.b_scale * (onsite.sum() + (bonds**2).sum() / (2.0 * lat.w))


def kinetic_a(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    return 0.5 * float(p @ p)


def total_energy(lat: Lattice, st: State) -> float:
    _check(lat, st.q, st.p)
    return kinetic_a(st.p) + potential_b(lat, st.q)


def grad_b(lat: Lattice, q) -> np.ndarray:
    """dB/dq; the equations of motion read dp/dt = -grad_b(q)."""
    q = np.asarray(q, dtype=np.float64)
    _check(lat, q)
    qq = _padded(q)
    lap = 2.0 * q - qq[2:] - qq[:-2]
    return lat.b_scale * (lat.eps * q + q**3 + lap / lat.w)


def hess_b_vec(lat: Lattice, q, v) -> np.ndarray:
    """Product of the (tridiagonal) Hessian of B at q with v."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check(lat, q, v)
    vv = _padded(v)
    diag = lat.eps + 3.0 * q**2 + 2.0 / lat.w
    return lat.b_scale * (diag * v - (vv[2:] + vv[:-2]) / lat.w)


def corrector_potential(lat: Lattice, q) -> float:
    """G(q) = {{A,B},B} = |grad B|^2 for a kinetic A = p^2/2."""
    g = grad_b(lat, q)
    return float(g @ g)


def corrector_grad(lat: Lattice, q) -> np.ndarray:
    return 2.0 * hess_b_vec(lat, q, grad_b(lat, q))


def flow_a(st: State, s: float) -> State:
    return State(st.q + s * st.p, st.p.copy())


def flow_b(lat: Lattice, st: State, s: float) -> State:
    return State(st.q.copy(), st.p - s * grad_b(lat, st.q))


def flow_corrector(lat: Lattice, st: State, s: float) -> State:
    """Exact flow of G(q) = |grad B|^2 for time s (s = stage coeff * tau^3)."""
    return State(st.q.copy(), st.p - s * corrector_grad(lat, st.q))


def site_energies(lat: Lattice, st: State) -> np.ndarray:
    """Per-site energies h_i that sum exactly to the total energy.

    Interior bonds are shared half and half by their two sites; each of the
    two boundary bonds belongs wholly to the single site it touches.
    """
    _check(lat, st.q, st.p)
    q = st.q
    bond = np.diff(_padded(q)) ** 2 / (2.0 * lat.w)
    share = 0.5 * (bond[:-1] + bond[1:])
    share[0] += 0.5 * bond[0]
    share[-1] += 0.5 * bond[-1]
    onsite = 0.5 * lat.eps * q**2 + 0.25 * q**4
    return 0.5 * st.p**2 + lat.b_scale * (onsite + share)


# -- realization files --------------------------------------------------------


def save_lattice(lat: Lattice, path) -> None:
    lines = [f"# n = {lat.n}", f"# w = {lat.w!r}", f"# seed = {lat.seed}"]
    lines += [repr(float(e)) for e in lat.eps]
    Path(path).write_text("\n".join(lines) + "\n")


def load_lattice(path) -> Lattice:
    header: dict[str, str] = {}
    values = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            header[key.strip()] = val.strip()
        else:
            values.append(float(line))
    try:
        n, w = int(header["n"]), float(header["w"])
    except KeyError as exc:
        raise LatticeError(f"{path}: missing header field {exc}") from None
    if n != len(values):
        raise LatticeError(f"{path}: header says n = {n} but {len(values)} values follow")
    seed = header.get("seed", "None")
    return Lattice(np.array(values), w, None if seed == "None" else int(seed))
