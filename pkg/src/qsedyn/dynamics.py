"""Wigner sampling and fewest-switches surface hopping on interpolated 1D surfaces.

Units: R in Angstrom, v in Angstrom per atomic time unit, t in atomic time
units, energies in Hartree, forces in Ha/A, couplings in 1/A, masses in amu.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline, interp1d

from .constants import AMU_IN_ELECTRON_MASS, BOHR_IN_ANGSTROM, HYDROGEN_MASS_AMU

log = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-6
RNG_BLOCK = 1024
ACTIVE = "active"
TERMINATED = "left_grid"

# commutator-free fourth-order Magnus weights at the two Gauss nodes
_GAUSS = (0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0)
_CF4 = ((3.0 - 2.0 * np.sqrt(3.0)) / 12.0, (3.0 + 2.0 * np.sqrt(3.0)) / 12.0)


class OutOfGridError(ValueError):
    pass


class IntegratorError(RuntimeError):
    pass


def _mass_au(mass_amu: float) -> float:
    return mass_amu * AMU_IN_ELECTRON_MASS


def acceleration(force, mass_amu: float):
    """``-F/m`` in A per atomic time unit squared for ``F`` in Ha/A."""
    return -np.asarray(force) * BOHR_IN_ANGSTROM**2 / _mass_au(mass_amu)


def kinetic_energy(v, mass_amu: float):
    """Hartree, for ``v`` in A per atomic time unit."""
    return 0.5 * _mass_au(mass_amu) * (np.asarray(v) / BOHR_IN_ANGSTROM) ** 2


def speed_for_energy(ke, mass_amu: float):
    return np.sqrt(2.0 * np.asarray(ke) / _mass_au(mass_amu)) * BOHR_IN_ANGSTROM


# --- surfaces --------------------------------------------------------------------------


class SurfaceModel:
    """Interpolated energies, forces and couplings along R.

    Cubic splines (not-a-knot) through the grid values, or linear
    interpolation when the grid has fewer than four points.  Couplings are
    interpolated entry by entry, which keeps them antisymmetric.
    """

    def __init__(self, grid, energies, forces, couplings, method: str = ""):
        self.grid = np.asarray(grid, dtype=float)
        e = np.asarray(energies, dtype=float)
        f = np.asarray(forces, dtype=float)
        d = np.asarray(couplings, dtype=float)
        n = len(self.grid)
        if n < 2 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must hold at least two strictly increasing points")
        if e.shape[0] != n or f.shape != e.shape or d.shape != (n, e.shape[1], e.shape[1]):
            raise ValueError("surface arrays do not match the grid")
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(f)) and np.all(np.isfinite(d))):
            raise ValueError("surfaces contain undefined values (degenerate couplings?)")
        if np.abs(d + d.transpose(0, 2, 1)).max() > 1e-12:
            raise ValueError("couplings are not antisymmetric")
        self.n_states = e.shape[1]
        self.method = method
        self.energies, self.forces, self.couplings = e, f, d
        flat = np.concatenate([e, f, d.reshape(n, -1)], axis=1)
        if n >= 4:
            self._interp = CubicSpline(self.grid, flat, axis=0)
        else:
            self._interp = interp1d(self.grid, flat, axis=0)

    @classmethod
    def from_surfaces(cls, surfaces: Sequence, method: str | None = None, n_states: int | None = None) -> "SurfaceModel":
        """From a list of ``SurfaceData`` records ordered by R."""
        k = n_states or surfaces[0].n_states
        return cls(
            [s.R for s in surfaces],
            [np.asarray(s.energies)[:k] for s in surfaces],
            [np.asarray(s.forces)[:k] for s in surfaces],
            [np.asarray(s.couplings)[:k, :k] for s in surfaces],
            method if method is not None else surfaces[0].method,
        )

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def inside(self, r) -> np.ndarray:
        r = np.asarray(r)
        return (r >= self.grid[0]) & (r <= self.grid[-1])

    def evaluate(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Energies ``(m, k)``, forces ``(m, k)`` and couplings ``(m, k, k)`` at points ``r``."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if not np.all(self.inside(r)):
            raise OutOfGridError(f"R outside [{self.grid[0]}, {self.grid[-1]}]")
        k = self.n_states
        out = self._interp(r)
        return out[:, :k], out[:, k:2 * k], out[:, 2 * k:].reshape(len(r), k, k)


def landau_zener_model(slope: float, coupling: float, half_width: float = 1.0, n_grid: int = 801) -> SurfaceModel:
    """Adiabatic two-state model of diabats ``+-slope*x`` coupled by ``coupling``.

    Energies ``-+sqrt(slope^2 x^2 + coupling^2)``, forces their derivatives and
    ``d_01 = -slope*coupling / (2 (slope^2 x^2 + coupling^2))``.
    """
    x = np.linspace(-half_width, half_width, n_grid)
    root = np.sqrt((slope * x) ** 2 + coupling**2)
    e = np.stack([-root, root], axis=1)
    dr = slope**2 * x / root
    f = np.stack([-dr, dr], axis=1)
    d01 = -slope * coupling / (2.0 * root**2)
    d = np.zeros((n_grid, 2, 2))
    d[:, 0, 1] = d01
    d[:, 1, 0] = -d01
    return SurfaceModel(x, e, f, d, "landau_zener")


def landau_zener_probability(slope: float, coupling: float, v: float) -> float:
    """Diabatic passage probability ``exp(-2 pi coupling^2 / (v |d(V11 - V22)/dx|))``."""
    return float(np.exp(-2.0 * np.pi * coupling**2 / (abs(v) * 2.0 * abs(slope))))


# --- initial conditions ------------------------------------------------------------------


def wigner_sample(center: float, omega: float, mass: float, n: int, seed: int, temperature: float = 0.0, velocity: float = 0.0):
    """Positions (A) and velocities (A/atu) from the harmonic Wigner distribution.

    ``omega`` is the harmonic quantum in Hartree, ``mass`` in amu,
    ``temperature`` in Hartree (``k_B T``).  At zero temperature the widths
    are ``sqrt(1/(2 m omega))`` and ``sqrt(m omega / 2)`` in atomic units.
    """
    if omega <= 0 or mass <= 0:
        raise ValueError("omega and mass must be positive")
    if n < 1:
        raise ValueError("need at least one sample")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    m = _mass_au(mass)
    scale = 1.0 if temperature == 0 else 1.0 / np.tanh(omega / (2.0 * temperature))
    sigma_r = np.sqrt(scale / (2.0 * m * omega)) * BOHR_IN_ANGSTROM
    sigma_p = np.sqrt(scale * m * omega / 2.0)
    rng = np.random.default_rng(seed)
    r = center + sigma_r * rng.standard_normal(n)
    v = velocity + sigma_p * rng.standard_normal(n) / m * BOHR_IN_ANGSTROM
    return r, v


# --- propagation -------------------------------------------------------------------------


@dataclass
class TrajectoryState:
    R: float
    v: float
    mass: float
    active_surface: int
    c: np.ndarray
    t: float = 0.0
    status: str = ACTIVE

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=complex)
        if not 0 <= self.active_surface < len(self.c):
            raise ValueError("active surface outside the state list")
        if abs(np.vdot(self.c, self.c).real - 1.0) > 1e-8:
            raise ValueError("electronic amplitudes are not normalized")

    def total_energy(self, surfaces: SurfaceModel) -> float:
        e, _, _ = surfaces.evaluate(self.R)
        return float(e[0, self.active_surface] + kinetic_energy(self.v, self.mass))


def _propagator(e, vd, dt):
    """``exp(-i dt (diag(e) - i vd))`` for stacked energies and velocity-weighted couplings."""
    h = -1j * vd.astype(complex)
    idx = np.arange(e.shape[1])
    h[:, idx, idx] += e
    w, u = np.linalg.eigh(h)
    return np.einsum("nij,nj,nkj->nik", u, np.exp(-1j * dt * w), u.conj())


def _electronic_step(surfaces, r0, r1, v0, v1, c, dt):
    mats = []
    for s in _GAUSS:
        e, _, d = surfaces.evaluate(r0 + s * (r1 - r0))
        # a global energy shift only changes the overall phase
        mats.append((e - e[:, :1], (v0 + s * (v1 - v0))[:, None, None] * d))
    (e1, vd1), (e2, vd2) = mats
    a, b = _CF4
    first = _propagator(b * e1 + a * e2, b * vd1 + a * vd2, dt)
    second = _propagator(a * e1 + b * e2, a * vd1 + b * vd2, dt)
    return np.einsum("nij,nj->ni", second, np.einsum("nij,nj->ni", first, c))


def hop_probabilities(c, v, d, active) -> np.ndarray:
    """``max(0, 2 dt Re(c_k^* c_l v d_kl) / |c_k|^2)`` per unit time step, ``k`` active."""
    n = len(active)
    rows = np.arange(n)
    ck = c[rows, active]
    dk = d[rows, active, :]
    flux = 2.0 * np.real(np.conj(ck)[:, None] * c * v[:, None] * dk)
    p = flux / np.maximum(np.abs(ck) ** 2, 1e-300)[:, None]
    p[rows, active] = 0.0
    return np.maximum(p, 0.0)


class _Streams:
    """One generator per trajectory, drawn in blocks to keep the loop vectorized."""

    def __init__(self, seed: int, n: int):
        self.gens = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
        self.pos = RNG_BLOCK
        self.block = None

    def draw(self) -> np.ndarray:
        if self.pos == RNG_BLOCK:
            self.block = np.stack([g.random(RNG_BLOCK) for g in self.gens], axis=1)
            self.pos = 0
        out = self.block[self.pos]
        self.pos += 1
        return out


@dataclass
class _Batch:
    R: np.ndarray
    v: np.ndarray
    c: np.ndarray
    active: np.ndarray
    alive: np.ndarray
    a: np.ndarray
    n_hops: np.ndarray
    n_frustrated: np.ndarray


def _step(batch: _Batch, surfaces: SurfaceModel, dt: float, mass: float, xi: np.ndarray, reverse_frustrated: bool) -> None:
    idx = np.flatnonzero(batch.alive)
    if idx.size == 0:
        return
    r0, v0, a0 = batch.R[idx], batch.v[idx], batch.a[idx]
    r1 = r0 + v0 * dt + 0.5 * a0 * dt**2
    out = ~surfaces.inside(r1)
    if out.any():
        batch.alive[idx[out]] = False
        idx, r0, v0, a0, r1 = idx[~out], r0[~out], v0[~out], a0[~out], r1[~out]
        if idx.size == 0:
            return
    active = batch.active[idx]
    rows = np.arange(idx.size)
    e1, f1, d1 = surfaces.evaluate(r1)
    a1 = acceleration(f1[rows, active], mass)
    v1 = v0 + 0.5 * (a0 + a1) * dt
    c = _electronic_step(surfaces, r0, r1, v0, v1, batch.c[idx], dt)

    p = dt * hop_probabilities(c, v1, d1, active)
    cum = np.cumsum(p, axis=1)
    hop = cum[:, -1] > xi[idx]
    target = np.where(hop, np.argmax(cum > xi[idx][:, None], axis=1), active)
    for j in np.flatnonzero(hop):
        k, l = active[j], target[j]
        ke = kinetic_energy(v1[j], mass) + e1[j, k] - e1[j, l]
        if ke >= 0:
            v1[j] = np.sign(v1[j]) * speed_for_energy(ke, mass) if v1[j] != 0 else speed_for_energy(ke, mass)
            active[j] = l
            a1[j] = acceleration(f1[j, l], mass)
            batch.n_hops[idx[j]] += 1
        else:
            batch.n_frustrated[idx[j]] += 1
            if reverse_frustrated:
                v1[j] = -v1[j]
    batch.R[idx], batch.v[idx], batch.a[idx], batch.c[idx], batch.active[idx] = r1, v1, a1, c, active


def fssh_step(traj: TrajectoryState, surfaces: SurfaceModel, dt: float, rng: np.random.Generator, reverse_frustrated: bool = False) -> TrajectoryState:
    """One surface-hopping step for a single trajectory.

    Velocity Verlet on the active surface, unitary propagation of the
    amplitudes with the instantaneous energies and ``v d_kl`` couplings, then
    a hop attempt.  Leaving the grid sets ``status`` instead of raising.
    """
    if dt <= 0:
        raise ValueError("time step must be positive")
    if traj.status != ACTIVE:
        return traj
    if not surfaces.inside(traj.R):
        raise OutOfGridError(f"R = {traj.R} outside the surface grid")
    _, f, _ = surfaces.evaluate(traj.R)
    batch = _Batch(
        R=np.array([traj.R]),
        v=np.array([traj.v]),
        c=traj.c[None, :].copy(),
        active=np.array([traj.active_surface]),
        alive=np.array([True]),
        a=acceleration(f[:, traj.active_surface], traj.mass),
        n_hops=np.zeros(1, dtype=int),
        n_frustrated=np.zeros(1, dtype=int),
    )
    _step(batch, surfaces, dt, traj.mass, np.array([rng.random()]), reverse_frustrated)
    _check_norm(batch.c)
    status = ACTIVE if batch.alive[0] else TERMINATED
    return TrajectoryState(float(batch.R[0]), float(batch.v[0]), traj.mass, int(batch.active[0]), batch.c[0], traj.t + dt, status)


def _check_norm(c: np.ndarray) -> float:
    drift = float(np.abs(np.einsum("ni,ni->n", c.conj(), c).real - 1.0).max(initial=0.0))
    if drift > NORM_TOLERANCE:
        raise IntegratorError(f"amplitude norm drift {drift:.2e} exceeds {NORM_TOLERANCE:.0e}")
    return drift


@dataclass
class SwarmResult:
    """Populations per recorded time; trajectories that leave the grid keep their last surface."""

    t: np.ndarray
    populations: np.ndarray
    mean_amplitudes: np.ndarray
    n_traj: int
    seed: int
    dt: float
    method: str = ""
    n_hops: int = 0
    n_frustrated: int = 0
    n_terminated: int = 0
    terminated_at: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_norm_drift: float = 0.0
    status: str = "ok"

    @property
    def n_states(self) -> int:
        return self.populations.shape[1]

    def to_csv(self) -> str:
        k = self.n_states
        head = ["t"] + [f"pop{i}" for i in range(k)] + [f"mean_c2_{i}" for i in range(k)]
        lines = ["# schema: swarm v1", ",".join(head)]
        for i, t in enumerate(self.t):
            vals = [t] + list(self.populations[i]) + list(self.mean_amplitudes[i])
            lines.append(",".join(f"{x:.10e}" for x in vals))
        return "\n".join(lines) + "\n"


def run_swarm(
    surfaces: SurfaceModel,
    initial_conditions,
    dt: float = 0.1,
    t_max: float = 1000.0,
    seed: int = 0,
    mass: float = HYDROGEN_MASS_AMU,
    initial_state: int = 0,
    record_every: int = 10,
    reverse_frustrated: bool = False,
) -> SwarmResult:
    """Propagate a swarm from ``(R, v)`` arrays; returns surface populations over time.

    Each trajectory draws its hop decisions from its own stream spawned from
    ``seed``, so results do not depend on how trajectories are batched.
    """
    r, v = (np.asarray(x, dtype=float) for x in initial_conditions)
    n = len(r)
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    if not 0 <= initial_state < surfaces.n_states:
        raise ValueError("initial state outside the surface set")
    n_steps = int(round(t_max / dt))
    c = np.zeros((n, surfaces.n_states), dtype=complex)
    c[:, initial_state] = 1.0
    alive = surfaces.inside(r)
    if not alive.all():
        log.warning("%d initial conditions outside the grid", int((~alive).sum()))
    a = np.zeros(n)
    if alive.any():
        _, f, _ = surfaces.evaluate(r[alive])
        a[alive] = acceleration(f[:, initial_state], mass)
    batch = _Batch(r.copy(), v.copy(), c, np.full(n, initial_state), alive, a, np.zeros(n, dtype=int), np.zeros(n, dtype=int))
    streams = _Streams(seed, n)
    terminated_at = np.full(n, np.nan)
    terminated_at[~alive] = 0.0
    times, pops, amps = [], [], []
    drift = 0.0

    def record(step):
        times.append(step * dt)
        pops.append(np.bincount(batch.active, minlength=surfaces.n_states) / n)
        amps.append(np.mean(np.abs(batch.c) ** 2, axis=0))

    record(0)
    for step in range(1, n_steps + 1):
        was_alive = batch.alive.copy()
        _step(batch, surfaces, dt, mass, streams.draw(), reverse_frustrated)
        terminated_at[was_alive & ~batch.alive] = step * dt
        drift = max(drift, _check_norm(batch.c))
        if step % record_every == 0 or step == n_steps:
            record(step)
    n_term = int(np.isfinite(terminated_at).sum())
    status = "ok"
    if n_term == n and n_steps > 0 and np.nanmax(terminated_at) < n_steps * dt:
        status = "partial"
        log.warning("all trajectories left the grid before t_max")
    return SwarmResult(
        t=np.array(times),
        populations=np.array(pops),
        mean_amplitudes=np.array(amps),
        n_traj=n,
        seed=seed,
        dt=dt,
        method=surfaces.method,
        n_hops=int(batch.n_hops.sum()),
        n_frustrated=int(batch.n_frustrated.sum()),
        n_terminated=n_term,
        terminated_at=terminated_at,
        max_norm_drift=drift,
        status=status,
    )
