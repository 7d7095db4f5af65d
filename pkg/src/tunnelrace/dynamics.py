"""Free, full and transmitted time evolution on the periodic grid."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .grids import QuantumState
from .potentials import PotentialSpec
from .scattering import ScatteringCurve


class NumericalHealthError(RuntimeError):
    """Wraparound or accuracy monitors tripped during a computation."""


DEFAULT_PHASE = 1.0


@dataclass(frozen=True)
class EvolutionParams:
    """Time stepping for :func:`full_evolve`.

    ``potential`` selects the grid representation of V: ``"spectral"``
    (band-limited projection, the default) or ``"cell"`` (cell averages).
    """

    dt: float
    t_final: float
    substeps: int = 1
    guard_fraction: float = 0.05
    leakage_limit: float = 1e-6
    check_every: int = 50
    potential: str = "spectral"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if not 0 < self.guard_fraction < 0.5:
            raise ValueError("guard_fraction must lie in (0, 0.5)")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.potential not in ("spectral", "cell"):
            raise ValueError(f"unknown potential representation {self.potential!r}")

    def steps_for(self, t: float) -> int:
        return int(np.ceil(t / self.dt - 1e-9)) * self.substeps

    @property
    def steps(self) -> int:
        return self.steps_for(self.t_final)

    @property
    def step(self) -> float:
        return self.t_final / self.steps

    def check_phase_bound(self, k_max: float) -> None:
        if self.dt / self.substeps * k_max**2 >= np.pi:
            raise ValueError(f"dt * k_max^2 = {self.dt / self.substeps * k_max**2:.3g} violates the phase bound pi")

    @classmethod
    def for_grid(cls, grid, t_final: float, phase: float = DEFAULT_PHASE, **kw) -> "EvolutionParams":
        """Time step from ``dt * k_max**2 = phase``."""
        if not 0 < phase < np.pi:
            raise ValueError("phase must lie in (0, pi)")
        return cls(dt=phase / grid.k_max**2, t_final=t_final, **kw)

    def halved(self) -> "EvolutionParams":
        return replace(self, dt=self.dt / 2)


def _kinetic(grid, t):
    kk = np.fft.fftfreq(grid.n, d=grid.dx) * 2.0 * np.pi
    return np.exp(-1j * t * kk**2)


def free_evolve(s: QuantumState, t: float) -> QuantumState:
    """Apply ``exp(-i t P^2)`` exactly as a momentum multiplier."""
    phi = s.to("momentum")
    out = phi.with_amps(phi.amps * np.exp(-1j * t * s.grid.k**2))
    return out.to(s.rep) if s.rep != "momentum" else out


def transmitted_evolve(s: QuantumState, curve: ScatteringCurve, t: float, tol: float = 1e-14) -> QuantumState:
    """Apply ``T(P) exp(-i t P^2)``; the result is in the position representation."""
    phi = s.to("momentum")
    mult = curve.multiplier(s.grid.k, mass=phi.density * s.grid.dk, tol=tol)
    out = phi.with_amps(phi.amps * mult * np.exp(-1j * t * s.grid.k**2))
    return out.to("position")


def leakage_monitor(s: QuantumState, guard_fraction: float) -> float:
    """Probability inside the guard bands at both ends of the grid."""
    p = s.to("position")
    m = max(int(np.ceil(guard_fraction * p.grid.n)), 1)
    d = p.density
    return float((np.sum(d[:m]) + np.sum(d[-m:])) * p.grid.dx)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    mean_x: np.ndarray
    norms: np.ndarray
    guard_mass: np.ndarray

    def rows(self):
        return zip(self.times, self.mean_x, self.norms, self.guard_mass)


TRAJECTORY_COLUMNS = ("t", "mean_x", "norm", "guard_mass")


def full_evolve(s: QuantumState, p: PotentialSpec, params: EvolutionParams,
                record: bool = False, check_initial: bool = True,
                times: Sequence[float] | None = None):
    """Strang-split propagation under ``H = P^2 + V``.

    Each step is ``K(dt/2) V(dt) K(dt/2)``.  Guard-band mass is checked every
    ``params.check_every`` steps; exceeding ``params.leakage_limit`` raises
    :class:`NumericalHealthError`.  With ``times`` (increasing, ending at most
    at ``t_final``) a list of snapshots is returned instead of one state; each
    interval between snapshots is stepped with at most ``params.dt``.  With
    ``record=True`` a :class:`Trajectory` is returned alongside.
    """
    grid = s.grid
    params.check_phase_bound(grid.k_max)
    targets = [params.t_final] if times is None else [float(t) for t in times]
    if any(t <= 0 for t in targets) or any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError("snapshot times must be positive and increasing")
    psi = s.to("position").amps.copy()
    if check_initial:
        g0 = leakage_monitor(s, params.guard_fraction)
        if g0 > 1e-12:
            raise NumericalHealthError(f"initial guard-band mass {g0:.3e} exceeds 1e-12")
    v = p.grid_values(grid, params.potential)
    m = max(int(np.ceil(params.guard_fraction * grid.n)), 1)
    log = ([], [], [], [])

    def monitor(t):
        d = np.abs(psi) ** 2
        g = float((np.sum(d[:m]) + np.sum(d[-m:])) * grid.dx)
        if record:
            nrm = float(np.sum(d) * grid.dx)
            for lst, val in zip(log, (t, float(np.sum(grid.x * d) * grid.dx / nrm), nrm, g)):
                lst.append(val)
        if g > params.leakage_limit:
            raise NumericalHealthError(f"guard-band mass {g:.3e} exceeds {params.leakage_limit:.1e} at t={t:.6g}")

    monitor(0.0)
    snaps = []
    t0 = 0.0
    for target in targets:
        n_steps = params.steps_for(target - t0)
        dt = (target - t0) / n_steps
        if not np.any(v):
            # V = 0: the splitting is exact, so jump straight between checkpoints
            done = 0
            while done < n_steps:
                step = min(params.check_every - done % params.check_every, n_steps - done)
                psi = np.fft.ifft(np.fft.fft(psi) * _kinetic(grid, step * dt))
                done += step
                monitor(t0 + done * dt)
            snaps.append(QuantumState(grid, "position", psi))
            t0 = target
            continue
        half = _kinetic(grid, dt / 2)
        full = half * half
        vphase = np.exp(-1j * dt * v)
        psi = np.fft.ifft(np.fft.fft(psi) * half)
        for i in range(1, n_steps + 1):
            psi *= vphase
            last = i == n_steps
            psi = np.fft.ifft(np.fft.fft(psi) * (half if last else full))
            # between full kinetic steps the state lags by dt/2; masses are unaffected
            if last or i % params.check_every == 0:
                monitor(t0 + i * dt)
        snaps.append(QuantumState(grid, "position", psi))
        t0 = target
    out = snaps[-1] if times is None else snaps
    if record:
        return out, Trajectory(*(np.array(lst) for lst in log))
    return out
