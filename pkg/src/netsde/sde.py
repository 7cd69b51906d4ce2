"""Sample paths of the stochastic reaction-diffusion system.

One step of the default linear-implicit scheme solves

    (G - dt*A_form) u+ = G u + dt * G * F_tamed(t, u) + Gamma(t, u) * dW

with the reaction term tamed by its sup norm, ``F_tamed = F / (1 +
dt*max|F|)``, and the noise coefficient acting diagonally on nodal values
(Ito convention: both are evaluated at the left endpoint).  The plain
variant skips taming; exponential Euler applies the exact semigroup to each
term through the spectral decomposition instead of the implicit solve.

Trajectories are embarrassingly parallel: each one derives its own noise
stream from (seed, trajectory, step), owns its state vector, and shares
only frozen inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import DiscreteSystem
from .errors import BlowupDetected, ConfigurationError, LinearSolveFailure
from .fields import DiffusionSpec, DriftSpec
from .mesh import Mesh
from .noise import IncrementSampler, NoiseModel
from .semigroup import SpectralData, generalized_eigs
from .trajectory import TrajectorySet

SCHEMES = ("semi_implicit_tamed", "semi_implicit_plain", "exponential_euler")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "semi_implicit_tamed"
    snapshot_stride: int = 1
    blowup_guard: float = 1e6

    def __post_init__(self):
        if not 0.0 < self.dt <= self.t_end:
            raise ConfigurationError(f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")

    @property
    def n_steps(self) -> int:
        steps = int(round(self.t_end / self.dt))
        if steps < 1 or abs(steps * self.dt - self.t_end) > 1e-8 * self.t_end:
            raise ConfigurationError(
                f"t_end={self.t_end} is not an integer multiple of dt={self.dt}")
        return steps


@dataclass(frozen=True)
class Problem:
    """Everything needed to march trajectories of one configured system."""

    system: DiscreteSystem
    config: SolverConfig
    initial: np.ndarray
    drift: DriftSpec | None = None
    diffusion: DiffusionSpec | None = None
    noise: NoiseModel | None = None
    config_hash: str = ""

    def with_config(self, **changes) -> "Problem":
        return replace(self, config=replace(self.config, **changes))


def nodal_drift_evaluator(spec: DriftSpec | None, mesh: Mesh):
    """Vectorized nodal reaction term F(t, u) -> array over dofs.

    Vertex dofs evaluate through their representative edge; under the
    vertex-compatibility assumption every incident edge gives the same
    value there.  Constant shared coefficients take a fast path without
    per-edge loops.
    """
    if spec is None:
        return None
    d = spec.top_power
    consts = spec.constant_values
    shared_constant = (
        spec.is_constant()
        and all(consts[j] == consts[0] for j in range(1, spec.n_edges))
    )
    if shared_constant:
        coeff = np.asarray(consts[0], dtype=float)

        def evaluate_const(t, u):
            acc = -coeff[d] * u ** d
            for l in range(1, d):
                if coeff[l] != 0.0:
                    acc = acc + coeff[l] * u ** l
            if coeff[0] != 0.0:
                acc = acc + coeff[0]
            return acc

        return evaluate_const

    by_edge = [np.flatnonzero(mesh.dof_edge == j) for j in range(mesh.n_edges)]
    xs = [mesh.dof_x[idx] for idx in by_edge]

    def evaluate(t, u):
        out = np.empty_like(u)
        for j, idx in enumerate(by_edge):
            coeffs = spec.coefficients[j]
            x = xs[j]
            v = u[idx]
            acc = -np.broadcast_to(coeffs[d](t, x), x.shape) * v ** d
            for l in range(1, d):
                acc = acc + np.broadcast_to(coeffs[l](t, x), x.shape) * v ** l
            out[idx] = acc + np.broadcast_to(coeffs[0](t, x), x.shape)
        return out

    return evaluate


def nodal_diffusion_evaluator(spec: DiffusionSpec | None, mesh: Mesh):
    """Diagonal nodal multipliers Gamma(t, u) -> array over dofs."""
    if spec is None:
        return None
    by_edge = [np.flatnonzero(mesh.dof_edge == j) for j in range(mesh.n_edges)]
    xs = [mesh.dof_x[idx] for idx in by_edge]

    def evaluate(t, u):
        out = np.empty_like(u)
        for j, idx in enumerate(by_edge):
            out[idx] = np.broadcast_to(spec.functions[j](t, xs[j], u[idx]), idx.shape)
        return out

    return evaluate


class Stepper:
    """Prefactorized one-step map for a fixed (system, dt, scheme)."""

    def __init__(self, system: DiscreteSystem, dt: float, scheme: str,
                 drift: DriftSpec | None = None, diffusion: DiffusionSpec | None = None,
                 spectral: SpectralData | None = None):
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {scheme!r}")
        self.system = system
        self.dt = float(dt)
        self.scheme = scheme
        self.drift = nodal_drift_evaluator(drift, system.mesh)
        self.diffusion = nodal_diffusion_evaluator(diffusion, system.mesh)
        self.mass = system.mass
        try:
            if scheme == "exponential_euler":
                self._spectral = spectral if spectral is not None else generalized_eigs(system)
                self._decay = np.exp(self._spectral.eigenvalues * self.dt)
                self._project = self._spectral.eigenvectors.T @ system.mass.toarray()
                self._mass_solve = spla.splu(system.mass.tocsc())
            else:
                self._implicit = spla.splu((system.mass - self.dt * system.form_matrix).tocsc())
        except RuntimeError as err:
            raise LinearSolveFailure(str(err)) from err

    def step(self, state: np.ndarray, t: float, increment: np.ndarray | None) -> np.ndarray:
        dt = self.dt
        forcing = None
        if self.drift is not None:
            forcing = self.drift(t, state)
            if self.scheme != "semi_implicit_plain":
                forcing = forcing / (1.0 + dt * float(np.abs(forcing).max()))
        noise_term = None
        if increment is not None:
            gamma = self.diffusion(t, state) if self.diffusion is not None else 1.0
            noise_term = gamma * increment

        if self.scheme == "exponential_euler":
            w = state.copy()
            if forcing is not None:
                w += dt * forcing
            if noise_term is not None:
                w += self._mass_solve.solve(noise_term)
            return self._spectral.eigenvectors @ (self._decay * (self._project @ w))

        rhs = self.mass @ state
        if forcing is not None:
            rhs += dt * (self.mass @ forcing)
        if noise_term is not None:
            rhs += noise_term
        out = self._implicit.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise LinearSolveFailure("implicit solve produced non-finite values")
        return out


def em_step(state: np.ndarray, t: float, dt: float, system: DiscreteSystem,
            drift: DriftSpec | None = None, diffusion: DiffusionSpec | None = None,
            increment: np.ndarray | None = None,
            scheme: str = "semi_implicit_tamed",
            spectral: SpectralData | None = None) -> np.ndarray:
    """One Euler-Maruyama step; convenience wrapper building a fresh Stepper."""
    stepper = Stepper(system, dt, scheme, drift, diffusion, spectral)
    return stepper.step(np.asarray(state, dtype=float), t, increment)


def simulate_path(problem: Problem, trajectory_id: int = 0,
                  stepper: Stepper | None = None) -> TrajectorySet:
    """March one full trajectory and collect snapshots.

    Raises BlowupDetected (tagged with the trajectory id) when the nodal sup
    norm exceeds the configured guard, which signals scheme instability and
    should not occur with taming.
    """
    cfg = problem.config
    n_steps = cfg.n_steps
    if (problem.noise is None) != (problem.diffusion is None):
        raise ConfigurationError(
            "noise model and diffusion coefficients must be supplied together")
    if stepper is None:
        stepper = Stepper(problem.system, cfg.dt, cfg.scheme, problem.drift, problem.diffusion)
    sampler = None
    if problem.noise is not None:
        sampler = IncrementSampler(problem.noise, trajectory_id)

    u = np.asarray(problem.initial, dtype=float).copy()
    stride = max(int(cfg.snapshot_stride), 1)
    times = [0.0]
    states = [u.copy()]
    sup = float(np.abs(u).max())
    guard = float(cfg.blowup_guard)
    for step in range(n_steps):
        t = step * cfg.dt
        dW = sampler(step, cfg.dt) if sampler is not None else None
        u = stepper.step(u, t, dW)
        level = float(np.abs(u).max())
        sup = max(sup, level)
        if not np.isfinite(level) or level > guard:
            raise BlowupDetected(
                f"trajectory {trajectory_id} exceeded guard {guard:g} at step {step + 1}",
                trajectory_id=trajectory_id, step=step + 1)
        if (step + 1) % stride == 0 or step + 1 == n_steps:
            times.append((step + 1) * cfg.dt)
            states.append(u.copy())
    seed = problem.noise.seed if problem.noise is not None else None
    return TrajectorySet(np.asarray(times), np.asarray(states), cfg.scheme, sup,
                         trajectory_id=trajectory_id, seed=seed,
                         config_hash=problem.config_hash)
