"""Trajectory containers shared by the deterministic and stochastic solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TrajectorySet:
    """Snapshots of one run: times, states in FEM coordinates, provenance.

    Vertex continuity holds at every snapshot by construction of the shared
    vertex dofs.  ``sup_norm`` is the maximum nodal absolute value over every
    step taken (not only the saved snapshots).
    """

    times: np.ndarray       # (n_snap,)
    states: np.ndarray      # (n_snap, ndof)
    scheme: str
    sup_norm: float
    trajectory_id: int = 0
    seed: int | None = None
    config_hash: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def n_snapshots(self) -> int:
        return len(self.times)

    def final_state(self) -> np.ndarray:
        return self.states[-1]
