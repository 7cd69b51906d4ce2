"""Sparse assembly of the weak-form matrices on a meshed metric graph.

The discrete system couples, per edge, the weighted stiffness
``mu_j * int c_j u' v'`` and potential ``mu_j * int p_j u v`` terms, plus an
n x n vertex block carrying the negated coupling matrix.  The Kirchhoff flux
balance is not imposed strongly: it is the natural condition of the weak
form and is recovered under mesh refinement.

Sign conventions: with S the stiffness+potential matrix, K the scattered
``-M`` block and G the mass matrix, the semi-discrete flow reads
``G du/dt = A_form u`` with ``A_form = -(S + K)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    FactorizationFailure,
    NegativePotential,
    NonpositiveConductance,
    ValidationFailure,
)
from .fields import EdgeFieldSet
from .graph import VertexMatrix, validate_vertex_matrix
from .mesh import _GAUSS_XI, Mesh


@dataclass(frozen=True)
class DiscreteSystem:
    """Assembled matrices of the weak form on a fixed mesh."""

    mesh: Mesh
    fields: EdgeFieldSet
    vertex_matrix: VertexMatrix
    mass: sp.csr_matrix                 # G, symmetric positive definite
    stiffness_potential: sp.csr_matrix  # S
    vertex_coupling: sp.csr_matrix      # K = -M scattered onto vertex dofs
    form_matrix: sp.csr_matrix          # A_form = -(S + K)
    lumped_mass: np.ndarray             # row sums of G

    @property
    def ndof(self) -> int:
        return self.mesh.ndof

    def e2_norm(self, state: np.ndarray) -> float:
        """Weighted L2 norm computed exactly through the mass matrix."""
        state = np.asarray(state, dtype=float)
        return float(np.sqrt(state @ (self.mass @ state)))

    def einf_norm(self, state: np.ndarray) -> float:
        return float(np.abs(np.asarray(state)).max())

    def total_mass(self, state: np.ndarray) -> float:
        """The conserved functional sum_j mu_j * int u_j in the zero-row-sum case."""
        return float(np.ones(self.ndof) @ (self.mass @ np.asarray(state)))


def assemble_form(mesh: Mesh, fields: EdgeFieldSet, matrix: VertexMatrix) -> DiscreteSystem:
    """Assemble mass, stiffness+potential and vertex coupling matrices.

    Element integrals of the variable coefficients use 2-point Gauss
    quadrature (exact for constant coefficients).  The vertex matrix must
    pass basic validation; coefficient signs are re-checked at the
    quadrature points.
    """
    n, m = mesh.graph.n_vertices, mesh.n_edges
    report = validate_vertex_matrix(matrix, "basic", n_vertices=n)
    if not report.passed:
        raise ValidationFailure(
            f"vertex matrix failed basic validation: {report.failed_names()}", report)
    if fields.n_edges != m:
        raise DimensionMismatch(f"fields describe {fields.n_edges} edges, mesh has {m}")

    h = mesh.h
    n_elem = mesh.n_interior + 1
    # local coordinates of the two Gauss points in every element of one edge
    elem_left = h * np.arange(n_elem)
    gauss_x = elem_left[:, None] + h * _GAUSS_XI[None, :]
    phi_left = 1.0 - _GAUSS_XI
    phi_right = _GAUSS_XI

    rows_g, cols_g, vals_g = [], [], []
    rows_s, cols_s, vals_s = [], [], []
    for j in range(m):
        mu = fields.weights[j]
        c_vals = np.broadcast_to(np.asarray(fields.conductance[j](gauss_x), dtype=float),
                                 gauss_x.shape)
        p_vals = np.broadcast_to(np.asarray(fields.potential[j](gauss_x), dtype=float),
                                 gauss_x.shape)
        if np.any(c_vals <= 0.0):
            raise NonpositiveConductance(f"conductance on edge {j + 1} nonpositive at a quadrature point")
        if np.any(p_vals < 0.0):
            raise NegativePotential(f"potential on edge {j + 1} negative at a quadrature point")

        stiff = mu * 0.5 * c_vals.sum(axis=1) / h          # mu * int_elem c * (1/h)^2
        pot_ll = mu * 0.5 * h * (p_vals * phi_left ** 2).sum(axis=1)
        pot_lr = mu * 0.5 * h * (p_vals * phi_left * phi_right).sum(axis=1)
        pot_rr = mu * 0.5 * h * (p_vals * phi_right ** 2).sum(axis=1)
        mass_ll = mu * 0.5 * h * np.full(n_elem, (phi_left ** 2).sum())
        mass_lr = mu * 0.5 * h * np.full(n_elem, (phi_left * phi_right).sum())
        mass_rr = mu * 0.5 * h * np.full(n_elem, (phi_right ** 2).sum())

        left = mesh.edge_dofs[j, :-1]
        right = mesh.edge_dofs[j, 1:]
        for r, c, v in (
            (left, left, stiff + pot_ll),
            (right, right, stiff + pot_rr),
            (left, right, -stiff + pot_lr),
            (right, left, -stiff + pot_lr),
        ):
            rows_s.append(r)
            cols_s.append(c)
            vals_s.append(v)
        for r, c, v in (
            (left, left, mass_ll),
            (right, right, mass_rr),
            (left, right, mass_lr),
            (right, left, mass_lr),
        ):
            rows_g.append(r)
            cols_g.append(c)
            vals_g.append(v)

    ndof = mesh.ndof
    G = sp.coo_matrix(
        (np.concatenate(vals_g), (np.concatenate(rows_g), np.concatenate(cols_g))),
        shape=(ndof, ndof)).tocsr()
    S = sp.coo_matrix(
        (np.concatenate(vals_s), (np.concatenate(rows_s), np.concatenate(cols_s))),
        shape=(ndof, ndof)).tocsr()

    vi, vk = np.meshgrid(mesh.vertex_dofs, mesh.vertex_dofs, indexing="ij")
    K = sp.coo_matrix(
        (-matrix.entries.ravel(), (vi.ravel(), vk.ravel())), shape=(ndof, ndof)).tocsr()
    K.eliminate_zeros()

    A_form = (-(S + K)).tocsr()
    lumped = np.asarray(G.sum(axis=1)).ravel()
    return DiscreteSystem(mesh, fields, matrix, G, S, K, A_form, lumped)


def noise_covariance_factor(system: DiscreteSystem, lumped: bool = False) -> sp.csc_matrix:
    """Lower-triangular factor L with L L^T equal to the mass matrix.

    Gaussian increments ``sqrt(dt) * L z`` then have covariance ``dt * G``,
    the coordinate form of space-time white noise tested against the nodal
    basis.  With ``lumped=True`` the factor is the diagonal square root of
    the row-sum lumped mass.
    """
    if lumped:
        return sp.diags(np.sqrt(system.lumped_mass)).tocsc()
    try:
        dense = np.linalg.cholesky(system.mass.toarray())
    except np.linalg.LinAlgError as err:
        raise FactorizationFailure(f"mass matrix is not positive definite: {err}") from err
    factor = sp.csc_matrix(dense)
    factor.eliminate_zeros()
    return factor


def dump_matrices(system: DiscreteSystem, directory) -> list[str]:
    """Write mass/form matrices in Matrix Market coordinate format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, matrix in (
        ("mass", system.mass),
        ("stiffness_potential", system.stiffness_potential),
        ("vertex_coupling", system.vertex_coupling),
        ("form", system.form_matrix),
    ):
        path = directory / f"{name}.mtx"
        scipy.io.mmwrite(path, sp.coo_matrix(matrix))
        written.append(str(path))
    return written
