"""Independent oracles used by the test suite.

These deliberately avoid the package's assembly/eigensolver code paths:
the Robin spectrum comes from the scalar boundary-value problem's
characteristic equation, contraction/positivity cross-checks use dense
matrix exponentials, and Monte Carlo reference statistics use plain numpy.
"""

import numpy as np
from scipy.optimize import brentq


def robin_eigenvalues(count, kappa=1.0):
    """Eigenvalues of u'' = lambda*u on (0,1) with u'(0) = kappa*u(0) and
    -u'(1) = kappa*u(1), found by bisection on the characteristic equation.

    With lambda = -omega^2 the eigenfunction is cos(omega x) +
    (kappa/omega) sin(omega x) and omega must satisfy
    (omega^2 - kappa^2) sin(omega) = 2 kappa omega cos(omega).
    """
    def characteristic(omega):
        return (omega ** 2 - kappa ** 2) * np.sin(omega) - 2.0 * kappa * omega * np.cos(omega)

    roots = []
    grid = np.linspace(1e-6, (count + 3) * np.pi, 20000)
    values = characteristic(grid)
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            roots.append(brentq(characteristic, a, b, xtol=1e-14, rtol=1e-15))
        if len(roots) >= count:
            break
    omegas = np.asarray(roots[:count])
    return -omegas ** 2, omegas


def robin_eigenfunction(omega, kappa=1.0):
    """Unnormalized eigenfunction for the Robin problem above."""
    return lambda x: np.cos(omega * x) + (kappa / omega) * np.sin(omega * x)


def dense_expm_propagator(system, t, lumped=False):
    """Reference nodal propagator via scipy's Pade expm, not spectral data."""
    from scipy.linalg import expm
    A = system.form_matrix.toarray()
    if lumped:
        B = A / system.lumped_mass[:, None]
    else:
        B = np.linalg.solve(system.mass.toarray(), A)
    return expm(t * B)


def ols_slope(x, y):
    """Least-squares slope/intercept/R^2 for small regression cross-checks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fitted = A @ coef
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef[0], coef[1], r2
