"""One-dimensional SBP finite-difference operators.

Diagonal-norm first-derivative operators of interior order 4 and 6 together
with compatible variable-coefficient second derivatives.  The second
derivative is assembled from the split

    H D2(c) = -M(c) - e_l c_0 d_l^T + e_r c_{m-1} d_r^T,
    M(c)    = D1^T H diag(c) D1 + R(c),

where R(c) = sum_k (gamma_k / h) D_k^T diag(c) D_k is symmetric, positive
semidefinite for c >= 0 and linear in c (D_k are undivided k-th differences
with one-sided closures).  The boundary derivative rows d_l, d_r are the
standard one-sided stencils of width order/2 + 2.

Operator sparsity uses CSR; operators are immutable after construction.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import _tables
from .errors import ConfigurationError, DimensionError

#: minimum grid sizes (twice the closure width)
MIN_POINTS = {4: 8, 6: 12}

#: supported interior orders
ORDERS = (4, 6)


def _table(name, order):
    return getattr(_tables, f"{name}_{order}")


def _binomial_row(k):
    row = [Fraction(1)]
    for _ in range(k):
        row = [a - b for a, b in zip(row + [Fraction(0)], [Fraction(0)] + row)]
    return [(-1) ** k * v for v in reversed(row)]


def _dk_matrix(k, m):
    """Undivided k-th difference with mirror-symmetric one-sided closures."""
    b = np.array([float(v) for v in _binomial_row(k)])
    half = (k + 1) // 2
    rows, cols, vals = [], [], []
    for i in range(half, m - half):
        rows.extend([i] * (k + 1))
        cols.extend(range(i - half, i - half + k + 1))
        vals.extend(b)
    for i in range(half):
        rows.extend([i] * (k + 1))
        cols.extend(range(k + 1))
        vals.extend(b)
        rows.extend([m - 1 - i] * (k + 1))
        cols.extend(range(m - k - 1, m))
        vals.extend(b[::-1] * (-1) ** k)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


@dataclass(frozen=True)
class SbpOperatorSet1D:
    """First-derivative SBP operator set on a uniform grid.

    H is stored as the diagonal (including the h factor); D1 in 1/h units.
    r_terms holds the (weight, D_k) factors of the second-derivative
    remainder, with the dimensional 1/h already folded into the weight.
    """

    m: int
    h: float
    order: int
    H: np.ndarray
    D1: sp.csr_matrix
    e_l: np.ndarray
    e_r: np.ndarray
    d_l: np.ndarray
    d_r: np.ndarray
    r_terms: tuple

    @property
    def grid(self):
        return np.arange(self.m) * self.h

    def norm_inner(self, u, v):
        return float(np.dot(u, self.H * v))


@dataclass(frozen=True)
class SbpSecondDerivative1D:
    """Compatible variable-coefficient second derivative d/dx(c d/dx)."""

    base: SbpOperatorSet1D
    c: np.ndarray
    D2c: sp.csr_matrix
    Mc: sp.csr_matrix
    Rc: sp.csr_matrix


def build_first_derivative(m, h, order):
    """Construct the 1D SBP operator set for `m` points with spacing `h`.

    Raises ConfigurationError if order is unsupported or m is below the
    minimum (twice the boundary closure width).
    """
    if order not in ORDERS:
        raise ConfigurationError(f"unsupported SBP order {order}; pick one of {ORDERS}")
    if m < MIN_POINTS[order]:
        raise ConfigurationError(
            f"order-{order} operators need at least {MIN_POINTS[order]} points, got {m}"
        )
    if h <= 0:
        raise ConfigurationError(f"grid spacing must be positive, got {h}")

    h_left = [float(v) for v in _table("H_LEFT", order)]
    corner = [[float(v) for v in row] for row in _table("Q_CORNER", order)]
    stint = [float(v) for v in _table("D1_INTERIOR", order)]
    r = len(h_left)
    w = len(corner[0])
    half = len(stint) // 2

    Hg = np.ones(m)
    Hg[:r] = h_left
    Hg[m - r:] = h_left[::-1]

    rows, cols, vals = [], [], []
    for i in range(r):
        for j in range(w):
            if corner[i][j] != 0.0:
                rows.append(i)
                cols.append(j)
                vals.append(corner[i][j])
                rows.append(m - 1 - i)
                cols.append(m - 1 - j)
                vals.append(-corner[i][j])
    for i in range(r, m - r):
        for s, v in enumerate(stint):
            if v != 0.0:
                rows.append(i)
                cols.append(i - half + s)
                vals.append(v)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    D1 = sp.diags(1.0 / (Hg * h)) @ Q

    dl = np.array([float(v) for v in _table("DL_ROW", order)]) / h
    e_l = np.zeros(m)
    e_l[0] = 1.0
    e_r = np.zeros(m)
    e_r[-1] = 1.0
    d_l = np.zeros(m)
    d_l[: len(dl)] = dl
    d_r = np.zeros(m)
    d_r[-len(dl):] = -dl[::-1]

    gammas = _table("R_GAMMAS", order)
    terms = tuple((float(g) / h, _dk_matrix(k, m)) for k, g in sorted(gammas.items()))

    return SbpOperatorSet1D(
        m=m, h=h, order=order, H=Hg * h, D1=D1.tocsr(),
        e_l=e_l, e_r=e_r, d_l=d_l, d_r=d_r, r_terms=terms,
    )


def remainder_matrix(base, c):
    """R(c): symmetric PSD remainder of the compatible split, linear in c."""
    c = np.asarray(c, dtype=float)
    if c.shape != (base.m,):
        raise DimensionError(f"coefficient vector must have length {base.m}, got {c.shape}")
    R = None
    for w, Dk in base.r_terms:
        term = Dk.T @ sp.diags(w * c) @ Dk
        R = term if R is None else R + term
    return R.tocsr()


def build_second_derivative(base, c):
    """Compatible variable-coefficient second derivative for coefficients c."""
    c = np.asarray(c, dtype=float)
    if c.shape != (base.m,):
        raise DimensionError(f"coefficient vector must have length {base.m}, got {c.shape}")
    Rc = remainder_matrix(base, c)
    Mc = (base.D1.T @ sp.diags(base.H * c) @ base.D1 + Rc).tocsr()
    HD2 = (-Mc).tolil()
    HD2[0, :] = HD2[0, :] - c[0] * sp.lil_matrix(base.d_l)
    HD2[-1, :] = HD2[-1, :] + c[-1] * sp.lil_matrix(base.d_r)
    D2c = sp.diags(1.0 / base.H) @ HD2.tocsr()
    return SbpSecondDerivative1D(base=base, c=c, D2c=D2c.tocsr(), Mc=Mc, Rc=Rc)


def build_time_quadrature(n, dt):
    """SBP-in-time quadrature weights (order-6 diagonal norm) on n points.

    Integrates polynomials up to degree 5 exactly over [0, (n-1) dt].
    """
    closure = [float(v) for v in _table("H_LEFT", 6)]
    if n < 2 * len(closure):
        raise ConfigurationError(
            f"time quadrature needs at least {2 * len(closure)} points, got {n}"
        )
    if dt <= 0:
        raise ConfigurationError(f"time step must be positive, got {dt}")
    w = np.ones(n)
    w[: len(closure)] = closure
    w[n - len(closure):] = closure[::-1]
    return w * dt
