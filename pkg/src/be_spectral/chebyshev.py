"""Chebyshev polynomial filtering on symmetric operators.

A filter of order K applies Y = sum_k T_k(Ls) X Theta_k where
Ls = 2 M / lambda_max - I is the operator rescaled so its spectrum lies
in [-1, 1]. The polynomials are evaluated by the three-term recurrence
T_0 = I, T_1 = Ls, T_k = 2 Ls T_{k-1} - T_{k-2}, applied directly to X;
the matrices T_k(Ls) are never materialized, so one application costs
K + 1 matvecs. Coefficients are either scalars (pure filtering) or
(c_in, c_out) matrices (learned layers).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .be import BEOperator, normalized_be
from .operators import SymOperator
from .spectral import lambda_max_power

#: multiplicative slack applied to estimated spectral radii before scaling,
#: so estimation error never pushes the scaled spectrum outside [-1, 1]
LAMBDA_MAX_SLACK = 1.01


@dataclass
class ChebFilter:
    """Order-K Chebyshev filter: per-order coefficients plus the scaling constant.

    ``coefficients[k]`` multiplies T_k; all entries must be scalars or all
    (c_in, c_out) matrices of one shape. ``lambda_max`` may be left None
    and supplied (or estimated) at application time.
    """

    coefficients: list = field(default_factory=list)
    lambda_max: float | None = None

    def __post_init__(self):
        if not self.coefficients:
            raise ValueError("a filter needs at least the order-0 coefficient")
        coeffs = [np.asarray(c, dtype=np.float64) for c in self.coefficients]
        shapes = {c.shape for c in coeffs}
        if len(shapes) != 1:
            raise ValueError(f"coefficient shapes differ: {sorted(shapes)}")
        shape = shapes.pop()
        if shape not in ((),) and len(shape) != 2:
            raise ValueError("coefficients must be scalars or 2-D matrices")
        self.coefficients = coeffs
        if self.lambda_max is not None and self.lambda_max <= 0.0:
            raise ValueError(f"lambda_max must be positive, got {self.lambda_max}")

    @property
    def K(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_scalar(self) -> bool:
        return self.coefficients[0].ndim == 0


def scale_operator(op: SymOperator, lambda_max: float) -> SymOperator:
    """Affine rescale 2 M / lambda_max - I mapping [0, lambda_max] onto [-1, 1]."""
    if lambda_max <= 0.0:
        raise ValueError(f"lambda_max must be positive, got {lambda_max}")
    return op.scaled(2.0 / lambda_max, -1.0)


def cheb_apply(filt: ChebFilter, op: SymOperator, x: np.ndarray) -> np.ndarray:
    """Filter node signals: Y = sum_k T_k(2 op / lambda_max - I) X Theta_k.

    ``x`` has shape (n,) or (n, c_in); scalar coefficients preserve the
    channel count, matrix coefficients map c_in -> c_out.
    """
    if filt.lambda_max is None:
        raise ValueError("filter has no lambda_max; set it or use cheb_apply_be")
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.shape[0] != op.n:
        raise ValueError(f"signal has {x.shape[0]} rows, operator has n={op.n}")
    if not filt.is_scalar and x.shape[1] != filt.coefficients[0].shape[0]:
        raise ValueError(
            f"signal has {x.shape[1]} channels, coefficients expect "
            f"{filt.coefficients[0].shape[0]}"
        )
    ls = scale_operator(op, filt.lambda_max)

    def weighted(z, theta):
        return float(theta) * z if filt.is_scalar else z @ theta

    z_prev = x
    y = weighted(z_prev, filt.coefficients[0])
    if filt.K >= 1:
        z = ls.matvec(x)
        y = y + weighted(z, filt.coefficients[1])
        for k in range(2, filt.K + 1):
            z_prev, z = z, 2.0 * ls.matvec(z) - z_prev
            y = y + weighted(z, filt.coefficients[k])
    return y[:, 0] if squeeze else y


def cheb_apply_be(filt: ChebFilter, be: BEOperator, x: np.ndarray,
                  kind: str = "unnormalized") -> np.ndarray:
    """Apply a Chebyshev filter with the potential-weighted Laplacian.

    ``kind`` selects the raw operator or its symmetric normalization. When
    the filter carries no lambda_max, the spectral radius is estimated by
    power iteration and padded by :data:`LAMBDA_MAX_SLACK`.
    """
    if kind == "unnormalized":
        op = be.operator()
    elif kind == "symmetric":
        op = normalized_be(be, "symmetric")
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    if filt.lambda_max is not None:
        lam = filt.lambda_max
    else:
        lam = LAMBDA_MAX_SLACK * lambda_max_power(op, iters=5000, tol=1e-12)
    return cheb_apply(ChebFilter(filt.coefficients, lam), op, x)


def cheb_spectral_oracle(filt: ChebFilter, op: SymOperator, x: np.ndarray) -> np.ndarray:
    """Reference implementation in the eigenbasis (O(n^3); for validation).

    Diagonalizes the operator, evaluates each T_k on the rescaled
    eigenvalues and assembles Y = sum_k U diag(T_k) U^T X Theta_k.
    """
    from .spectral import eig_sym

    if filt.lambda_max is None:
        raise ValueError("oracle needs an explicit lambda_max")
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    dec = eig_sym(op)
    lam_s = 2.0 * dec.eigenvalues / filt.lambda_max - 1.0
    u = dec.eigenvectors
    ut_x = u.T @ x
    t_prev = np.ones_like(lam_s)
    t_cur = lam_s.copy()
    y = np.zeros((x.shape[0], x.shape[1] if filt.is_scalar
                  else filt.coefficients[0].shape[1]))
    for k in range(filt.K + 1):
        if k == 0:
            tk = t_prev
        elif k == 1:
            tk = t_cur
        else:
            t_prev, t_cur = t_cur, 2.0 * lam_s * t_cur - t_prev
            tk = t_cur
        basis = u @ (tk[:, None] * ut_x)
        theta = filt.coefficients[k]
        y += float(theta) * basis if filt.is_scalar else basis @ theta
    return y[:, 0] if squeeze else y
