"""Check-function primitives for quantile regression.

All three functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidConfigError


def _require_tau(tau) -> None:
    if not np.all((np.asarray(tau) > 0) & (np.asarray(tau) < 1)):
        raise InvalidConfigError(f"tau must lie in (0, 1), got {tau}")


def check_loss(u, tau):
    """Check loss rho_tau(u) = u * (tau - 1{u < 0}); nonnegative, zero iff u = 0."""
    _require_tau(tau)
    u = np.asarray(u, dtype=float)
    out = u * (tau - (u < 0))
    return out if out.ndim else float(out)


def psi(u, tau):
    """Check-loss subgradient tau - 1{u <= 0}; the indicator fires at u = 0."""
    _require_tau(tau)
    u = np.asarray(u, dtype=float)
    out = tau - (u <= 0)
    return out if out.ndim else float(out)


def knight_gap(u1, u2, tau):
    """Residual of Knight's identity; identically zero up to rounding.

    The identity decomposes a check-loss increment into a subgradient term
    plus an integral remainder:

        rho_tau(u1 - u2) - rho_tau(u1)
            = -u2 * psi_tau(u1) + u2 * int_0^1 [1{u1 <= u2*s} - 1{u1 <= 0}] ds.

    The integral has the closed form (u2 - u1) * 1{0 < u1 <= u2}
    + (u1 - u2) * 1{u2 < u1 <= 0}, i.e. the overshoot of u1 past 0 toward u2.
    Returns LHS - RHS.
    """
    _require_tau(tau)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    lhs = check_loss(u1 - u2, tau) - check_loss(u1, tau)
    overshoot = np.where(
        (u1 > 0) & (u1 <= u2),
        u2 - u1,
        np.where((u1 <= 0) & (u2 < u1), u1 - u2, 0.0),
    )
    rhs = -u2 * psi(u1, tau) + overshoot
    out = lhs - rhs
    return out if out.ndim else float(out)
