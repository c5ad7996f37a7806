"""Zeros of the Bessel solution by radial ODE shooting.

Large orders (nu ~ pi/t) sink classical series evaluation, so the zeros are
found directly from the radial equation v'' + v'/r + (1 - nu²/r²) v = 0: a
Riccati integration carries the regular solution's log-derivative through
the forbidden region, then a linear sweep through the oscillatory shell
brackets the zeros of v, each polished on the dense output.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

__all__ = ["radial_bessel_zeros"]


def _series_logderivative(nu: float, r: float) -> float:
    """d/dr log J_nu(r) from the ascending series (needs r² « 4 nu)."""
    q = 0.25 * r * r
    term = 1.0
    s = 1.0
    ds = 0.0  # d/dq of the series
    for m in range(1, 60):
        term *= -q / (m * (nu + m))
        s += term
        ds += term * m / q
        if abs(term) < 1e-18 * abs(s):
            break
    return nu / r + (0.5 * r) * ds / s


def _forbidden_sweep(nu: float, r0: float, r1: float, u0: float) -> float:
    """Riccati u = v'/v from r0 to r1 (< turning point, no zeros of v)."""

    def rhs(r, y):
        u = y[0]
        return (-u * u - u / r - (1.0 - nu * nu / (r * r)),)

    sol = solve_ivp(rhs, (r0, r1), (u0,), method="DOP853", rtol=1e-12, atol=1e-12)
    if not sol.success:  # pragma: no cover
        raise RuntimeError(f"Riccati sweep failed: {sol.message}")
    return float(sol.y[0][-1])


def radial_bessel_zeros(nu: float, k_max: int, rtol: float = 1e-12) -> list[float]:
    """First k_max positive zeros of the regular radial solution of order nu."""
    if nu < 0 or k_max < 1:
        raise ValueError("need nu >= 0 and k_max >= 1")
    # seed radius: keep the ascending series comfortably convergent
    r_seed = min(0.5 * max(nu, 1.0), math.sqrt(1.0 + nu))
    u_seed = _series_logderivative(nu, r_seed)
    # hand off to the linear sweep a bit below the turning point r = nu
    r_lin = max(r_seed, 0.95 * nu)
    u_lin = u_seed if r_lin <= r_seed else _forbidden_sweep(nu, r_seed, r_lin, u_seed)

    def rhs(r, y):
        v, dv = y
        return (dv, -dv / r - (1.0 - nu * nu / (r * r)) * v)

    zeros: list[float] = []
    span = max(2.0, 4.0 * max(nu, 1.0) ** (1.0 / 3.0))
    state = (1.0, u_lin)
    r_from = r_lin
    while len(zeros) < k_max:
        r_to = r_from + span
        sol = solve_ivp(
            rhs,
            (r_from, r_to),
            state,
            method="DOP853",
            rtol=rtol,
            atol=0.0,
            dense_output=True,
        )
        if not sol.success:  # pragma: no cover
            raise RuntimeError(f"oscillatory sweep failed: {sol.message}")
        wavelen = 2.0 * math.pi / math.sqrt(max(1.0 - (nu / r_to) ** 2, 1e-4))
        n_samp = max(int(span / wavelen * 40), 50)
        rs = np.linspace(r_from, r_to, n_samp)
        vs = sol.sol(rs)[0]
        sign_change = np.nonzero(vs[:-1] * vs[1:] < 0)[0]
        for j in sign_change:
            if len(zeros) >= k_max:
                break
            zero = brentq(lambda r: sol.sol(r)[0], rs[j], rs[j + 1], xtol=1e-13, rtol=8.9e-16)
            zeros.append(float(zero))
        # renormalize the state to keep amplitudes tame across chunks
        v_end, dv_end = sol.y[0][-1], sol.y[1][-1]
        scale = max(abs(v_end), abs(dv_end), 1e-280)
        state = (v_end / scale, dv_end / scale)
        r_from = r_to
        if r_from > r_lin + 1e5:  # pragma: no cover
            raise RuntimeError("zero search ran away")
    return zeros
