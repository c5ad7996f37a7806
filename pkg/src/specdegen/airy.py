"""The Airy solution pair A±, their zeros, and the turning-point kernel.

``A_minus`` is the recessive (decaying) solution of A'' = u A and ``A_plus``
the dominant one, normalized so that ``A_pm / sqrt(pi)`` are the classical
Ai and Bi.  Everything downstream divides by the Wronskian, so the overall
normalization never leaks into kernel values or zero locations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .numerics import simpson_weights

__all__ = [
    "AiryPair",
    "AiryZeros",
    "AiryKernel",
    "airy_eval",
    "airy_zeros",
    "model_operator_eigs",
    "kernel_solve",
    "kernel_hs_norm",
    "airy_mass",
    "KernelResolutionError",
]

_SQRT_PI = math.sqrt(math.pi)
_C1 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)  # Ai(0)
_C2 = 3.0 ** (-1.0 / 3.0) / math.gamma(1.0 / 3.0)  # -Ai'(0)

# Branch switch points.  Inside [_U_NEG, _U_POS_SERIES] the Maclaurin series
# is stable for the pair (f, g); the decaying combination cancels badly for
# u > _U_MINUS_SERIES and is continued from u = 8 instead (see _am_table).
_U_NEG = -7.0
_U_POS_SERIES = 8.0
_U_MINUS_SERIES = 2.0
_U_MINUS_ASYM = 6.5
# exp((2/3) u^(3/2)) overflows for u beyond ~104.2
_U_OVERFLOW = (1.5 * math.log(8e307)) ** (2.0 / 3.0)


class KernelResolutionError(RuntimeError):
    """kernel_solve grid too coarse for the requested residual tolerance."""

    def __init__(self, residual: float, tol: float):
        super().__init__(
            f"kernel_solve residual {residual:.3e} exceeds tolerance {tol:.3e}; "
            "refine the grid"
        )
        self.residual = residual
        self.tol = tol


@dataclass(frozen=True)
class AiryPair:
    """Values of A± and their derivatives at one argument."""

    u: float
    a_plus: float
    a_minus: float
    d_plus: float
    d_minus: float

    @property
    def wronskian(self) -> float:
        return self.a_plus * self.d_minus - self.d_plus * self.a_minus


@dataclass(frozen=True)
class AiryZeros:
    """Ordered zeros a_1 > a_2 > ... of A- (dirichlet) and of A-' (neumann)."""

    dirichlet_zeros: tuple[float, ...] = ()
    neumann_zeros: tuple[float, ...] = ()


def _maclaurin(u: float) -> tuple[float, float, float, float]:
    """(f, g, f', g') where f, g solve y'' = u y with f(0)=1, f'(0)=0; g(0)=0, g'(0)=1."""
    u3 = u * u * u
    tf, tg = 1.0, u  # current terms of f and g
    f_terms, g_terms = [tf], [tg]
    fp_terms, gp_terms = [0.0], [1.0]
    k = 0
    while True:
        k += 1
        tf = tf * u3 / ((3 * k) * (3 * k - 1))
        tg = tg * u3 / ((3 * k + 1) * (3 * k))
        f_terms.append(tf)
        g_terms.append(tg)
        # d/du u^(3k) = 3k u^(3k-1); d/du u^(3k+1) = (3k+1) u^(3k)
        if u != 0.0:
            fp_terms.append(tf * (3 * k) / u)
            gp_terms.append(tg * (3 * k + 1) / u)
        if abs(tf) + abs(tg) < 1e-25 * (abs(f_terms[0]) + 1.0) and k > 3:
            break
        if k > 400:  # pragma: no cover - |u| <= 8 converges long before
            break
    return (
        math.fsum(f_terms),
        math.fsum(g_terms),
        math.fsum(fp_terms),
        math.fsum(gp_terms),
    )


def _maclaurin_pair(u: float) -> tuple[float, float, float, float]:
    """(A+, A-, A+', A-') from the Maclaurin basis."""
    f, g, fp, gp = _maclaurin(u)
    ai = _C1 * f - _C2 * g
    aip = _C1 * fp - _C2 * gp
    bi = math.sqrt(3.0) * (_C1 * f + _C2 * g)
    bip = math.sqrt(3.0) * (_C1 * fp + _C2 * gp)
    return _SQRT_PI * bi, _SQRT_PI * ai, _SQRT_PI * bip, _SQRT_PI * aip


@lru_cache(maxsize=1)
def _asym_coeffs() -> tuple[np.ndarray, np.ndarray]:
    """Poincare coefficients u_k and v_k of the large-argument expansions."""
    n = 42
    u = np.empty(n)
    v = np.empty(n)
    u[0] = v[0] = 1.0
    for k in range(1, n):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / (216.0 * k * (2 * k - 1))
        v[k] = u[k] * (6 * k + 1) / (1.0 - 6 * k)
    return u, v


def _asym_sum(coeffs: np.ndarray, zeta: float, alternate: bool, stride: int = 1, offset: int = 0) -> float:
    """Optimally truncated sum of coeffs[offset::stride] / zeta^k terms."""
    total = 0.0
    prev = math.inf
    k = offset
    power = zeta**offset
    sign = 1.0
    idx = 0
    while k < coeffs.size:
        term = coeffs[k] / power
        if abs(term) >= prev:
            break
        total += sign * term
        prev = abs(term)
        k += stride
        power *= zeta**stride
        if alternate:
            sign = -sign
        idx += 1
    return total


def _asym_positive(u: float) -> tuple[float, float, float, float]:
    uk, vk = _asym_coeffs()
    zeta = (2.0 / 3.0) * u**1.5
    q = u**0.25
    ez = math.exp(zeta)
    s_am = _asym_sum(uk, zeta, alternate=True)
    s_dm = _asym_sum(vk, zeta, alternate=True)
    s_ap = _asym_sum(uk, zeta, alternate=False)
    s_dp = _asym_sum(vk, zeta, alternate=False)
    a_minus = 0.5 / q / ez * s_am
    d_minus = -0.5 * q / ez * s_dm
    a_plus = ez / q * s_ap
    d_plus = ez * q * s_dp
    return a_plus, a_minus, d_plus, d_minus


def _asym_negative(u: float) -> tuple[float, float, float, float]:
    """Oscillatory expansions at argument u < 0 (evaluated at |u|)."""
    uk, vk = _asym_coeffs()
    x = -u
    zeta = (2.0 / 3.0) * x**1.5
    q = x**0.25
    c = math.cos(zeta - 0.25 * math.pi)
    s = math.sin(zeta - 0.25 * math.pi)
    ue = _asym_sum(uk, zeta, alternate=True, stride=2, offset=0)
    uo = _asym_sum(uk, zeta, alternate=True, stride=2, offset=1)
    ve = _asym_sum(vk, zeta, alternate=True, stride=2, offset=0)
    vo = _asym_sum(vk, zeta, alternate=True, stride=2, offset=1)
    a_minus = (c * ue + s * uo) / q
    d_minus = q * (s * ve - c * vo)
    a_plus = (-s * ue + c * uo) / q
    d_plus = q * (c * ve + s * vo)
    return a_plus, a_minus, d_plus, d_minus


def _taylor_step(a: float, y0: float, y1: float, h: float, n: int = 30) -> tuple[float, float]:
    """Advance the Airy ODE solution (y, y') from center a by h via Taylor recurrence."""
    c = [y0, y1, 0.5 * a * y0]
    for k in range(1, n):
        c.append((a * c[k] + c[k - 1]) / ((k + 2) * (k + 1)))
    val = 0.0
    der = 0.0
    for k in range(len(c) - 1, -1, -1):
        val = val * h + c[k]
    for k in range(len(c) - 1, 0, -1):
        der = der * h + k * c[k]
    return val, der


@lru_cache(maxsize=1)
def _am_table() -> dict[float, tuple[float, float]]:
    """(A-, A-') on a grid from 8.0 down to 1.75, continued inward from the tail.

    Inward continuation of the recessive solution is exponentially stable:
    any dominant-direction contamination of the asymptotic seed decays
    relative to the growing target.
    """
    step = 0.25
    a = 8.0
    _, am, _, dm = _asym_positive(a)
    table = {a: (am, dm)}
    while a > 1.75 + 1e-12:
        am, dm = _taylor_step(a, am, dm, -step)
        a = round(a - step, 10)
        table[a] = (am, dm)
    return table


def _am_midrange(u: float) -> tuple[float, float]:
    table = _am_table()
    a = round(4.0 * u) / 4.0
    a = min(8.0, max(1.75, a))
    am, dm = table[a]
    if u == a:
        return am, dm
    return _taylor_step(a, am, dm, u - a)


def _eval_raw(u: float) -> AiryPair:
    if u < _U_NEG:
        ap, am, dp, dm = _asym_negative(u)
    elif u <= _U_MINUS_SERIES:
        ap, am, dp, dm = _maclaurin_pair(u)
    elif u <= _U_POS_SERIES:
        ap, _, dp, _ = _maclaurin_pair(u)
        if u <= _U_MINUS_ASYM:
            am, dm = _am_midrange(u)
        else:
            _, am, _, dm = _asym_positive(u)
    else:
        ap, am, dp, dm = _asym_positive(u)
    return AiryPair(u=u, a_plus=ap, a_minus=am, d_plus=dp, d_minus=dm)


def airy_eval(u: float) -> AiryPair:
    """Evaluate (A+, A-, A+', A-') at a real argument.

    Maclaurin series in the core, Poincare expansions in the tails, and an
    inward Taylor continuation for the cancellation-prone decaying branch on
    (2, 6.5].  Raises OverflowError once A+ leaves the representable range.
    """
    u = float(u)
    if not math.isfinite(u) or abs(u) > 200.0:
        raise ValueError(f"argument out of supported range [-200, 200]: {u}")
    if u > _U_OVERFLOW:
        raise OverflowError(f"A+({u:g}) exceeds the double-precision range")
    return _eval_raw(u)


def _am_value(u: float) -> float:
    return _eval_raw(u).a_minus


def _dm_value(u: float) -> float:
    return _eval_raw(u).d_minus


def _bisect(fn, lo: float, hi: float, tol: float = 1e-12) -> float:
    flo = fn(lo)
    fhi = fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError("bracket does not straddle a sign change")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def airy_zeros(n: int, kind: str = "dirichlet") -> AiryZeros:
    """First n zeros of A- (dirichlet) or of A-' (neumann), refined to 1e-12.

    Seeds follow the k^(2/3) law of the zero asymptotics and are polished by
    bracketed bisection on the evaluator.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown kind: {kind!r}")
    fn = _am_value if kind == "dirichlet" else _dm_value
    shift = 1.0 if kind == "dirichlet" else 3.0
    zeros: list[float] = []
    upper = 0.0  # zeros are all negative; previous zero bounds the next
    for k in range(1, n + 1):
        big_t = 3.0 * math.pi * (4.0 * k - shift) / 8.0
        seed = -(big_t ** (2.0 / 3.0))
        spacing = math.pi * big_t ** (-1.0 / 3.0)
        lo = seed - 0.6 * spacing
        hi = min(seed + 0.6 * spacing, upper - 1e-10 if zeros else -1e-6)
        # widen until the bracket straddles the zero
        tries = 0
        while fn(lo) * fn(hi) > 0.0:
            lo -= 0.3 * spacing
            hi = min(hi + 0.3 * spacing, upper - 1e-10 if zeros else -1e-6)
            tries += 1
            if tries > 50:
                raise RuntimeError(f"failed to bracket zero #{k}")
        z = _bisect(fn, lo, hi, tol=1e-12)
        zeros.append(z)
        upper = z
    tup = tuple(zeros)
    if kind == "dirichlet":
        return AiryZeros(dirichlet_zeros=tup)
    return AiryZeros(neumann_zeros=tup)


def model_operator_eigs(z: float, kind: str = "dirichlet", n: int = 1) -> list[float]:
    """Eigenvalues of the model operator -d²/dy² + y on [z, ∞).

    nu is an eigenvalue exactly when z - nu is a zero of A- (dirichlet) or
    A-' (neumann), so nu_k = z - a_k; every eigenvalue exceeds z.
    """
    zs = airy_zeros(n, kind)
    table = zs.dirichlet_zeros if kind == "dirichlet" else zs.neumann_zeros
    return [z - a for a in table]


@dataclass(frozen=True)
class AiryKernel:
    """Rescaled inhomogeneous kernel K̃_t(y, z) = t^(-4/3) K(t^(-2/3) y, t^(-2/3) z)."""

    t: float
    _w: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("t must be positive")
        p = _eval_raw(0.0)
        object.__setattr__(self, "_w", p.wronskian)

    def unscaled(self, u: float, v: float) -> float:
        """K(u, v) built from A± per the four-branch case split."""
        if v >= u >= 0.0 or v >= 0.0 >= u:
            val = _eval_raw(u).a_plus * _eval_raw(v).a_minus
        elif u >= v >= 0.0:
            val = _eval_raw(u).a_minus * _eval_raw(v).a_plus
        elif u <= v <= 0.0:
            pu = _eval_raw(u)
            pv = _eval_raw(v)
            val = pu.a_plus * pv.a_minus - pu.a_minus * pv.a_plus
        else:
            return 0.0
        return val / self._w

    def __call__(self, y: float, z: float) -> float:
        s = self.t ** (-2.0 / 3.0)
        return self.t ** (-4.0 / 3.0) * self.unscaled(s * y, s * z)

    def row(self, y: float, z: np.ndarray) -> np.ndarray:
        """Vectorized K̃_t(y, z_j)."""
        s = self.t ** (-2.0 / 3.0)
        zz = s * np.asarray(z, dtype=float)
        ap, am = _sample_pair(zz)
        return self._row_from_samples(s * y, zz, ap, am)

    def _row_from_samples(
        self, u: float, zz: np.ndarray, ap: np.ndarray, am: np.ndarray
    ) -> np.ndarray:
        """K̃_t row at unscaled argument u against presampled A±(zz)."""
        pu = _eval_raw(u)
        out = np.zeros_like(zz)
        if u >= 0.0:
            hi = zz >= u
            out[hi] = pu.a_plus * am[hi]
            mid = (~hi) & (zz >= 0.0)
            out[mid] = pu.a_minus * ap[mid]
        else:
            hi = zz >= 0.0
            out[hi] = pu.a_plus * am[hi]
            mid = (~hi) & (zz >= u)
            out[mid] = pu.a_plus * am[mid] - pu.a_minus * ap[mid]
        out *= self.t ** (-4.0 / 3.0) / self._w
        return out


def _sample_pair(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ap = np.empty(u.size)
    am = np.empty(u.size)
    for i, x in enumerate(u.ravel()):
        p = _eval_raw(float(x))
        ap[i] = p.a_plus
        am[i] = p.a_minus
    return ap.reshape(u.shape), am.reshape(u.shape)


def kernel_solve(
    g: np.ndarray,
    grid: np.ndarray,
    t: float = 1.0,
    residual_tol: float | None = None,
) -> tuple[np.ndarray, float]:
    """Solve t² W'' - y W = g on [a, b] through the kernel quadrature.

    W(y) = ∫ K̃_t(y, z) g(z) dz by composite Simpson.  The kernel is only
    piecewise smooth in z: a derivative kink on the diagonal z = y and a
    jump across z = 0 (the variation-of-parameters integral starts at 0),
    so the quadrature is split at both, using one-sided branch values.
    Returns (W, residual) where the residual is the sup-norm of the
    centered-difference defect t² W'' - y W - g on the interior; if
    residual_tol is given and exceeded, KernelResolutionError is raised
    instead of silently returning.
    """
    grid = np.asarray(grid, dtype=float)
    g = np.asarray(g, dtype=float)
    if grid.ndim != 1 or grid.size < 5:
        raise ValueError("grid must be 1-D with at least 5 points")
    if g.shape != grid.shape:
        raise ValueError("g and grid must have matching shapes")
    h = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), h, rtol=1e-10):
        raise ValueError("grid must be uniform")
    if not (grid[0] < 0.0 < grid[-1]):
        raise ValueError("grid must straddle 0 (kernel case split needs a < 0 < b)")
    i0 = int(np.argmin(np.abs(grid)))
    if abs(grid[i0]) > 1e-9 * h:
        raise ValueError("grid must contain 0 as a node (align a, b with the step)")
    n = grid.size
    kern = AiryKernel(t)
    s = t ** (-2.0 / 3.0)
    scale = t ** (-4.0 / 3.0) / kern._w
    zz = s * grid
    ap, am = _sample_pair(zz)
    wts = [simpson_weights(m, h) if m > 1 else np.zeros(1) for m in range(n + 1)]

    def seg(values, lo, hi):
        """∫ over [grid[lo], grid[hi]] of a smooth branch sampled on nodes."""
        m = hi - lo + 1
        if m < 2:
            return 0.0
        return float(wts[m] @ (values[lo : hi + 1] * g[lo : hi + 1]))

    w = np.empty(n)
    for i in range(n):
        pu_plus, pu_minus = ap[i], am[i]
        hi_branch = pu_plus * am  # A+(u) A-(v): v >= max(u, 0)
        if i < i0:
            mid_branch = pu_plus * am - pu_minus * ap  # u <= v <= 0
            w[i] = seg(mid_branch, i, i0) + seg(hi_branch, i0, n - 1)
        else:
            mid_branch = pu_minus * ap  # 0 <= v <= u
            w[i] = seg(mid_branch, i0, i) + seg(hi_branch, i, n - 1)
        w[i] *= scale
    wpp = np.empty(n)
    wpp[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (h * h)
    defect = t * t * wpp[1:-1] - grid[1:-1] * w[1:-1] - g[1:-1]
    residual = float(np.max(np.abs(defect)))
    if residual_tol is not None and residual > residual_tol:
        raise KernelResolutionError(residual, residual_tol)
    return w, residual


def kernel_hs_norm(t: float, alpha: float, n: int = 801) -> float:
    """∫∫ K̃_t(y,z)² dy dz over [-alpha, alpha]² by tensor Simpson."""
    if n % 2 == 0:
        n += 1  # keep 0 on the grid
    grid = np.linspace(-alpha, alpha, n)
    h = grid[1] - grid[0]
    wts_full = simpson_weights(n, h)
    wts = [simpson_weights(m, h) if m > 1 else np.zeros(1) for m in range(n + 1)]
    kern = AiryKernel(t)
    s = t ** (-2.0 / 3.0)
    scale = t ** (-4.0 / 3.0) / kern._w
    zz = s * grid
    ap, am = _sample_pair(zz)
    i0 = n // 2

    def seg(values, lo, hi):
        m = hi - lo + 1
        if m < 2:
            return 0.0
        return float(wts[m] @ values[lo : hi + 1])

    total = 0.0
    for i in range(n):
        hi_branch = (scale * ap[i] * am) ** 2
        if i < i0:
            mid_branch = (scale * (ap[i] * am - am[i] * ap)) ** 2
            row_int = seg(mid_branch, i, i0) + seg(hi_branch, i0, n - 1)
        else:
            mid_branch = (scale * am[i] * ap) ** 2
            row_int = seg(mid_branch, i0, i) + seg(hi_branch, i, n - 1)
        total += wts_full[i] * row_int
    return total


def airy_mass(c_plus: float, c_minus: float, interval: tuple[float, float]) -> float:
    """∫ (c+ A+ + c- A-)² du over a finite interval, adaptive to 1e-8 relative."""
    from scipy.integrate import quad

    a, b = float(interval[0]), float(interval[1])
    if a == b:
        return 0.0

    def integrand(u):
        p = airy_eval(u)
        return (c_plus * p.a_plus + c_minus * p.a_minus) ** 2

    # subdivide so the oscillation scale |u|^(1/2) stays resolved per panel
    edges = [a]
    span = b - a
    pieces = max(4, int(span * (1.0 + abs(a) ** 0.5 + abs(b) ** 0.5) / 4.0))
    for j in range(1, pieces):
        edges.append(a + span * j / pieces)
    edges.append(b)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-9, limit=200)
        total += val
    return total
