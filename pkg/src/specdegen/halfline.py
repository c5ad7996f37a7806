"""Eigensolver for the weighted half-line forms and their diagnostics.

The eigenproblem is -t² w'' + (mu - lambda sigma) w = 0 on [0, X] with a
Dirichlet or Neumann condition at 0 and decay at infinity, eigenvalues taken
against the sigma-weighted inner product.  The solve is two-stage: a lumped
P1 discretization brackets each eigenvalue, then inward shooting from the
forbidden region polishes it.  Outward shooting would be exponentially
unstable there, which is why the integration starts deep in the tail with a
WKB-decaying seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from . import airy
from .numerics import fit_line, gauss_legendre, loglog_slope, simpson, simpson_weights
from .profiles import WeightProfile, LangerCherryMap, langer_cherry, level_point, turning_point

__all__ = [
    "HalfLineProblem",
    "Eigenpair",
    "HalfLineSpectrum",
    "solve",
    "solve_below",
    "decay_rate",
    "mass_beyond",
    "weighted_tail_mass",
    "nonconcentration_kappa",
    "lc_residual",
    "airy_eigenvalue_check",
    "superseparation",
    "airy_predicted_eigenvalue",
]


@dataclass(frozen=True)
class HalfLineProblem:
    """One weighted half-line eigenproblem instance."""

    t: float
    mu: float
    profile: WeightProfile
    bc: str = "dirichlet"
    x_max: float | None = None
    h: float | None = None

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.bc not in ("dirichlet", "neumann"):
            raise ValueError(f"bc must be dirichlet or neumann, got {self.bc!r}")
        if self.h is not None and self.t / self.h < 20:
            raise ValueError("grid too coarse: need t/h >= 20")

    @property
    def threshold(self) -> float:
        return self.mu / self.profile.sigma0

    def grid_step(self) -> float:
        return self.h if self.h is not None else min(self.t / 25.0, 0.01)

    def f(self, lam: float, x: float) -> float:
        return self.mu - lam * self.profile.sigma(x)


@dataclass
class Eigenpair:
    """One normalized eigenpair with its dense solution for diagnostics."""

    problem: HalfLineProblem
    k: int
    lam: float
    x: np.ndarray
    w: np.ndarray
    residual: float
    x_turn: float
    x_shoot: float
    _dense: object = field(repr=False, default=None)
    _scale: float = field(repr=False, default=1.0)

    def value(self, x) -> np.ndarray | float:
        """w at arbitrary points inside [0, x_shoot] (0 beyond)."""
        scalar = np.ndim(x) == 0
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(xv)
        inside = xv <= self.x_shoot
        if np.any(inside):
            out[inside] = self._dense(xv[inside])[0] * self._scale
        return float(out[0]) if scalar else out

    def derivative(self, x) -> np.ndarray | float:
        scalar = np.ndim(x) == 0
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(xv)
        inside = xv <= self.x_shoot
        if np.any(inside):
            out[inside] = self._dense(xv[inside])[1] * self._scale
        return float(out[0]) if scalar else out


@dataclass
class HalfLineSpectrum:
    problem: HalfLineProblem
    eigenpairs: list[Eigenpair]
    resolved_count: int
    warnings: list[str] = field(default_factory=list)

    @property
    def eigenvalues(self) -> list[float]:
        return [p.lam for p in self.eigenpairs]

    @property
    def residuals(self) -> list[float]:
        return [p.residual for p in self.eigenpairs]


def _wkb_action(problem: HalfLineProblem, lam: float, x_turn: float, x: float) -> float:
    """∫_{x_turn}^{x} sqrt(f_lam) for x beyond the turning point."""
    if x <= x_turn:
        return 0.0
    nodes, wts = gauss_legendre(24)
    # substitute u = x_turn + (x - x_turn) q² to absorb the sqrt endpoint
    q = nodes
    pts = x_turn + (x - x_turn) * q * q
    vals = np.array([math.sqrt(max(problem.f(lam, float(p)), 0.0)) for p in pts])
    return 2.0 * (x - x_turn) * float(wts @ (q * vals))


def _shoot_start(problem: HalfLineProblem, lam: float, target_exponent: float = 40.0) -> float:
    """Point where the WKB decay exponent past the turning point reaches the target."""
    x_turn = turning_point(problem.profile, problem.mu, lam)
    target = target_exponent * problem.t
    x = x_turn
    step = max(0.1, 0.25 * (1.0 + x_turn))
    act = 0.0
    while act < target:
        x += step
        act = _wkb_action(problem, lam, x_turn, x)
        if x > 1e4:  # pragma: no cover
            break
    lo, hi = x - step, x
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if _wkb_action(problem, lam, x_turn, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-3:
            break
    return hi


def _integrate(problem: HalfLineProblem, lam: float, x_start: float, dense: bool = False):
    """Integrate t² w'' = f_lam w inward from x_start with the decaying seed."""
    t2 = problem.t * problem.t
    sigma = problem.profile.sigma
    mu = problem.mu

    def rhs(x, y):
        return (y[1], (mu - lam * sigma(x)) * y[0] / t2)

    f0 = max(problem.f(lam, x_start), 0.0)
    y0 = (1.0, -math.sqrt(f0) / problem.t)
    sol = solve_ivp(
        rhs,
        (x_start, 0.0),
        y0,
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
        dense_output=dense,
    )
    if not sol.success:  # pragma: no cover
        raise RuntimeError(f"shooting integration failed: {sol.message}")
    return sol


def _mismatch(problem: HalfLineProblem, lam: float, x_start: float) -> float:
    sol = _integrate(problem, lam, x_start)
    w0, dw0 = sol.y[0][-1], sol.y[1][-1]
    return w0 if problem.bc == "dirichlet" else dw0


def _fd_eigenvalues(problem: HalfLineProblem, x_max: float, h: float, count: int) -> np.ndarray:
    """Lumped-P1 bracket stage: generalized tridiagonal eigenvalues."""
    n = max(int(round(x_max / h)), 8)
    xs = h * np.arange(n + 1)
    sig = np.array([problem.profile.sigma(float(x)) for x in xs])
    t2h = problem.t * problem.t / h
    # nodes kept: dirichlet -> 1..n-1, neumann -> 0..n-1 (decay end clamped)
    if problem.bc == "dirichlet":
        idx = np.arange(1, n)
        diag_k = np.full(idx.size, 2.0 * t2h)
        lump = h * np.ones(idx.size)
    else:
        idx = np.arange(0, n)
        diag_k = np.full(idx.size, 2.0 * t2h)
        diag_k[0] = t2h
        lump = h * np.ones(idx.size)
        lump[0] = h / 2.0
    m_sigma = lump * sig[idx]
    a_diag = diag_k + problem.mu * lump
    off = np.full(idx.size - 1, -t2h)
    d = a_diag / m_sigma
    e = off / np.sqrt(m_sigma[:-1] * m_sigma[1:])
    count = min(count, idx.size)
    vals = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, count - 1))
    return vals


def solve(problem: HalfLineProblem, k_max: int) -> HalfLineSpectrum:
    """First k_max eigenpairs (relative 1e-9 eigenvalues, ||w||_sigma = 1).

    If the grid or truncation radius cannot resolve all requested modes, the
    returned spectrum is partial and ``resolved_count`` says how many are
    trustworthy.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    h = problem.grid_step()
    notes: list[str] = []
    x_max = problem.x_max
    if x_max is None:
        x_max = problem.profile.truncation_radius()
    fd = _fd_eigenvalues(problem, x_max, h, k_max + 1)
    # domain rule: X covers 3 x_E^{mu/2} + 10 t for the largest requested mode
    lam_top = fd[min(k_max, fd.size) - 1]
    x_need = 3.0 * level_point(problem.profile, problem.mu, lam_top * 1.05, problem.mu / 2.0) + 10.0 * problem.t
    if problem.x_max is None and x_need > x_max:
        x_max = x_need
        fd = _fd_eigenvalues(problem, x_max, h, k_max + 1)
    # grid resolution cap: 20 points per wavelength at x = 0
    kappa_cap = 2.0 * math.pi / (20.0 * h)
    lam_cap = (problem.mu + (problem.t * kappa_cap) ** 2) / problem.profile.sigma0
    resolved = int(np.sum(fd[:k_max] <= lam_cap))
    if resolved < k_max:
        notes.append(
            f"grid h={h:g} resolves only {resolved} of {k_max} requested modes "
            f"(lambda cap {lam_cap:g})"
        )

    pairs: list[Eigenpair] = []
    thr = problem.threshold
    for k in range(1, min(k_max, resolved if resolved else k_max) + 1):
        lam_fd = fd[k - 1]
        gap_lo = lam_fd - (fd[k - 2] if k >= 2 else thr)
        gap_hi = (fd[k] - lam_fd) if k < fd.size else gap_lo
        lo = lam_fd - 0.45 * gap_lo
        hi = lam_fd + 0.45 * gap_hi
        x_start = min(_shoot_start(problem, hi), x_max)
        m_lo = _mismatch(problem, lo, x_start)
        m_hi = _mismatch(problem, hi, x_start)
        widen = 0
        while m_lo * m_hi > 0:
            widen += 1
            lo = max(lam_fd - (0.45 + 0.1 * widen) * gap_lo, thr * (1 + 1e-12))
            hi = lam_fd + (0.45 + 0.1 * widen) * gap_hi
            m_lo = _mismatch(problem, lo, x_start)
            m_hi = _mismatch(problem, hi, x_start)
            if widen > 12:
                raise RuntimeError(
                    f"failed to bracket eigenvalue #{k} near {lam_fd:g} "
                    f"(mismatch {m_lo:g}..{m_hi:g})"
                )
        lam = brentq(
            lambda L: _mismatch(problem, L, x_start), lo, hi, rtol=1e-13, maxiter=200
        )
        pairs.append(_build_eigenpair(problem, k, lam, x_start, x_max, h))
    return HalfLineSpectrum(problem=problem, eigenpairs=pairs, resolved_count=len(pairs), warnings=notes)


def _build_eigenpair(
    problem: HalfLineProblem, k: int, lam: float, x_start: float, x_max: float, h: float
) -> Eigenpair:
    sol = _integrate(problem, lam, x_start, dense=True)
    dense = sol.sol
    # sigma-normalization on a refined Simpson grid over [0, x_start]
    n_norm = max(int(x_start / (h / 2.0)), 64) + 1
    xs_norm = np.linspace(0.0, x_start, n_norm)
    vals = dense(xs_norm)[0]
    sig = np.array([problem.profile.sigma(float(x)) for x in xs_norm])
    norm2 = simpson(vals * vals * sig, xs_norm[1] - xs_norm[0])
    scale = 1.0 / math.sqrt(norm2)
    # sign convention: first lobe positive
    if problem.bc == "dirichlet":
        if dense(0.0)[1] < 0:
            scale = -scale
    else:
        if dense(0.0)[0] < 0:
            scale = -scale
    xs = np.arange(0.0, x_max + 0.5 * h, h)
    w = np.zeros_like(xs)
    inside = xs <= x_start
    w[inside] = dense(xs[inside])[0] * scale
    x_turn = turning_point(problem.profile, problem.mu, lam)
    pair = Eigenpair(
        problem=problem,
        k=k,
        lam=lam,
        x=xs,
        w=w,
        residual=0.0,
        x_turn=x_turn,
        x_shoot=x_start,
        _dense=dense,
        _scale=scale,
    )
    pair.residual = _ode_residual(pair)
    return pair


def _ode_residual(pair: Eigenpair) -> float:
    """sup |t² w'' - f w| / sup |w| via a Hermite stencil on the dense solution.

    With values and first derivatives at x ± d the combination
    (4 S - T) / (2 d²), S = w(x+d) + w(x-d) - 2 w(x), T = d (w'(x+d) - w'(x-d)),
    is an O(d⁴) second derivative that tolerates the integrator's pointwise
    noise far better than a bare second difference.
    """
    problem = pair.problem
    f_max = max(abs(problem.f(pair.lam, 0.0)), problem.mu)
    d = min(problem.t / 100.0, (1e-4 * problem.t**2 / f_max**3) ** 0.25)
    hi = pair.x_shoot - 2 * d
    if hi <= 3 * d:
        return 0.0
    xs = np.linspace(2 * d, hi, min(int(hi / d), 4000))
    vp = pair._dense(xs + d) * pair._scale
    vm = pair._dense(xs - d) * pair._scale
    v0 = pair._dense(xs) * pair._scale
    s = vp[0] + vm[0] - 2.0 * v0[0]
    t_term = d * (vp[1] - vm[1])
    wpp = (4.0 * s - t_term) / (2.0 * d * d)
    fvals = np.array([problem.f(pair.lam, float(x)) for x in xs])
    defect = problem.t**2 * wpp - fvals * v0[0]
    return float(np.max(np.abs(defect)) / np.max(np.abs(pair.w)))


def solve_below(problem: HalfLineProblem, lambda_max: float) -> HalfLineSpectrum:
    """All eigenpairs with eigenvalue <= lambda_max."""
    if lambda_max <= problem.threshold:
        return HalfLineSpectrum(problem=problem, eigenpairs=[], resolved_count=0)
    h = problem.grid_step()
    x_max = problem.x_max or problem.profile.truncation_radius()
    guess = 4
    while True:
        fd = _fd_eigenvalues(problem, x_max, h, guess)
        if fd[-1] > lambda_max or fd.size < guess:
            break
        guess *= 2
    count = int(np.sum(fd <= lambda_max))
    if count == 0:
        return HalfLineSpectrum(problem=problem, eigenpairs=[], resolved_count=0)
    spec = solve(problem, count)
    spec.eigenpairs = [p for p in spec.eigenpairs if p.lam <= lambda_max]
    spec.resolved_count = len(spec.eigenpairs)
    return spec


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def decay_rate(pair: Eigenpair, s: float, E: float | None = None) -> float:
    """Least-squares slope of log w² on [x_E^s, x_E^s + 5t/sqrt(2s)].

    The exponential-decay bound demands slope <= -sqrt(2s)/t for any E >= lam;
    the fitted slope is returned for the caller to compare.
    """
    problem = pair.problem
    if not 0.0 < s < problem.mu:
        raise ValueError("s must lie in (0, mu)")
    E_eff = pair.lam if E is None else E
    if E_eff < pair.lam:
        raise ValueError("decay window requires E >= lambda")
    x_s = level_point(problem.profile, problem.mu, E_eff, s)
    width = 5.0 * problem.t / math.sqrt(2.0 * s)
    x_hi = x_s + width
    if x_hi > pair.x_shoot:
        warnings.warn(
            f"decay window truncated from {x_hi:g} to {pair.x_shoot:g}", stacklevel=2
        )
        x_hi = pair.x_shoot
    if x_hi - x_s < 0.2 * width:
        raise ValueError("window exits the resolved region almost entirely")
    xs = np.linspace(x_s, x_hi, 80)
    vals = pair.value(xs)
    good = np.abs(vals) > 0
    slope, _ = fit_line(xs[good], np.log(vals[good] ** 2))
    return slope


def mass_beyond(pair: Eigenpair, x0: float) -> float:
    """∫_{x0}^∞ w² dx / ∫_0^∞ w² dx on the sampled eigenfunction."""
    if x0 < 0:
        raise ValueError("x0 must be nonnegative")
    h = pair.x[1] - pair.x[0]
    total = simpson(pair.w**2, h)
    if x0 >= pair.x[-1]:
        return 0.0
    j = int(np.searchsorted(pair.x, x0))
    j = min(max(j, 0), pair.x.size - 2)
    tail_grid = np.linspace(x0, pair.x[-1], max(pair.x.size - j, 64))
    tail_vals = pair.value(tail_grid) ** 2
    tail = simpson(tail_vals, tail_grid[1] - tail_grid[0])
    return float(tail / total)


def weighted_tail_mass(pair: Eigenpair, s: float, nu: float, E: float | None = None) -> float:
    """∫_{3 x_E^s}^∞ w² (1 + x^nu) dx / ∫_{x_E^s}^∞ w² dx (polynomially weighted tail)."""
    problem = pair.problem
    E_eff = pair.lam if E is None else E
    x_s = level_point(problem.profile, problem.mu, E_eff, s)
    hi = pair.x[-1]
    if 3.0 * x_s >= hi:
        raise ValueError("weighted window exceeds the resolved region")
    num_grid = np.linspace(3.0 * x_s, hi, 600)
    num_vals = pair.value(num_grid) ** 2 * (1.0 + num_grid**nu)
    den_grid = np.linspace(x_s, hi, 900)
    den_vals = pair.value(den_grid) ** 2
    num = simpson(num_vals, num_grid[1] - num_grid[0])
    den = simpson(den_vals, den_grid[1] - den_grid[0])
    return float(num / den)


def nonconcentration_kappa(pair: Eigenpair, E: float) -> float:
    """kappa-hat = ∫ (E sigma - mu) w² dx / ||w||²_sigma."""
    if not np.any(pair.w):
        raise ValueError("empty eigenfunction")
    problem = pair.problem
    h = pair.x[1] - pair.x[0]
    sig = np.array([problem.profile.sigma(float(x)) for x in pair.x])
    numer = simpson((E * sig - problem.mu) * pair.w**2, h)
    denom = simpson(pair.w**2 * sig, h)
    return float(numer / denom)


def lc_residual(pair: Eigenpair, E: float, lc: LangerCherryMap | None = None) -> float:
    """∫ |t² W'' - y W|² dy / ∫ w² dx with W the transform of w at energy E.

    The second derivative is a centered difference on the uniform y-grid;
    the grid steps scale with t² so the differencing floor stays below the
    O(t⁴) signal this functional is meant to expose.
    """
    if not np.any(pair.w):
        raise ValueError("empty eigenfunction")
    problem = pair.problem
    t = problem.t
    if lc is None:
        lc = langer_cherry(problem.profile, problem.mu, E, x_max=pair.x_shoot)
    x_hi = pair.x_shoot
    y_lo = float(lc.phi(0.0))
    y_hi = float(lc.phi(x_hi))
    fbar = max(abs(problem.f(E, 0.0)), problem.mu)
    dy = min(1.2 * t * t, (y_hi - y_lo) / 256.0)
    n_y = int((y_hi - y_lo) / dy) + 2
    y = np.linspace(y_lo, y_hi, n_y)
    xs = np.asarray(lc.phi_inv(y), dtype=float)
    dphi = np.asarray(lc.dphi(xs), dtype=float)
    w_vals = pair.value(xs)
    W = np.sqrt(dphi) * w_vals
    h = y[1] - y[0]
    Wpp = (W[2:] - 2.0 * W[1:-1] + W[:-2]) / (h * h)
    g = t * t * Wpp - y[1:-1] * W[1:-1]
    num = simpson(g * g, h)
    xg = np.linspace(0.0, x_hi, 4000)
    den = simpson(pair.value(xg) ** 2, xg[1] - xg[0])
    _ = fbar
    return float(num / den)


@dataclass(frozen=True)
class AiryCheck:
    k: int
    t: float
    lam: float
    phi_at_zero: float
    airy_pred: float
    defect: float
    nearest_index: int
    nearest_distance: float


def airy_eigenvalue_check(
    problem: HalfLineProblem, k: int, spectrum: HalfLineSpectrum | None = None
) -> AiryCheck:
    """Compare phi_lambda(0) with t^(2/3) times the k-th Airy zero.

    Near the threshold the two agree to O(t²); the defect is reported along
    with the closest zero in case the requested index is not the nearest.
    """
    if spectrum is None:
        spectrum = solve(problem, k)
    lam = spectrum.eigenvalues[k - 1]
    lc = langer_cherry(problem.profile, problem.mu, lam, x_max=max(1.0, 3 * spectrum.eigenpairs[k - 1].x_turn))
    phi0 = float(lc.phi(0.0))
    kind = problem.bc
    zeros = airy.airy_zeros(k + 4, kind)
    table = zeros.dirichlet_zeros if kind == "dirichlet" else zeros.neumann_zeros
    pred = problem.t ** (2.0 / 3.0) * table[k - 1]
    scaled = phi0 / problem.t ** (2.0 / 3.0)
    dists = [abs(scaled - a) for a in table]
    j = int(np.argmin(dists))
    return AiryCheck(
        k=k,
        t=problem.t,
        lam=lam,
        phi_at_zero=phi0,
        airy_pred=pred,
        defect=abs(phi0 - pred),
        nearest_index=j + 1,
        nearest_distance=dists[j] * problem.t ** (2.0 / 3.0),
    )


def airy_predicted_eigenvalue(
    profile: WeightProfile, mu: float, t: float, k: int, bc: str = "dirichlet"
) -> float:
    """Eigenvalue predicted by the Airy law: solve phi_lambda(0) = t^(2/3) a_k."""
    zeros = airy.airy_zeros(k, bc)
    a_k = (zeros.dirichlet_zeros if bc == "dirichlet" else zeros.neumann_zeros)[k - 1]
    target = t ** (2.0 / 3.0) * a_k
    thr = mu / profile.sigma0

    def g(lam):
        lc = langer_cherry(profile, mu, lam, x_max=1.0)
        return float(lc.phi(0.0)) - target

    lo = thr * (1.0 + 1e-10)
    hi = thr * 1.5
    while g(hi) > 0:
        hi *= 1.5
        if hi > 1e6 * thr:  # pragma: no cover
            raise RuntimeError("failed to bracket the Airy-predicted eigenvalue")
    return float(brentq(g, lo, hi, rtol=1e-12))


@dataclass(frozen=True)
class SeparationRecord:
    t: float
    lam_k: float
    lam_k1: float
    gap: float
    gap_over_t: float
    predicted_gap: float


@dataclass(frozen=True)
class SeparationReport:
    k: int
    records: list[SeparationRecord]
    slope: float  # log-log slope of gap against t

    @property
    def gaps(self) -> list[float]:
        return [r.gap for r in self.records]


def superseparation(
    profile: WeightProfile,
    mu: float,
    t_grid: list[float],
    k: int = 1,
    bc: str = "dirichlet",
) -> SeparationReport:
    """Gaps lambda_{k+1} - lambda_k along a decreasing t grid.

    Also reports gap/t (which must grow as t drops near the threshold), a
    log-log slope estimate of gap against t, and the gap predicted by the
    Airy eigenvalue law.
    """
    ts = list(t_grid)
    if any(b >= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_grid must be strictly decreasing")
    records = []
    for t in ts:
        problem = HalfLineProblem(t=t, mu=mu, profile=profile, bc=bc)
        spec = solve(problem, k + 1)
        if spec.resolved_count < k + 1:
            warnings.warn(f"t={t:g} unresolved at k={k + 1}; truncating grid", stacklevel=2)
            break
        lam_k = spec.eigenvalues[k - 1]
        lam_k1 = spec.eigenvalues[k]
        pred = airy_predicted_eigenvalue(profile, mu, t, k + 1, bc) - airy_predicted_eigenvalue(
            profile, mu, t, k, bc
        )
        records.append(
            SeparationRecord(
                t=t,
                lam_k=lam_k,
                lam_k1=lam_k1,
                gap=lam_k1 - lam_k,
                gap_over_t=(lam_k1 - lam_k) / t,
                predicted_gap=pred,
            )
        )
    slope = loglog_slope([r.t for r in records], [r.gap for r in records])
    return SeparationReport(k=k, records=records, slope=slope)
