"""Decreasing weights sigma and the machinery built on them.

A ``WeightProfile`` carries sigma and its first two derivatives analytically
(no numerical differentiation: the second derivative enters curvature bounds
where differencing noise would dominate).  From a profile and a transverse
eigenvalue mu we derive, at energy E, the turning point x_E of
f_E = mu - E*sigma, the level points x_E^s solving f_E = s, and the
Langer-Cherry change of variables phi_E with its weight rho_E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .numerics import gauss_legendre

__all__ = [
    "WeightProfile",
    "TurningData",
    "LangerCherryMap",
    "ThresholdError",
    "named_profile",
    "profile_from_expression",
    "turning_point",
    "level_point",
    "langer_cherry",
    "transform",
]


class ThresholdError(ValueError):
    """Energy below the threshold mu/sigma(0): no turning point exists."""


@dataclass(frozen=True)
class WeightProfile:
    """A smooth positive decreasing weight with analytic derivatives."""

    sigma: Callable[[float], float]
    dsigma: Callable[[float], float]
    d2sigma: Callable[[float], float]
    name: str = "custom"
    tail_rate: float | None = None  # known exponential decay rate, if any
    sigma0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sigma0", float(self.sigma(0.0)))
        # spot-check positivity and strict decrease on a log-spaced grid
        for x in [0.0] + list(np.geomspace(1e-3, 50.0, 25)):
            s = self.sigma(float(x))
            ds = self.dsigma(float(x))
            if not (s > 0.0):
                raise ValueError(f"sigma({x:g}) = {s:g} is not positive")
            if not (ds < 0.0):
                raise ValueError(f"sigma'({x:g}) = {ds:g} is not negative")

    def truncation_radius(self, rel: float = 1e-8, cap: float = 200.0) -> float:
        """Smallest X with sigma(X) < rel * sigma(0), capped."""
        target = rel * self.sigma0
        if self.sigma(cap) >= target:
            return cap
        lo, hi = 0.0, cap
        while self.sigma(hi) >= target and hi < cap:
            hi = min(2.0 * max(hi, 1.0), cap)
        return float(brentq(lambda x: self.sigma(x) - target, lo, hi, xtol=1e-9))

    def f(self, mu: float, E: float, x) -> np.ndarray | float:
        """f_E(x) = mu - E * sigma(x)."""
        if np.ndim(x) == 0:
            return mu - E * self.sigma(float(x))
        return mu - E * np.asarray([self.sigma(float(v)) for v in np.ravel(x)]).reshape(
            np.shape(x)
        )


def _vectorized(fn):
    def wrapped(x):
        if np.ndim(x) == 0:
            return fn(float(x))
        flat = np.asarray(x, dtype=float).ravel()
        return np.asarray([fn(v) for v in flat]).reshape(np.shape(x))

    return wrapped


def named_profile(name: str) -> WeightProfile:
    """Built-in profiles: exp2 (e^{-2x}), exp (e^{-x}), rational (1/(1+x)^2)."""
    if name == "exp2":
        return WeightProfile(
            sigma=lambda x: math.exp(-2.0 * x),
            dsigma=lambda x: -2.0 * math.exp(-2.0 * x),
            d2sigma=lambda x: 4.0 * math.exp(-2.0 * x),
            name="exp2",
            tail_rate=2.0,
        )
    if name == "exp":
        return WeightProfile(
            sigma=lambda x: math.exp(-x),
            dsigma=lambda x: -math.exp(-x),
            d2sigma=lambda x: math.exp(-x),
            name="exp",
            tail_rate=1.0,
        )
    if name == "rational":
        return WeightProfile(
            sigma=lambda x: (1.0 + x) ** -2,
            dsigma=lambda x: -2.0 * (1.0 + x) ** -3,
            d2sigma=lambda x: 6.0 * (1.0 + x) ** -4,
            name="rational",
        )
    raise ValueError(f"unknown profile {name!r} (expected exp2, exp, or rational)")


def profile_from_expression(expr: str, name: str | None = None) -> WeightProfile:
    """Build a profile from an infix expression in x (symbolic derivatives).

    The grammar admits +, -, *, /, ** (also pow(a, b)), exp, numeric
    literals, parentheses, and the variable x.
    """
    import sympy

    x = sympy.symbols("x")
    allowed = {"x": x, "exp": sympy.exp, "pow": sympy.Pow, "pi": sympy.pi}
    try:
        tree = sympy.sympify(expr, locals=allowed, rational=False, evaluate=True)
    except (sympy.SympifyError, SyntaxError) as exc:
        raise ValueError(f"cannot parse profile expression {expr!r}: {exc}") from None
    bad = tree.free_symbols - {x}
    if bad:
        raise ValueError(f"unknown symbols in profile expression: {sorted(map(str, bad))}")
    d1 = sympy.diff(tree, x)
    d2 = sympy.diff(d1, x)
    f0 = sympy.lambdify(x, tree, modules="math")
    f1 = sympy.lambdify(x, d1, modules="math")
    f2 = sympy.lambdify(x, d2, modules="math")
    return WeightProfile(
        sigma=f0, dsigma=f1, d2sigma=f2, name=name or f"expr:{expr}"
    )


def parse_profile(spec: str) -> WeightProfile:
    """Accept a built-in name or an expression."""
    try:
        return named_profile(spec)
    except ValueError:
        return profile_from_expression(spec)


def turning_point(profile: WeightProfile, mu: float, E: float) -> float:
    """The unique x with f_E(x) = 0, to |f_E| <= 1e-12 * mu.

    Newton from a bracketed start with bisection fallback; E below the
    threshold mu/sigma(0) is a domain error.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    threshold = mu / profile.sigma0
    if E < threshold * (1.0 - 1e-14):
        raise ThresholdError(f"below threshold: E = {E:g} < mu/sigma(0) = {threshold:g}")
    if E <= threshold:
        return 0.0
    return _solve_f_level(profile, mu, E, 0.0)


def level_point(profile: WeightProfile, mu: float, E: float, s: float) -> float:
    """The unique x_E^s >= x_E with f_E(x_E^s) = s, for 0 <= s < mu."""
    if not 0.0 <= s:
        raise ValueError("s must be nonnegative")
    if s >= mu:
        raise ValueError(f"level unreachable: f_E < mu but s = {s:g} >= mu = {mu:g}")
    threshold = mu / profile.sigma0
    if E < threshold * (1.0 - 1e-14):
        raise ThresholdError(f"below threshold: E = {E:g} < mu/sigma(0) = {threshold:g}")
    if s == 0.0:
        return turning_point(profile, mu, E)
    return _solve_f_level(profile, mu, E, s)


def _solve_f_level(profile: WeightProfile, mu: float, E: float, s: float) -> float:
    """Root of f_E(x) - s = 0; f_E is strictly increasing since sigma' < 0."""

    def g(x):
        return mu - E * profile.sigma(x) - s

    lo = 0.0
    if g(lo) >= 0.0:
        if s == 0.0 and g(lo) <= 1e-12 * mu:
            return 0.0
        raise ThresholdError("f_E(0) >= s already; no interior root")
    hi = 1.0
    while g(hi) < 0.0:
        hi *= 2.0
        if hi > 1e9:
            raise RuntimeError("failed to bracket the level point")
    # Newton polished by bisection safeguards
    x = brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16)
    for _ in range(3):
        fx = g(x)
        dfx = -E * profile.dsigma(x)
        if dfx > 0:
            step = fx / dfx
            if abs(step) < 0.5 * (hi - lo):
                x = min(max(x - step, lo), hi)
    if abs(g(x)) > 1e-12 * mu:
        raise RuntimeError(f"level solve stalled: |f_E - s| = {abs(g(x)):.3e}")
    return float(x)


@dataclass(frozen=True)
class TurningData:
    """Turning point and level-point map at one (mu, E)."""

    profile: WeightProfile
    mu: float
    E: float
    x_E: float

    def x_s(self, s: float) -> float:
        return level_point(self.profile, self.mu, self.E, s)


def turning_data(profile: WeightProfile, mu: float, E: float) -> TurningData:
    return TurningData(profile=profile, mu=mu, E=E, x_E=turning_point(profile, mu, E))


class LangerCherryMap:
    """The Langer-Cherry phase phi_E, its inverse, and rho_E = (phi_E')^{-1/2}.

    phi is evaluated by adaptive quadrature of |f_E|^{1/2} away from the
    turning point; inside |x - x_E| < h_switch the smooth two-fold integral
    form (the slope average I and its half-power moment) takes over, which
    is exact through the turning point.
    """

    def __init__(self, profile: WeightProfile, mu: float, E: float, x_max: float | None = None):
        if mu <= 0:
            raise ValueError("mu must be positive")
        self.profile = profile
        self.mu = float(mu)
        self.E = float(E)
        self.x_E = turning_point(profile, mu, E)
        self.h_switch = 0.05 * (1.0 + self.x_E)
        self.x_max = float(x_max) if x_max is not None else max(
            profile.truncation_radius(), 3.0 * self.x_E + 10.0
        )
        self._gl_nodes, self._gl_weights = gauss_legendre(32)
        self._build_table()

    # -- smooth ingredients ------------------------------------------------
    def _slope_average(self, u: float) -> float:
        """I(E, u) = ∫_0^1 -E sigma'(s u + (1-s) x_E) ds, equal to f_E/(u - x_E)."""
        d = u - self.x_E
        if abs(d) > 1e-3 * (1.0 + self.x_E):
            return (self.mu - self.E * self.profile.sigma(u)) / d
        s, w = self._gl_nodes, self._gl_weights
        pts = self.x_E + s * d
        vals = np.array([-self.E * self.profile.dsigma(float(p)) for p in pts])
        return float(w @ vals)

    def _half_moment(self, x: float) -> float:
        """pi(E, x) = ∫_0^1 sqrt(s) * I(E, s x + (1-s) x_E)^{1/2} ds.

        Substituting s = q² removes the sqrt endpoint so Gauss converges
        spectrally: pi = 2 ∫_0^1 q² I(x_E + q² (x - x_E))^{1/2} dq.
        """
        q, w = self._gl_nodes, self._gl_weights
        s = q * q
        pts = self.x_E + s * (x - self.x_E)
        vals = np.array([math.sqrt(max(self._slope_average(float(p)), 0.0)) for p in pts])
        return 2.0 * float(w @ (s * vals))

    def _phi_near(self, x: float) -> float:
        return (x - self.x_E) * (1.5 * self._half_moment(x)) ** (2.0 / 3.0)

    def _sqrt_abs_f(self, u: float) -> float:
        return math.sqrt(abs(self.mu - self.E * self.profile.sigma(u)))

    def _action_from_turning(self, x: float) -> float:
        """∫ between x_E and x of |f_E|^{1/2}, adaptive, endpoint handled near x_E."""
        a, b = (self.x_E, x) if x >= self.x_E else (x, self.x_E)
        if b - a <= 0:
            return 0.0
        edge = self.h_switch
        total = 0.0
        if x >= self.x_E:
            mid = min(self.x_E + edge, b)
            # sqrt-kink panel via the smooth half-moment form
            total += abs(self._phi_near(mid)) ** 1.5 / 1.5
            if b > mid:
                val, _ = quad(self._sqrt_abs_f, mid, b, epsabs=1e-13, epsrel=1e-11, limit=200)
                total += val
        else:
            mid = max(self.x_E - edge, a)
            total += abs(self._phi_near(mid)) ** 1.5 / 1.5
            if a < mid:
                val, _ = quad(self._sqrt_abs_f, a, mid, epsabs=1e-13, epsrel=1e-11, limit=200)
                total += val
        return total

    # -- public surface ----------------------------------------------------
    def phi(self, x) -> np.ndarray | float:
        if np.ndim(x) > 0:
            return np.asarray([self.phi(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))
        x = float(x)
        if abs(x - self.x_E) < self.h_switch:
            return self._phi_near(x)
        act = self._action_from_turning(x)
        return math.copysign((1.5 * act) ** (2.0 / 3.0), x - self.x_E)

    def dphi(self, x) -> np.ndarray | float:
        """phi' > 0, from (phi')² phi = f_E written in smooth ratio form."""
        if np.ndim(x) > 0:
            return np.asarray([self.dphi(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))
        x = float(x)
        i_val = self._slope_average(x)
        if abs(x - self.x_E) < self.h_switch:
            pi_val = self._half_moment(x)
            return math.sqrt(i_val) / (1.5 * pi_val) ** (1.0 / 3.0)
        f_val = self.mu - self.E * self.profile.sigma(x)
        return math.sqrt(f_val / self.phi(x))

    def rho(self, x) -> np.ndarray | float:
        return np.asarray(self.dphi(x)) ** -0.5 if np.ndim(x) else self.dphi(x) ** -0.5

    def phi_inv(self, y) -> np.ndarray | float:
        if np.ndim(y) > 0:
            return np.asarray([self.phi_inv(float(v)) for v in np.ravel(y)]).reshape(np.shape(y))
        y = float(y)
        ys = self._table_phi
        xs = self._table_x
        if y < ys[0] or y > ys[-1]:
            raise ValueError(f"phi_inv argument {y:g} outside [{ys[0]:g}, {ys[-1]:g}]")
        j = int(np.searchsorted(ys, y))
        j = max(1, min(j, ys.size - 1))
        lo, hi = xs[j - 1], xs[j]  # phi(lo) <= y <= phi(hi) by monotonicity
        x = 0.5 * (lo + hi)
        for _ in range(80):
            err = self.phi(x) - y
            if abs(err) < 1e-13 * (1.0 + abs(y)):
                break
            if err > 0:
                hi = x
            else:
                lo = x
            x_new = x - err / self.dphi(x)
            if not lo < x_new < hi:
                x_new = 0.5 * (lo + hi)
            if x_new == x:
                break
            x = x_new
        return float(x)

    def _build_table(self):
        """Monotone (x, phi) table for inversion brackets."""
        n_dense = 48
        pts = sorted(
            set(
                np.concatenate(
                    [
                        np.linspace(0.0, self.x_max, 96),
                        self.x_E + self.h_switch * np.linspace(-1.0, 1.0, n_dense),
                    ]
                ).tolist()
            )
        )
        xs = np.array([p for p in pts if 0.0 <= p <= self.x_max])
        phis = np.array([self.phi(float(v)) for v in xs])
        keep = np.concatenate([[True], np.diff(phis) > 0])
        self._table_x = xs[keep]
        self._table_phi = phis[keep]


def langer_cherry(
    profile: WeightProfile, mu: float, E: float, x_max: float | None = None
) -> LangerCherryMap:
    """Construct the Langer-Cherry map at energy E (requires E >= mu/sigma(0))."""
    return LangerCherryMap(profile, mu, E, x_max=x_max)


def transform(
    lc: LangerCherryMap,
    x: np.ndarray,
    w: np.ndarray,
    n_out: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Forward transform W = ((phi')^{1/2} w) ∘ phi^{-1} on a uniform y-grid.

    Returns (y_grid, W).  w is interpolated cubically between its samples;
    an interpolation-residual heuristic flags undersampled input.
    """
    from scipy.interpolate import CubicSpline

    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.ndim != 1 or x.size < 8 or w.shape != x.shape:
        raise ValueError("need matching 1-D arrays with at least 8 samples")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x samples must be strictly increasing")
    spline = CubicSpline(x, w)
    # undersampling heuristic: leave-one-out reconstruction error at interior nodes
    probe = slice(2, -2, max(1, x.size // 128))
    xs_p = x[probe]
    if xs_p.size >= 4:
        w_mid = spline((xs_p[:-1] + xs_p[1:]) / 2.0)
        lin_mid = 0.5 * (w[probe][:-1] + w[probe][1:])
        scale = float(np.max(np.abs(w))) or 1.0
        rough = float(np.max(np.abs(w_mid - lin_mid))) / scale
        if rough > 0.5:
            raise ValueError(
                f"w appears undersampled for interpolation (roughness {rough:.2f}); "
                "supply a finer grid"
            )
    if n_out is None:
        n_out = 2 * x.size
    y_lo = float(lc.phi(float(x[0])))
    y_hi = float(lc.phi(float(x[-1])))
    y = np.linspace(y_lo, y_hi, n_out)
    xs = np.asarray(lc.phi_inv(y), dtype=float)
    dphi = np.asarray(lc.dphi(xs), dtype=float)
    return y, np.sqrt(dphi) * spline(xs)
