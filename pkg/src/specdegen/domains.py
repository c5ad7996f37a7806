"""Concrete degenerating domains: stretched profiles, thin triangles, sectors.

The stretch change of variables turns the Dirichlet problem on a fibered
domain into a weighted half-line problem with sigma = rho² ∘ psi^{-1}; the
right triangle (0,0), (1,0), (1,t) is solved directly by P1 finite elements
on a structured anisotropic mesh; the circular sector of angle arctan(t)
separates into Bessel problems of order l pi / arctan(t), whose zeros come
from the radial shooting in :mod:`specdegen.bessel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import eigsh

from .bessel import radial_bessel_zeros
from .profiles import WeightProfile
from .separation import LabeledSpectrum, SpectrumEntry

__all__ = [
    "StretchSpec",
    "stretch_sigma",
    "TriangleMesh",
    "triangle_mesh",
    "TriangleResult",
    "triangle_spectrum",
    "sector_spectrum",
    "compare_spectra",
    "ComparisonReport",
]


@dataclass(frozen=True)
class StretchSpec:
    """Fiber radius profile rho on [0, c] with rho(0) = 0 and rho' > 0."""

    rho: Callable[[float], float]
    drho: Callable[[float], float]
    d2rho: Callable[[float], float]
    c: float

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if abs(self.rho(0.0)) > 1e-12:
            raise ValueError(f"rho(0) = {self.rho(0.0):g}, expected 0")
        for x in np.linspace(1e-6, self.c, 23):
            if self.drho(float(x)) <= 0:
                raise ValueError(f"rho'({x:g}) <= 0")


def stretch_sigma(spec: StretchSpec, s_max: float = 200.0) -> WeightProfile:
    """The weight sigma = rho² ∘ psi^{-1} with psi(x) = ∫_x^c dr/rho(r).

    psi^{-1} solves x'(s) = -rho(x), x(0) = c, which is integrated once with
    dense output; derivatives of sigma follow by the chain rule:
    sigma' = -2 rho² rho' ∘ psi^{-1} and sigma'' = 2 rho² (2 rho'² + rho rho'') ∘ psi^{-1}.
    """
    rho, drho, d2rho = spec.rho, spec.drho, spec.d2rho

    sol = solve_ivp(
        lambda s, x: (-rho(float(x[0])),),
        (0.0, s_max),
        (spec.c,),
        method="DOP853",
        rtol=1e-12,
        atol=1e-300,
        dense_output=True,
    )
    if not sol.success:  # pragma: no cover
        raise RuntimeError(f"psi inversion failed: {sol.message}")
    s_hi = float(sol.t[-1])

    def x_of(s: float) -> float:
        if s < 0:
            raise ValueError("sigma is defined on s >= 0")
        if s > s_hi:
            s = s_hi  # rho(x) already below resolvable range; freeze the tail
        return float(sol.sol(s)[0])

    def sigma(s: float) -> float:
        return rho(x_of(s)) ** 2

    def dsigma(s: float) -> float:
        x = x_of(s)
        return -2.0 * rho(x) ** 2 * drho(x)

    def d2sigma(s: float) -> float:
        x = x_of(s)
        r = rho(x)
        return 2.0 * r * r * (2.0 * drho(x) ** 2 + r * d2rho(x))

    return WeightProfile(
        sigma=sigma, dsigma=dsigma, d2sigma=d2sigma, name=f"stretch(c={spec.c:g})"
    )


# ---------------------------------------------------------------------------
# triangle FEM
# ---------------------------------------------------------------------------


@dataclass
class TriangleMesh:
    """Structured P1 mesh of the triangle (0,0), (1,0), (1,t)."""

    t: float
    n: int
    vertices: np.ndarray  # (n_v, 2)
    elements: np.ndarray  # (n_e, 3) vertex indices, positive orientation
    interior: np.ndarray  # indices of non-boundary vertices

    @property
    def h(self) -> float:
        return 1.0 / self.n


def triangle_mesh(t: float, n: int) -> TriangleMesh:
    """Map the structured mesh of {0 <= y <= x <= 1} through (x, y) -> (x, t y)."""
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    if n < 8:
        raise ValueError("need at least 8 elements across the thin direction")
    index = {}
    verts = []
    for i in range(n + 1):
        for j in range(i + 1):
            index[(i, j)] = len(verts)
            verts.append((i / n, t * j / n))
    elems = []
    for i in range(n):
        for j in range(i + 1):
            a = index[(i, j)]
            b = index[(i + 1, j)]
            c = index[(i + 1, j + 1)]
            elems.append((a, b, c))
            if j < i:
                d = index[(i, j + 1)]
                elems.append((a, c, d))
    vertices = np.array(verts)
    elements = np.array(elems, dtype=np.int64)
    boundary = set()
    for i in range(n + 1):
        boundary.add(index[(i, 0)])  # bottom edge y = 0
        boundary.add(index[(i, i)])  # hypotenuse y = t x
    for j in range(n + 1):
        boundary.add(index[(n, j)])  # right edge x = 1
    interior = np.array(sorted(set(range(len(verts))) - boundary), dtype=np.int64)
    mesh = TriangleMesh(t=t, n=n, vertices=vertices, elements=elements, interior=interior)
    _validate_mesh(mesh)
    return mesh


def _validate_mesh(mesh: TriangleMesh):
    x = mesh.vertices[mesh.elements[:, 0]]
    y = mesh.vertices[mesh.elements[:, 1]]
    z = mesh.vertices[mesh.elements[:, 2]]
    areas = 0.5 * ((y[:, 0] - x[:, 0]) * (z[:, 1] - x[:, 1]) - (z[:, 0] - x[:, 0]) * (y[:, 1] - x[:, 1]))
    if np.any(areas <= 0):
        raise ValueError("mesh has non-positive element areas")


def _assemble(mesh: TriangleMesh) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """P1 stiffness and consistent mass on the interior nodes."""
    v = mesh.vertices
    e = mesh.elements
    p1, p2, p3 = v[e[:, 0]], v[e[:, 1]], v[e[:, 2]]
    b = np.stack([p2[:, 1] - p3[:, 1], p3[:, 1] - p1[:, 1], p1[:, 1] - p2[:, 1]], axis=1)
    c = np.stack([p3[:, 0] - p2[:, 0], p1[:, 0] - p3[:, 0], p2[:, 0] - p1[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    area = 0.5 * ((p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1]) - (p3[:, 0] - p1[:, 0]) * (p2[:, 1] - p1[:, 1]))
    n_e = e.shape[0]
    rows = np.repeat(e, 3, axis=1).reshape(n_e, 9)
    cols = np.tile(e, (1, 3)).reshape(n_e, 9)
    k_loc = (
        b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]
    ) / (4.0 * area)[:, None, None]
    m_loc = (np.ones((3, 3)) + np.eye(3))[None, :, :] * (area / 12.0)[:, None, None]
    n_v = v.shape[0]
    K = sparse.coo_matrix((k_loc.reshape(-1), (rows.reshape(-1), cols.reshape(-1))), shape=(n_v, n_v)).tocsr()
    M = sparse.coo_matrix((m_loc.reshape(-1), (rows.reshape(-1), cols.reshape(-1))), shape=(n_v, n_v)).tocsr()
    keep = mesh.interior
    return K[np.ix_(keep, keep)].tocsr(), M[np.ix_(keep, keep)].tocsr()


def _fem_eigenvalues(mesh: TriangleMesh, count: int) -> np.ndarray:
    K, M = _assemble(mesh)
    if K.shape[0] <= count + 2:
        raise ValueError("mesh too coarse for the requested eigenvalue count")
    vals = eigsh(K, k=count, M=M, sigma=0.0, which="LM", return_eigenvectors=False)
    return np.sort(vals)


@dataclass(frozen=True)
class TriangleResult:
    t: float
    h: float
    lambdas_h: np.ndarray
    lambdas_h2: np.ndarray
    lambda_extrap: np.ndarray
    error_estimate: np.ndarray
    renormalized: np.ndarray  # t² lambda_extrap


def triangle_spectrum(t: float, n_eigs: int, h: float) -> TriangleResult:
    """First Dirichlet eigenvalues of the triangle (0,0), (1,0), (1,t) by P1 FEM.

    Richardson extrapolation from meshes h and h/2 is reported as
    ``lambda_extrap``.  The error estimate of the extrapolated values comes
    from a three-mesh h² + h⁴ fit (an extra coarse mesh at 2h), which
    targets the accuracy of the extrapolation itself rather than of the
    finest mesh.
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    n = max(int(round(1.0 / h)), 8)
    if n < 8:
        raise ValueError(f"thin direction underresolved: need h <= 1/8, got h = {h:g}")
    lam_2h = _fem_eigenvalues(triangle_mesh(t, max(n // 2, 8)), n_eigs)
    lam_h = _fem_eigenvalues(triangle_mesh(t, n), n_eigs)
    lam_h2 = _fem_eigenvalues(triangle_mesh(t, 2 * n), n_eigs)
    extrap = (4.0 * lam_h2 - lam_h) / 3.0
    # three-mesh fit lambda(h) = lam* + c2 h² + c4 h⁴ to estimate the h⁴ residue
    h0 = 1.0 / max(n // 2, 8)
    h1 = 1.0 / n
    h2 = 1.0 / (2 * n)
    est = np.empty(n_eigs)
    for i in range(n_eigs):
        mat = np.array(
            [
                [1.0, h0**2, h0**4],
                [1.0, h1**2, h1**4],
                [1.0, h2**2, h2**4],
            ]
        )
        star, _, c4 = np.linalg.solve(mat, np.array([lam_2h[i], lam_h[i], lam_h2[i]]))
        est[i] = abs(star - extrap[i]) + abs(c4) * h2**4
    return TriangleResult(
        t=t,
        h=h,
        lambdas_h=lam_h,
        lambdas_h2=lam_h2,
        lambda_extrap=extrap,
        error_estimate=est,
        renormalized=t * t * extrap,
    )


# ---------------------------------------------------------------------------
# sector
# ---------------------------------------------------------------------------


def sector_spectrum(t: float, n_eigs: int, nu_cap: float = 5e3) -> LabeledSpectrum:
    """First Dirichlet eigenvalues of the unit-disc sector with angle arctan t.

    Separation in polar coordinates gives lambda_{l,k} = j_{nu_l, k}² with
    nu_l = l pi / arctan(t); the zeros come from the radial ODE shooting
    rather than large-order Bessel evaluation.
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    angle = math.atan(t)
    entries: list[SpectrumEntry] = []
    notes: list[str] = []
    lam_cap = math.inf
    ell = 0
    while True:
        ell += 1
        nu = ell * math.pi / angle
        if nu > nu_cap:
            notes.append(
                f"order cap reached at l={ell} (nu={nu:.3g}); spectrum truncated"
            )
            break
        if nu * nu > lam_cap:
            break
        k = 0
        zeros = radial_bessel_zeros(nu, max(n_eigs, 4))
        for k, j in enumerate(zeros, start=1):
            lam = j * j
            if lam > lam_cap:
                break
            entries.append(SpectrumEntry(lam=lam, mu_index=ell, radial_index=k))
        entries.sort(key=lambda s: s.lam)
        if len(entries) >= n_eigs:
            lam_cap = entries[n_eigs - 1].lam
    spec = LabeledSpectrum(entries=entries[:n_eigs], renormalization=t * t)
    spec.warnings.extend(notes)
    return spec


@dataclass(frozen=True)
class ComparisonReport:
    hausdorff: float
    matched_diffs: tuple[float, ...]

    @property
    def max_matched(self) -> float:
        return max(self.matched_diffs)


def compare_spectra(s1, s2, n: int) -> ComparisonReport:
    """Matched |s1_k - s2_k| for k <= n plus the Hausdorff distance of the truncations."""
    a = np.asarray(list(s1), dtype=float)[: n]
    b = np.asarray(list(s2), dtype=float)[: n]
    if a.size < n or b.size < n:
        raise ValueError(f"need at least {n} values in both spectra")
    if np.any(np.diff(a) < 0) or np.any(np.diff(b) < 0):
        raise ValueError("spectra must be sorted ascending")
    diffs = tuple(float(abs(x - y)) for x, y in zip(a, b))
    d_ab = max(float(np.min(np.abs(b - x))) for x in a)
    d_ba = max(float(np.min(np.abs(a - y))) for y in b)
    return ComparisonReport(hausdorff=max(d_ab, d_ba), matched_diffs=diffs)
