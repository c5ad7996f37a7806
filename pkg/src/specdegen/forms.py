"""Finite-dimensional quadratic-form pencils and perturbation diagnostics.

A ``FormPencil`` holds a symmetric energy form A, an inner product M
(positive definite), and optionally a compared form Q on the same space.
On top of it sit the quantitative form-comparison tools: the sharpest
epsilon in the closeness inequality, spectral projectors, the chain of
quasimode/resolvent inequalities, analytic eigenbranch tracking for
t-families, and the integrability diagnostic for the branch derivative.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, eigh, solve_triangular
from scipy.optimize import linear_sum_assignment

__all__ = [
    "FormPencil",
    "EigenBranch",
    "QuasimodeReport",
    "epsilon_closeness",
    "spectral_projector",
    "quasimode_suite",
    "track_branches",
    "integrability_diagnostic",
    "random_campaign",
]


def _check_symmetric(name: str, m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square")
    scale = max(float(np.max(np.abs(m))), 1.0)
    if float(np.max(np.abs(m - m.T))) > tol * scale:
        raise ValueError(f"{name} is not symmetric to {tol:g}")
    return 0.5 * (m + m.T)


@dataclass
class FormPencil:
    """Symmetric pencil (A, M) with an optional compared form Q."""

    a: np.ndarray
    m: np.ndarray | None = None
    q: np.ndarray | None = None
    _eig: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.a = _check_symmetric("A", self.a)
        n = self.a.shape[0]
        self.m = np.eye(n) if self.m is None else _check_symmetric("M", self.m)
        if self.q is not None:
            self.q = _check_symmetric("Q", self.q)
        try:
            cholesky(self.m)
        except np.linalg.LinAlgError:
            raise ValueError("M must be positive definite (Cholesky failed)") from None

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and M-orthonormal eigenvectors of (A, M)."""
        if self._eig is None:
            vals, vecs = eigh(self.a, self.m)
            self._eig = (vals, vecs)
        return self._eig

    def m_norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(v @ self.m @ v))

    def a_val(self, v: np.ndarray) -> float:
        return float(v @ self.a @ v)


def epsilon_closeness(pencil: FormPencil) -> float:
    """Smallest eps with |q(v,w) - a(v,w)| <= eps sqrt(a(v) a(w)) for all v, w.

    Equals the spectral radius of A^{-1/2} (Q - A) A^{-1/2}; A must be
    positive definite for the closeness notion to make sense.
    """
    if pencil.q is None:
        raise ValueError("pencil has no compared form Q")
    vals = np.linalg.eigvalsh(pencil.a)
    if vals.min() <= 0:
        raise ValueError("A must be positive definite")
    gen = eigh(pencil.q - pencil.a, pencil.a, eigvals_only=True)
    return float(np.max(np.abs(gen)))


def spectral_projector(pencil: FormPencil, interval: tuple[float, float]) -> np.ndarray:
    """M-orthogonal projector onto eigenvectors of (A, M) with eigenvalue in I."""
    lo, hi = interval
    vals, vecs = pencil.eigensystem()
    keep = (vals >= lo) & (vals <= hi)
    if not np.any(keep):
        return np.zeros_like(pencil.a)
    v = vecs[:, keep]
    return v @ (v.T @ pencil.m)


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + 1e-10) + 1e-14


@dataclass(frozen=True)
class QuasimodeReport:
    eps: float
    energy: float
    delta: float
    checks: list[InequalityCheck]

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)


def _riesz_residual_norm(pencil: FormPencil, vec: np.ndarray, energy: float) -> float:
    """sup over v of |a(w,v) - E<w,v>| / ||v||_M, i.e. the M^{-1} norm of the defect."""
    r = pencil.a @ vec - energy * (pencil.m @ vec)
    c = cho_factor(pencil.m)
    return float(np.sqrt(r @ cho_solve(c, r)))


def quasimode_suite(
    pencil: FormPencil, energy: float, interval: tuple[float, float]
) -> QuasimodeReport:
    """Evaluate both sides of the closeness/quasimode/projection inequalities.

    ``energy`` must be an eigenvalue of (Q, M) interior to the interval; the
    report carries one (lhs, rhs) pair per inequality.
    """
    if pencil.q is None:
        raise ValueError("pencil has no compared form Q")
    lo, hi = interval
    if not lo < energy < hi:
        raise ValueError("E must lie in the interior of I (delta = 0 rejected)")
    delta = min(energy - lo, hi - energy)
    eps = epsilon_closeness(pencil)

    qvals, qvecs = eigh(pencil.q, pencil.m)
    j = int(np.argmin(np.abs(qvals - energy)))
    if abs(qvals[j] - energy) > 1e-8 * max(1.0, abs(energy)):
        raise ValueError(
            f"E = {energy:g} is not an eigenvalue of (Q, M); closest is {qvals[j]:g}"
        )
    energy = float(qvals[j])
    u = qvecs[:, j]

    proj = spectral_projector(pencil, interval)
    pu = proj @ u
    up = u - pu
    blowup = (1.0 + energy / delta) ** 2

    checks = []
    # quasimode estimate: a(u - P u) <= eps² a(u) (1 + E/delta)²
    checks.append(
        InequalityCheck("quasimode_estimate", pencil.a_val(up), eps**2 * pencil.a_val(u) * blowup)
    )
    # orthogonality in the a-form: a(u - Pu, Pu) = 0
    checks.append(
        InequalityCheck(
            "a_orthogonality",
            abs(float(up @ pencil.a @ pu)),
            1e-9 * max(pencil.a_val(u), 1.0),
        )
    )
    # projection norm: ||Pu||² >= [1 - eps² (1+E/delta)²] a(u) / sup I
    checks.append(
        InequalityCheck(
            "projection_norm",
            (1.0 - eps**2 * blowup) * pencil.a_val(u) / hi,
            pencil.m_norm(pu) ** 2,
        )
    )
    # closeness consequence needs eps < (1 + E/delta)^{-1}
    if eps * (1.0 + energy / delta) < 1.0 and np.any(pu):
        resid = _riesz_residual_norm(pencil, pu, energy)
        bound = eps * hi / np.sqrt(1.0 - eps**2 * blowup) * pencil.m_norm(pu)
        checks.append(InequalityCheck("closeness_quasimode", resid, bound))
    # resolvent estimate on the defect of Pu against spec(A, M) \ I
    avals, _ = pencil.eigensystem()
    outside = avals[(avals < lo) | (avals > hi)]
    if outside.size and np.any(pu):
        dist = float(np.min(np.abs(outside - energy)))
        resid = _riesz_residual_norm(pencil, u - pu, energy)
        checks.append(
            InequalityCheck("resolvent", pencil.m_norm(u - pu), resid / dist)
        )
    return QuasimodeReport(eps=eps, energy=energy, delta=delta, checks=checks)


def resolvent_check(pencil: FormPencil, vec: np.ndarray, energy: float) -> InequalityCheck:
    """||w||_M <= (residual M^{-1}-norm) / dist(E, spec(A, M))."""
    vals, _ = pencil.eigensystem()
    delta = float(np.min(np.abs(vals - energy)))
    if delta == 0.0:
        raise ValueError("E lies in the spectrum; resolvent bound is vacuous")
    resid = _riesz_residual_norm(pencil, vec, energy)
    return InequalityCheck("resolvent", pencil.m_norm(vec), resid / delta)


def random_campaign(
    n: int, trials: int, seed: int, dim: int = 8
) -> tuple[int, list[QuasimodeReport]]:
    """Seeded random (A, Q, M, I, E) trials satisfying the lemma hypotheses.

    Returns (violations, reports).  Only trials whose generated data meet
    eps (1 + E/delta) < 1 are counted, as the lemmas require.
    """
    rng = np.random.default_rng(seed)
    reports = []
    violations = 0
    produced = 0
    while produced < trials:
        b = rng.normal(size=(dim, dim))
        m = b @ b.T + dim * np.eye(dim)
        c = rng.normal(size=(dim, dim))
        a = c @ c.T + 0.5 * np.eye(dim)
        p = rng.normal(size=(dim, dim), scale=0.02)
        q = a + 0.5 * (p + p.T) * np.sqrt(np.trace(a) / dim)
        pencil = FormPencil(a=a, m=m, q=q)
        try:
            eps = epsilon_closeness(pencil)
        except ValueError:
            continue
        qvals = eigh(q, m, eigvals_only=True)
        j = int(rng.integers(0, dim))
        energy = float(qvals[j])
        if energy <= 0:
            continue
        # pick delta so the closeness hypothesis holds with margin
        if eps >= 0.5:
            continue
        delta = 2.0 * eps * energy / (1.0 - eps) + 0.1 * energy + 1e-6
        interval = (energy - delta, energy + delta)
        report = quasimode_suite(pencil, energy, interval)
        produced += 1
        reports.append(report)
        if not report.all_satisfied:
            violations += 1
    _ = n
    return violations, reports


@dataclass
class EigenBranch:
    """One tracked analytic eigenbranch of a t-family."""

    t_grid: np.ndarray
    values: np.ndarray
    vectors: np.ndarray  # shape (len(t_grid), dim), unit M-norm, sign aligned
    uncertain: list[int] = field(default_factory=list)


@dataclass
class BranchFamily:
    branches: list[EigenBranch]
    crossings: list[tuple[float, float]]  # intervals where sorted order permutes

    def branch_values(self, i: int) -> np.ndarray:
        return self.branches[i].values


def _match_columns(
    m_mat: np.ndarray, prev: np.ndarray, cur: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Assignment maximizing |<prev_i, cur_j>_M|; returns (perm, overlaps)."""
    overlap = np.abs(prev.T @ m_mat @ cur)
    row, col = linear_sum_assignment(-overlap)
    perm = np.empty_like(col)
    perm[row] = col
    return perm, overlap[row, perm[row]]


def track_branches(
    family: Callable[[float], FormPencil],
    t_grid,
    min_overlap: float = 0.9,
    max_refine: int = 12,
    use_q: bool = False,
) -> BranchFamily:
    """Track analytic eigenbranches of t -> (A(t), M(t)) by overlap continuation.

    Between adjacent grid points the eigenvectors are matched by a maximal
    |<u_i(t), u_j(t')>_M| assignment; when the best achievable overlap drops
    below ``min_overlap`` the interval is bisected (the family is evaluated
    at midpoints) up to ``max_refine`` times, after which the segment is
    flagged uncertain.  Near-degenerate clusters are aligned blockwise.
    """
    ts = sorted(float(t) for t in t_grid)
    if len(ts) < 2:
        raise ValueError("need at least two grid points")

    def eig_at(t: float):
        pencil = family(t)
        mat = pencil.q if use_q else pencil.a
        vals, vecs = eigh(mat, pencil.m)
        return pencil.m, vals, vecs

    m0, vals0, vecs0 = eig_at(ts[0])
    dim = vals0.size
    chain_ts = [ts[0]]
    chain_vals = [vals0]
    chain_vecs = [vecs0]
    uncertain_steps: list[int] = []
    crossings: list[tuple[float, float]] = []
    # the permutation of sorted labels carried along the chain
    labels = np.arange(dim)
    label_history = [labels.copy()]

    for t_prev, t_next in zip(ts[:-1], ts[1:]):
        segments = [(t_prev, t_next)]
        depth = 0
        while segments:
            a_t, b_t = segments.pop(0)
            m_prev = chain_vecs[-1]
            m_mat, vals, vecs = eig_at(b_t)
            perm, overlaps = _match_columns(m_mat, m_prev, vecs)
            if float(np.min(overlaps)) < min_overlap and depth < max_refine and b_t - a_t > 1e-12:
                mid = 0.5 * (a_t + b_t)
                segments = [(a_t, mid), (mid, b_t)] + segments
                depth += 1
                continue
            if float(np.min(overlaps)) < min_overlap:
                uncertain_steps.append(len(chain_ts))
            vecs = vecs[:, perm]
            vals = vals[perm]
            # blockwise alignment of near-degenerate clusters
            vals_sorted_args = np.argsort(vals)
            gaps = np.diff(np.sort(vals))
            tiny = gaps < 1e-10 * max(1.0, float(np.max(np.abs(vals))))
            if np.any(tiny):
                vecs = _procrustes_clusters(m_mat, m_prev, vecs, vals, 1e-10)
            _ = vals_sorted_args
            # sign alignment
            signs = np.sign(np.einsum("ij,ij->j", m_prev, m_mat @ vecs))
            signs[signs == 0] = 1.0
            vecs = vecs * signs
            chain_ts.append(b_t)
            chain_vals.append(vals)
            chain_vecs.append(vecs)
            label_history.append(label_history[-1].copy())

    chain_ts_arr = np.array(chain_ts)
    values = np.array(chain_vals)  # (n_t, dim) in branch order
    # crossings: where the ascending order of branch values permutes
    order = np.argsort(values, axis=1)
    for i in range(len(chain_ts_arr) - 1):
        if not np.array_equal(order[i], order[i + 1]):
            crossings.append((float(chain_ts_arr[i]), float(chain_ts_arr[i + 1])))
    branches = []
    vec_arr = np.array(chain_vecs)  # (n_t, dim, dim)
    for j in range(dim):
        branches.append(
            EigenBranch(
                t_grid=chain_ts_arr,
                values=values[:, j],
                vectors=vec_arr[:, :, j],
                uncertain=[i for i in uncertain_steps],
            )
        )
    return BranchFamily(branches=branches, crossings=crossings)


def _procrustes_clusters(
    m_mat: np.ndarray, prev: np.ndarray, vecs: np.ndarray, vals: np.ndarray, tol: float
) -> np.ndarray:
    """Rotate near-degenerate eigenvector blocks to best match the previous frame."""
    out = vecs.copy()
    order = np.argsort(vals)
    i = 0
    scale = max(1.0, float(np.max(np.abs(vals))))
    while i < vals.size:
        j = i
        while j + 1 < vals.size and vals[order[j + 1]] - vals[order[j]] < tol * scale:
            j += 1
        if j > i:
            idx = order[i : j + 1]
            block_prev = prev[:, idx]
            block_cur = vecs[:, idx]
            m_overlap = block_prev.T @ m_mat @ block_cur
            u, _, vt = np.linalg.svd(m_overlap)
            rot = (u @ vt).T
            out[:, idx] = block_cur @ rot.T
        i = j + 1
    return out


@dataclass(frozen=True)
class IntegrabilityReport:
    t_vals: np.ndarray
    integrand: np.ndarray  # adot(P^I u) / ||P^I u||²
    partial_integrals: np.ndarray  # trapezoid over [t_i, t*]
    projection_lower: float  # measured max of ||u|| / ||P^I u||
    hypothesis_ok: bool
    hypothesis_notes: list[str]


def integrability_diagnostic(
    a_family: Callable[[float], FormPencil],
    q_family: Callable[[float], FormPencil],
    interval: tuple[float, float],
    t_grid,
    branch_index: int = 0,
    dt_rel: float = 1e-5,
) -> IntegrabilityReport:
    """Sample t -> adot(P^I u_t) / ||P^I u_t||² along a tracked q-branch.

    Hypotheses checked on the grid: first-order closeness of q to a
    (eps(t)/t bounded) and 0 <= adot <= a/t spectrally.  Partial trapezoid
    integrals toward the smallest t are reported; a finite grid can only
    exhibit Cauchy behavior, not prove integrability.
    """
    ts = sorted(float(t) for t in t_grid)
    notes: list[str] = []
    ok = True
    eps_over_t = []
    for t in ts:
        ap = a_family(t)
        qp = q_family(t)
        pencil = FormPencil(a=ap.a, m=ap.m, q=qp.a)
        eps_over_t.append(epsilon_closeness(pencil) / t)
    if max(eps_over_t) > 10.0 * (min(eps_over_t) + 1e-30) and max(eps_over_t) > 1e3:
        ok = False
        notes.append(f"eps(t)/t looks unbounded: {max(eps_over_t):.3g}")

    def adot(t: float) -> np.ndarray:
        dt = dt_rel * t
        return (a_family(t + dt).a - a_family(t - dt).a) / (2.0 * dt)

    for t in (ts[0], ts[-1]):
        ap = a_family(t)
        d = adot(t)
        dvals = eigh(0.5 * (d + d.T), ap.m, eigvals_only=True)
        if dvals.min() < -1e-8 * max(1.0, abs(dvals).max()):
            ok = False
            notes.append(f"adot not nonnegative at t={t:g} (min {dvals.min():.3g})")
        rel = eigh(0.5 * (d + d.T), ap.a, eigvals_only=True)
        if rel.max() > 1.0 / t + 1e-8:
            ok = False
            notes.append(f"adot > a/t at t={t:g} (max ratio {rel.max():.3g})")

    fam = track_branches(lambda t: q_family(t), ts)
    branch = fam.branches[branch_index]
    integrand = np.empty(len(ts))
    proj_ratio = 0.0
    for i, t in enumerate(ts):
        ap = a_family(t)
        u = branch.vectors[i]
        proj = spectral_projector(ap, interval)
        pu = proj @ u
        norm_pu = float(pu @ ap.m @ pu)
        if norm_pu <= 0:
            warnings.warn(f"projection vanished at t={t:g}", stacklevel=2)
            integrand[i] = np.nan
            continue
        d = adot(t)
        integrand[i] = float(pu @ (0.5 * (d + d.T)) @ pu) / norm_pu
        norm_u = float(u @ ap.m @ u)
        proj_ratio = max(proj_ratio, float(np.sqrt(norm_u / norm_pu)))
    partials = np.zeros(len(ts))
    for i in range(len(ts) - 2, -1, -1):
        dt = ts[i + 1] - ts[i]
        partials[i] = partials[i + 1] + 0.5 * dt * (integrand[i] + integrand[i + 1])
    return IntegrabilityReport(
        t_vals=np.array(ts),
        integrand=integrand,
        partial_integrals=partials,
        projection_lower=proj_ratio,
        hypothesis_ok=ok,
        hypothesis_notes=notes,
    )
