"""Product spectra assembled from a transverse spectrum and half-line solves.

Separation of variables writes every eigenvalue of the tensor family as an
eigenvalue of one half-line problem a_t^mu with mu in the transverse
spectrum; entries stay labeled by (transverse index, radial index) through
every merge, which is the computational shadow of the mode projectors.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import halfline
from .profiles import WeightProfile

__all__ = [
    "TransverseSpectrum",
    "SpectrumEntry",
    "LabeledSpectrum",
    "dirichlet_interval",
    "product_spectrum",
    "thresholds",
    "simplicity_scan",
    "cylinder_spectrum",
    "cylinder_simplicity_threshold",
]


@dataclass(frozen=True)
class TransverseSpectrum:
    """Strictly increasing positive eigenvalues of the transverse form."""

    eigenvalues: tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        vals = self.eigenvalues
        if not vals:
            raise ValueError("transverse spectrum must be nonempty")
        if any(v <= 0 for v in vals):
            raise ValueError("transverse eigenvalues must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("transverse eigenvalues must be strictly increasing (simple)")

    def extended(self, count: int) -> "TransverseSpectrum":
        return self


@dataclass(frozen=True)
class DirichletInterval(TransverseSpectrum):
    """mu_l = (l pi / L)² for a Dirichlet interval of length L; extensible."""

    length: float = 1.0

    def extended(self, count: int) -> "DirichletInterval":
        vals = tuple((k * math.pi / self.length) ** 2 for k in range(1, count + 1))
        return DirichletInterval(
            eigenvalues=vals, label=self.label, length=self.length
        )


def dirichlet_interval(length: float = 1.0, count: int = 8) -> DirichletInterval:
    vals = tuple((k * math.pi / length) ** 2 for k in range(1, count + 1))
    return DirichletInterval(
        eigenvalues=vals, label=f"Dirichlet interval length {length:g}", length=length
    )


@dataclass(frozen=True)
class SpectrumEntry:
    lam: float
    mu_index: int  # 1-based transverse label l
    radial_index: int  # 1-based half-line label k
    multiplicity: int = 1


@dataclass
class LabeledSpectrum:
    """Eigenvalues sorted ascending, each tagged by its (l, k) provenance."""

    entries: list[SpectrumEntry]
    renormalization: float | None = None  # t² factor when meaningful
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.entries.sort(key=lambda e: (e.lam, e.mu_index, e.radial_index))
        seen = set()
        for e in self.entries:
            key = (e.mu_index, e.radial_index)
            if key in seen:
                raise ValueError(f"duplicate label {key}")
            seen.add(key)

    @property
    def values(self) -> list[float]:
        return [e.lam for e in self.entries]

    def restricted(self, mu_index: int) -> list[float]:
        return [e.lam for e in self.entries if e.mu_index == mu_index]


def thresholds(b: TransverseSpectrum, profile: WeightProfile) -> list[float]:
    """mu_l / sigma(0), ascending: the limits of all renormalized branches."""
    return [mu / profile.sigma0 for mu in b.eigenvalues]


def product_spectrum(
    t: float,
    profile: WeightProfile,
    b: TransverseSpectrum,
    lambda_max: float,
    bc: str = "dirichlet",
) -> LabeledSpectrum:
    """All eigenvalues <= lambda_max of the separated family at parameter t.

    Transverse modes whose threshold mu_l/sigma(0) exceeds lambda_max cannot
    contribute (every half-line eigenvalue sits above its threshold), which
    is what makes the assembly finite.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if not math.isfinite(lambda_max):
        raise ValueError("lambda_max must be finite")
    sigma0 = profile.sigma0
    # make sure the transverse list reaches past the cutoff when extensible
    mus = list(b.eigenvalues)
    if mus[-1] / sigma0 <= lambda_max:
        grown = b.extended(2 * len(mus) + 16)
        while grown.eigenvalues[-1] / sigma0 <= lambda_max and len(grown.eigenvalues) > len(mus):
            mus = list(grown.eigenvalues)
            grown = grown.extended(2 * len(mus) + 16)
        mus = list(grown.eigenvalues)
    entries: list[SpectrumEntry] = []
    notes: list[str] = []
    for ell, mu in enumerate(mus, start=1):
        if mu / sigma0 > lambda_max:
            break
        problem = halfline.HalfLineProblem(t=t, mu=mu, profile=profile, bc=bc)
        spec = halfline.solve_below(problem, lambda_max)
        notes.extend(f"l={ell}: {w}" for w in spec.warnings)
        for k, lam in enumerate(spec.eigenvalues, start=1):
            entries.append(SpectrumEntry(lam=lam, mu_index=ell, radial_index=k))
    return LabeledSpectrum(entries=entries, renormalization=t * t, warnings=notes)


@dataclass(frozen=True)
class SimplicityRecord:
    t: float
    min_gap: float
    suspects: tuple[tuple[SpectrumEntry, SpectrumEntry], ...]


@dataclass(frozen=True)
class SimplicityReport:
    records: tuple[SimplicityRecord, ...]
    crossing_intervals: tuple[tuple[float, float, tuple[int, int], tuple[int, int]], ...]


def simplicity_scan(spectra: dict[float, LabeledSpectrum], tol: float) -> SimplicityReport:
    """Minimal gaps and near-multiplicities per t, plus label-order crossings.

    ``spectra`` maps t to a labeled spectrum with a shared lambda_max.  A
    crossing is an interval (t1, t2) on which two labeled branches swap
    their relative order.
    """
    records = []
    for t in sorted(spectra, reverse=True):
        sp = spectra[t]
        vals = sp.values
        suspects = []
        min_gap = math.inf
        for a, bb in zip(sp.entries[:-1], sp.entries[1:]):
            gap = bb.lam - a.lam
            min_gap = min(min_gap, gap)
            if gap <= tol * max(abs(a.lam), 1.0):
                suspects.append((a, bb))
        records.append(SimplicityRecord(t=t, min_gap=min_gap, suspects=tuple(suspects)))
        _ = vals
    ts = sorted(spectra, reverse=True)
    crossings = []
    for t1, t2 in zip(ts[:-1], ts[1:]):
        r1 = {(e.mu_index, e.radial_index): i for i, e in enumerate(spectra[t1].entries)}
        r2 = {(e.mu_index, e.radial_index): i for i, e in enumerate(spectra[t2].entries)}
        common = sorted(set(r1) & set(r2))
        for i, ka in enumerate(common):
            for kb in common[i + 1 :]:
                if (r1[ka] - r1[kb]) * (r2[ka] - r2[kb]) < 0:
                    crossings.append((t1, t2, ka, kb))
    return SimplicityReport(records=tuple(records), crossing_intervals=tuple(crossings))


def cylinder_spectrum(t: float, n: int) -> LabeledSpectrum:
    """The n smallest Dirichlet eigenvalues pi² (k² + l²/t²) of the flat cylinder.

    k >= 1 indexes the interval factor, l >= 0 the circle factor; modes with
    l >= 1 are doubled (sine and cosine), l = 0 is simple.
    """
    if t <= 0 or n < 1:
        raise ValueError("need t > 0 and n >= 1")
    pi2 = math.pi * math.pi

    def value(k: int, ell: int) -> float:
        return pi2 * (k * k + ell * ell / (t * t))

    heap: list[tuple[float, int, int]] = [(value(1, 0), 1, 0)]
    seen = {(1, 0)}
    entries: list[SpectrumEntry] = []
    while len(entries) < n and heap:
        lam, k, ell = heapq.heappop(heap)
        entries.append(
            SpectrumEntry(lam=lam, mu_index=ell + 1, radial_index=k, multiplicity=1 if ell == 0 else 2)
        )
        for k2, l2 in ((k + 1, ell), (k, ell + 1)):
            if (k2, l2) not in seen:
                seen.add((k2, l2))
                heapq.heappush(heap, (value(k2, l2), k2, l2))
    return LabeledSpectrum(entries=entries, renormalization=t * t)


def cylinder_simplicity_threshold(n: int, samples: int = 4000) -> float:
    """Largest t below which the first n cylinder eigenvalues are all simple.

    Enumerated by brute force over (k, l).  The enumeration gives
    t*(n) = (n² - 1)^{-1/2}; the source text states (n² - 1)^{-1}, and the
    two are reported side by side by callers rather than silently merged.
    """
    if n < 2:
        return math.inf

    def first_n_simple(t: float) -> bool:
        sp = cylinder_spectrum(t, n)
        if any(e.multiplicity > 1 for e in sp.entries):
            return False
        vals = sp.values
        return all(b - a > 1e-12 * max(b, 1.0) for a, b in zip(vals, vals[1:]))

    # bracket then bisect on the boolean
    lo, hi = 1e-4, 2.0
    if first_n_simple(hi):
        return hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if first_n_simple(mid):
            lo = mid
        else:
            hi = mid
    _ = samples
    return 0.5 * (lo + hi)
