"""Single-photon states spread over labelled paths.

A photon is a superposition of branches; each branch sits on one path with a
linear polarization (degrees, modulo 180) and a complex amplitude.  The
amplitude is stored as a probability weight plus a phase so that the dyadic
weights used by the protocol (1/2, 1/4, ...) stay exact in floating point.

Measurements use one polarization analyzer per path.  Analyzers never
recombine paths, so every outcome probability is independent of the relative
phases between branches.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    BadWeights,
    BasisIncomplete,
    DuplicatePath,
    EmptyState,
    UnknownPath,
    ZeroNorm,
)

# Path label where the photon clicked, or None when no detector fired.
Outcome = Optional[str]
NO_CLICK: Outcome = None

CANONICAL_PATHS = ("r", "s", "t")
NORM_TOL = 1e-12
TWO_PI = 2.0 * math.pi


def path_labels(m: int) -> tuple[str, ...]:
    """Ordered labels for an m-way split: r, s, t, then p3, p4, ..."""
    if m < 1:
        raise ValueError("need at least one path")
    return CANONICAL_PATHS[:m] + tuple(f"p{i}" for i in range(3, m))


def normalize_angle(degrees: float) -> float:
    a = math.fmod(float(degrees), 180.0)
    if a < 0.0:
        a += 180.0
    if a >= 180.0:  # -tiny + 180 rounds up to 180
        a = 0.0
    return a + 0.0  # drop negative zero


def cos_deg(degrees: float) -> float:
    """Cosine in degrees, exact at multiples of 90."""
    d = math.fmod(degrees, 360.0)
    if d < 0.0:
        d += 360.0
    if d == 0.0 or d == 360.0:
        return 1.0
    if d == 90.0 or d == 270.0:
        return 0.0
    if d == 180.0:
        return -1.0
    return math.cos(math.radians(d))


def malus(delta: float) -> float:
    """cos^2 of an angle difference; exact at multiples of 45 degrees."""
    return 0.5 * (1.0 + cos_deg(2.0 * delta))


def cos_product(a: float, b: float) -> float:
    return 0.5 * (cos_deg(a - b) + cos_deg(a + b))


class Branch(NamedTuple):
    path: str
    angle: float
    weight: float
    phase: float = 0.0

    @property
    def amplitude(self) -> complex:
        return math.sqrt(self.weight) * cmath.exp(1j * self.phase)


@dataclass(frozen=True)
class PhotonState:
    branches: tuple[Branch, ...]

    def __post_init__(self):
        if not self.branches:
            raise EmptyState("a photon needs at least one branch")
        paths = [b.path for b in self.branches]
        if len(set(paths)) != len(paths):
            raise DuplicatePath(f"repeated path in {paths}")
        total = math.fsum(b.weight for b in self.branches)
        if abs(total - 1.0) > NORM_TOL:
            raise ZeroNorm(f"branch weights sum to {total}, expected 1")

    @property
    def paths(self) -> tuple[str, ...]:
        return tuple(b.path for b in self.branches)

    def branch(self, path: str) -> Branch:
        for b in self.branches:
            if b.path == path:
                return b
        raise UnknownPath(path)

    @cached_property
    def shape(self) -> tuple[tuple[str, float, float], ...]:
        # Phase-free fingerprint; everything a per-path analyzer can see.
        return tuple((b.path, b.angle, b.weight) for b in self.branches)

    def with_phases(self, phases: Sequence[float]) -> "PhotonState":
        return PhotonState(tuple(b._replace(phase=float(p) % TWO_PI) for b, p in zip(self.branches, phases)))


def make_state(branches: Iterable[tuple[str, float, complex]]) -> PhotonState:
    """Build a normalized photon from (path, angle, amplitude) triples."""
    items = list(branches)
    if not items:
        raise EmptyState("a photon needs at least one branch")
    paths = [p for p, _, _ in items]
    if len(set(paths)) != len(paths):
        raise DuplicatePath(f"repeated path in {paths}")
    sq = [abs(complex(a)) ** 2 for _, _, a in items]
    norm = math.fsum(sq)
    if norm <= 0.0:
        raise ZeroNorm("all amplitudes are zero")
    # atan2 rather than cmath.phase, which raises on denormal results
    return PhotonState(tuple(
        Branch(str(p), normalize_angle(angle), w / norm, math.atan2(complex(a).imag, complex(a).real) % TWO_PI)
        for (p, angle, a), w in zip(items, sq)
    ))


def equal_superposition(polarizations: Iterable[tuple[str, float]]) -> PhotonState:
    """Equal-weight, zero-phase superposition, e.g. the output of a 50:50 splitter."""
    items = list(polarizations)
    if not items:
        raise EmptyState("a photon needs at least one branch")
    w = 1.0 / len(items)
    return PhotonState(tuple(Branch(str(p), normalize_angle(a), w) for p, a in items))


def single_path(path: str, angle: float) -> PhotonState:
    return PhotonState((Branch(path, normalize_angle(angle), 1.0),))


def rotate(state: PhotonState, path: str, delta: float) -> PhotonState:
    if path not in state.paths:
        raise UnknownPath(path)
    return PhotonState(tuple(
        b._replace(angle=normalize_angle(b.angle + delta)) if b.path == path else b
        for b in state.branches
    ))


def randomize_relative_phase(state: PhotonState, rng: np.random.Generator) -> PhotonState:
    """Multiply every branch by an independent uniformly random unit phase."""
    kicks = rng.random(len(state.branches)) * TWO_PI
    return state.with_phases([b.phase + k for b, k in zip(state.branches, kicks)])


@dataclass(frozen=True)
class AnalyzerBank:
    """Polarization analyzers keyed by path.  Paths without an entry have no detector."""

    name: str
    orientations: tuple[tuple[str, float], ...] = ()

    @classmethod
    def of(cls, name: str = "", **angles: float) -> "AnalyzerBank":
        return cls(name, tuple((p, normalize_angle(a)) for p, a in angles.items()))

    @classmethod
    def from_mapping(cls, angles: Mapping[str, Optional[float]], name: str = "") -> "AnalyzerBank":
        return cls(name, tuple((p, normalize_angle(a)) for p, a in angles.items() if a is not None))

    def angle_for(self, path: str) -> Optional[float]:
        for p, a in self.orientations:
            if p == path:
                return a
        return None

    @property
    def paths(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.orientations)


DA0 = AnalyzerBank.of("DA0", r=0.0, s=0.0)
DA1 = AnalyzerBank.of("DA1", r=0.0, s=45.0)


@lru_cache(maxsize=4096)
def _distribution(shape: tuple, bank: AnalyzerBank) -> tuple[tuple[Outcome, float], ...]:
    clicks = []
    for path, angle, weight in shape:
        theta = bank.angle_for(path)
        if theta is not None:
            clicks.append((path, weight * malus(theta - angle)))
    none = max(0.0, 1.0 - math.fsum(p for _, p in clicks))
    return tuple(clicks) + ((NO_CLICK, none),)


def outcome_distribution(state: PhotonState, bank: AnalyzerBank) -> dict[Outcome, float]:
    """Born-rule probabilities of a click on each analyzed path, or no click."""
    return dict(_distribution(state.shape, bank))


def sample_outcome(state: PhotonState, bank: AnalyzerBank, rng: np.random.Generator) -> Outcome:
    u = rng.random()
    acc = 0.0
    dist = _distribution(state.shape, bank)
    for outcome, p in dist:
        acc += p
        if u < acc:
            return outcome
    # u landed in the rounding sliver above the cumulative sum
    for outcome, p in reversed(dist):
        if p > 0.0:
            return outcome
    return NO_CLICK


def overlap_probability(state: PhotonState, expected: PhotonState) -> float:
    """|<expected|state>|^2 with both states taken coherently."""
    inner = 0j
    for e in expected.branches:
        for s in state.branches:
            if s.path != e.path:
                continue
            c = cos_deg(s.angle - e.angle)
            if c == 0.0:
                continue
            mag = e.weight if e.weight == s.weight else math.sqrt(e.weight * s.weight)
            inner += mag * c * cmath.exp(1j * (s.phase - e.phase))
    return min(1.0, max(0.0, abs(inner) ** 2))


# --- density matrices -------------------------------------------------------

BasisSpec = tuple[tuple[str, float], ...]


def standard_basis(paths: Iterable[str]) -> BasisSpec:
    """Horizontal/vertical basis vectors for each path, in the given order."""
    return tuple((p, a) for path in paths for p, a in ((path, 0.0), (path, 90.0)))


def _check_basis(basis: BasisSpec) -> dict[str, list[float]]:
    per_path: dict[str, list[float]] = {}
    for path, angle in basis:
        per_path.setdefault(path, []).append(normalize_angle(angle))
    for path, angles in per_path.items():
        if len(angles) != 2 or malus(angles[0] - angles[1]) != 0.0:
            raise BasisIncomplete(f"path {path!r} needs two orthogonal angles, got {angles}")
    return per_path


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    basis: BasisSpec
    matrix: np.ndarray

    def to_json(self) -> dict:
        return {
            "basis": [[p, a] for p, a in self.basis],
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }

    def is_valid(self, tol: float = NORM_TOL) -> bool:
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=tol, rtol=0):
            return False
        if abs(np.trace(m) - 1.0) > tol:
            return False
        return bool(np.linalg.eigvalsh(m).min() >= -tol)


def density_of(
    ensemble: Sequence[tuple[PhotonState, float]],
    basis: BasisSpec,
    incoherent_paths: bool = True,
) -> DensityMatrix:
    """Ensemble density matrix expressed in `basis`.

    With `incoherent_paths` the cross-path blocks are dropped, which is what
    averaging over the random relative phase of each photon produces.
    """
    weights = [w for _, w in ensemble]
    if not ensemble or min(weights) < 0.0 or abs(math.fsum(weights) - 1.0) > NORM_TOL:
        raise BadWeights(f"ensemble weights must be non-negative and sum to 1, got {weights}")
    per_path = _check_basis(basis)
    dim = len(basis)
    rho = np.zeros((dim, dim), dtype=complex)
    for state, pw in ensemble:
        for b in state.branches:
            if b.path not in per_path:
                raise BasisIncomplete(f"basis has no vectors for path {b.path!r}")
        for i, (pi, ai) in enumerate(basis):
            bi = next((b for b in state.branches if b.path == pi), None)
            if bi is None:
                continue
            for j, (pj, aj) in enumerate(basis):
                bj = next((b for b in state.branches if b.path == pj), None)
                if bj is None:
                    continue
                if pi == pj:
                    rho[i, j] += pw * bi.weight * cos_product(bi.angle - ai, bj.angle - aj)
                elif not incoherent_paths:
                    rho[i, j] += (
                        pw
                        * math.sqrt(bi.weight * bj.weight)
                        * cmath.exp(1j * (bi.phase - bj.phase))
                        * cos_deg(bi.angle - ai)
                        * cos_deg(bj.angle - aj)
                    )
    return DensityMatrix(tuple(basis), rho)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    if a.basis != b.basis:
        raise ValueError("density matrices are expressed in different bases")
    eig = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(0.5 * np.abs(eig).sum())


def distribution_to_json(dist: Mapping[Outcome, float]) -> dict[str, float]:
    return {("none" if k is None else k): float(v) for k, v in dist.items()}
