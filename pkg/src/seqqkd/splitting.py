"""Key splitting across receivers that each sit on one path of an m-way split.

Alice splits every photon equally over m paths and, per key bit, picks one
path to carry the letter's polarization; the rest carry a fixed horizontal
branch.  Each receiver owns one analyzer on its own path and runs the usual
contradiction tests.  The receiver on the carrying path recovers the bit;
everyone else sees clicks that are independent of the bit and ends up with a
contradiction, which doubles as the "not for me" signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional, Sequence

import numpy as np

from .codec import (
    ALPHABETS,
    LETTER_POLARIZATION,
    LETTERS,
    BitDecision,
    MeasurementRecord,
    OperatingSequencePair,
    VariantSpec,
    generate_pair,
    measure_sequence,
    recover_bit,
)
from .errors import BadPath, ConfigInvalid, ConflictingBits, MissingIndices
from .photon import (
    AnalyzerBank,
    DensityMatrix,
    PhotonState,
    density_of,
    equal_superposition,
    path_labels,
    randomize_relative_phase,
    standard_basis,
)
from .session import alice_verify_feedback

RECEIVER_ANGLES = (0.0, 45.0)


def prepare_split_letter(
    letter: str,
    m: int,
    carrying: str,
    rng: Optional[np.random.Generator] = None,
) -> PhotonState:
    paths = path_labels(m)
    if carrying not in paths:
        raise BadPath(f"carrying path {carrying!r} not among {paths}")
    if letter not in LETTER_POLARIZATION:
        raise ValueError(f"unknown letter {letter!r}")
    state = _canonical(letter, m, carrying)
    return randomize_relative_phase(state, rng) if rng is not None else state


@lru_cache(maxsize=None)
def _canonical(letter: str, m: int, carrying: str) -> PhotonState:
    return equal_superposition(
        (p, LETTER_POLARIZATION[letter] if p == carrying else 0.0) for p in path_labels(m)
    )


@lru_cache(maxsize=None)
def split_variant(m: int, carrying: str) -> VariantSpec:
    return VariantSpec(
        f"V1-split({m},{carrying})",
        {L: _canonical(L, m, carrying) for L in LETTERS},
        (),
        carrying=carrying,
    )


@lru_cache(maxsize=None)
def receiver_variant(m: int, path: str) -> VariantSpec:
    """The view of a receiver with one analyzer (0 or 45 deg) on ``path``.

    Letter states are those that would arrive if ``path`` were carrying, so
    the forbidden letters come out as {B} for 0 deg and {D} for 45 deg.
    """
    if path not in path_labels(m):
        raise BadPath(f"path {path!r} not among {path_labels(m)}")
    return VariantSpec(
        f"receiver({m},{path})",
        {L: _canonical(L, m, path) for L in LETTERS},
        tuple(AnalyzerBank.of(f"{a:g}", **{path: a}) for a in RECEIVER_ANGLES),
        carrying=path,
    )


def receiver_measure(
    photons: Sequence[PhotonState], path: str, m: int, rng: np.random.Generator
) -> list[MeasurementRecord]:
    return measure_sequence(photons, "random", rng, receiver_variant(m, path))


def receiver_measure_and_recover(
    photons: Sequence[PhotonState],
    path: str,
    pair: OperatingSequencePair,
    rng: np.random.Generator,
    m: int,
) -> BitDecision:
    variant = receiver_variant(m, path)
    return recover_bit(measure_sequence(photons, "random", rng, variant), pair, variant)


def split_densities(m: int, carrying: Optional[str] = None) -> tuple[DensityMatrix, DensityMatrix]:
    """Incoherent-path density matrices of the S0 and S1 ensembles."""
    paths = path_labels(m)
    carrying = carrying or paths[-1]
    basis = standard_basis(paths)
    return tuple(
        density_of([(_canonical(L, m, carrying), 0.5) for L in ALPHABETS[bit]], basis)
        for bit in (0, 1)
    )


def four_letter_density(m: int, carrying: Optional[str] = None) -> DensityMatrix:
    paths = path_labels(m)
    carrying = carrying or paths[-1]
    return density_of([(_canonical(L, m, carrying), 0.25) for L in LETTERS], standard_basis(paths))


@dataclass(frozen=True)
class SplitConfig:
    m: int
    n: int
    bits: int
    seed: int = 0
    schedule: Optional[tuple[str, ...]] = None  # fixed carrying path per bit; None draws uniformly
    authenticate: bool = True

    def validate(self) -> None:
        if self.m < 2:
            raise ConfigInvalid("key splitting needs at least two paths")
        if self.n < 1 or self.bits < 1:
            raise ConfigInvalid("n and the number of bits must be >= 1")
        if self.schedule is not None:
            if len(self.schedule) != self.bits:
                raise ConfigInvalid("schedule must name one path per bit")
            bad = set(self.schedule) - set(path_labels(self.m))
            if bad:
                raise ConfigInvalid(f"schedule uses unknown paths {sorted(bad)}")


@dataclass
class SplitResult:
    partials: dict[str, dict[int, int]]
    alice_key: list[int]
    schedule: list[str]
    decisions: dict[str, list[str]] = field(default_factory=dict)
    aborted_at: Optional[int] = None
    verification_failures: int = 0


def run_split_session(config: SplitConfig) -> SplitResult:
    """Distribute ``bits`` key bits; each receiver keeps the bits it decodes.

    Every receiver that decodes a bit answers with a sequence carried on its
    own path, and Alice checks it against the sequence she sent.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    paths = path_labels(config.m)
    pair = generate_pair(config.n, rng)
    result = SplitResult({p: {} for p in paths}, [], [], {p: [] for p in paths})

    for k in range(config.bits):
        bit = int(rng.integers(0, 2))
        if config.schedule is not None:
            carrying = config.schedule[k]
        else:
            carrying = paths[int(rng.integers(0, config.m))]
        result.alice_key.append(bit)
        result.schedule.append(carrying)
        letters = pair.sequence(bit)
        photons = [prepare_split_letter(L, config.m, carrying, rng) for L in letters]

        answered = []
        for p in paths:
            decision = receiver_measure_and_recover(photons, p, pair, rng, config.m)
            result.decisions[p].append(decision.value)
            if decision.bit is not None:
                result.partials[p][k] = decision.bit
                answered.append((p, decision.bit))

        if config.authenticate:
            expected = [_canonical(L, config.m, carrying) for L in letters]
            for p, b in answered:
                returned = [_canonical(L, config.m, p) for L in pair.sequence(b)]
                _, failures = alice_verify_feedback(expected, returned, rng)
                result.verification_failures += failures
            if result.verification_failures:
                result.aborted_at = k
                break
    return result


def merge(partials: Mapping[str, Mapping[int, int]], n_bits: int) -> list[int]:
    """Cooperative reconstruction of the full key from every receiver's share."""
    key: dict[int, int] = {}
    conflicts = set()
    for share in partials.values():
        for idx, bit in share.items():
            idx = int(idx)
            if idx in key and key[idx] != int(bit):
                conflicts.add(idx)
            key[idx] = int(bit)
    if conflicts:
        raise ConflictingBits(conflicts)
    missing = [i for i in range(n_bits) if i not in key]
    if missing:
        raise MissingIndices(missing)
    return [key[i] for i in range(n_bits)]
