"""Operating sequences, bit encoding, receiver measurement and bit recovery.

A bit is sent as a whole sequence of n photons.  Sender and receiver share
two letter strings: ``s0`` over {A, B} for bit 0 and ``s1`` over {C, D} for
bit 1.  The receiver measures each photon with a randomly chosen analyzer
setting, keeps only the conclusive clicks on the bit-carrying path and then
tests both hypotheses: a hypothesis is refuted as soon as a conclusive click
lands on a position whose hypothesised letter can never click under the
setting that was used.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import PolicyLengthMismatch, UnknownLetter
from .photon import (
    DA0,
    DA1,
    AnalyzerBank,
    DensityMatrix,
    Outcome,
    PhotonState,
    density_of,
    equal_superposition,
    outcome_distribution,
    randomize_relative_phase,
    sample_outcome,
    single_path,
    standard_basis,
)

LETTERS = ("A", "B", "C", "D")
ALPHABETS = (("A", "B"), ("C", "D"))
LETTER_POLARIZATION = {"A": 0.0, "B": 90.0, "C": 45.0, "D": 135.0}


class ResultClass(str, enum.Enum):
    ALPHA = "alpha"  # click on a path that carries no bit
    BETA = "beta"    # click on the bit-carrying path
    GAMMA = "gamma"  # no click


class BitDecision(str, enum.Enum):
    ZERO = "zero"
    ONE = "one"
    AMBIGUOUS = "ambiguous"
    CONTRADICTION = "contradiction"

    @property
    def bit(self) -> Optional[int]:
        return {"zero": 0, "one": 1}.get(self.value)

    @classmethod
    def from_bit(cls, bit: int) -> "BitDecision":
        return cls.ZERO if bit == 0 else cls.ONE


class MeasurementRecord(NamedTuple):
    position: int
    setting: str
    result: ResultClass


@dataclass(frozen=True)
class OperatingSequencePair:
    s0: str
    s1: str

    def __post_init__(self):
        if len(self.s0) != len(self.s1):
            raise ValueError("operating sequences must have equal length")
        for seq, alphabet in zip((self.s0, self.s1), ALPHABETS):
            bad = set(seq) - set(alphabet)
            if bad:
                raise UnknownLetter(f"letters {sorted(bad)} not in alphabet {alphabet}")

    @property
    def n(self) -> int:
        return len(self.s0)

    def sequence(self, bit: int) -> str:
        return self.s1 if bit else self.s0

    def to_text(self) -> str:
        return f"{self.s0}\n{self.s1}\n"

    @classmethod
    def from_text(cls, text: str) -> "OperatingSequencePair":
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if len(lines) != 2:
            raise ValueError("expected two lines of letters")
        return cls(lines[0], lines[1])


def generate_pair(n: int, rng: np.random.Generator) -> OperatingSequencePair:
    """Independent fair coin per position for each of the two sequences."""
    if n < 1:
        raise ValueError("sequence length must be positive")
    coins = rng.integers(0, 2, size=(2, n))
    s0 = "".join("AB"[c] for c in coins[0])
    s1 = "".join("CD"[c] for c in coins[1])
    return OperatingSequencePair(s0, s1)


def regular_pair(n: int) -> OperatingSequencePair:
    """Illustrative pair with A at even and C at odd positions (1-indexed)."""
    s0 = "".join("A" if (i + 1) % 2 == 0 else "B" for i in range(n))
    s1 = "".join("C" if (i + 1) % 2 == 1 else "D" for i in range(n))
    return OperatingSequencePair(s0, s1)


@dataclass(frozen=True, eq=False)
class VariantSpec:
    """How letters become photons and which analyzer settings a receiver owns.

    ``carrying`` is the path whose clicks count as conclusive.  A
    ``positional`` variant ignores the shared pair and encodes by position
    parity instead.
    """

    name: str
    preparations: Mapping[str, PhotonState]
    settings: tuple[AnalyzerBank, ...]
    carrying: str
    positional: bool = False
    notes: str = field(default="", compare=False)

    def prepare(self, letter: str) -> PhotonState:
        try:
            return self.preparations[letter]
        except KeyError:
            raise UnknownLetter(f"variant {self.name} has no preparation for {letter!r}") from None

    def setting(self, name: str) -> AnalyzerBank:
        for bank in self.settings:
            if bank.name == name:
                return bank
        raise KeyError(name)

    def classify(self, outcome: Outcome) -> ResultClass:
        if outcome is None:
            return ResultClass.GAMMA
        return ResultClass.BETA if outcome == self.carrying else ResultClass.ALPHA

    @property
    def paths(self) -> tuple[str, ...]:
        seen: list[str] = []
        for state in self.preparations.values():
            for p in state.paths:
                if p not in seen:
                    seen.append(p)
        return tuple(seen)

    def letters_for(self, bit: int, pair: Optional[OperatingSequencePair], n: Optional[int] = None) -> str:
        if self.positional:
            if n is None:
                n = pair.n if pair is not None else 0
            return v0_pair(n).sequence(bit)
        if pair is None:
            raise ValueError(f"variant {self.name} needs an operating sequence pair")
        return pair.sequence(bit)


def _single_path_analyzers(path: str, angles: Sequence[float]) -> tuple[AnalyzerBank, ...]:
    return tuple(AnalyzerBank.of(f"{a:g}", **{path: a}) for a in angles)


V1 = VariantSpec(
    "V1",
    {L: equal_superposition([("r", 0.0), ("s", LETTER_POLARIZATION[L])]) for L in LETTERS},
    (DA0, DA1),
    carrying="s",
    notes="two-path superposition; nonorthogonal letters, equal density matrices",
)

# Orthogonal pairs: S0 from {0, 90}, S1 from {45, 135}.
V2 = VariantSpec(
    "V2",
    {"A": single_path("r", 0.0), "B": single_path("r", 90.0),
     "C": single_path("r", 45.0), "D": single_path("r", 135.0)},
    _single_path_analyzers("r", (0.0, 45.0, 90.0, 135.0)),
    carrying="r",
    notes="orthogonal letter pairs; equal density matrices",
)

# Nonorthogonal pairs with unequal mixtures: S0 from {0, 45}, S1 from {90, 135}.
V3 = VariantSpec(
    "V3",
    {"A": single_path("r", 0.0), "B": single_path("r", 45.0),
     "C": single_path("r", 90.0), "D": single_path("r", 135.0)},
    _single_path_analyzers("r", (0.0, 45.0, 90.0, 135.0)),
    carrying="r",
    notes="nonorthogonal letters; unequal density matrices",
)

# Bit 0: 0 deg photons at even positions and 45 deg at odd (1-indexed); bit 1 swapped.
V0 = VariantSpec(
    "V0",
    {"A": single_path("r", 0.0), "B": single_path("r", 45.0),
     "C": single_path("r", 45.0), "D": single_path("r", 0.0)},
    _single_path_analyzers("r", (0.0,)),
    carrying="r",
    positional=True,
    notes="public even/odd sequence channel",
)

VARIANTS = {v.name: v for v in (V0, V1, V2, V3)}


def get_variant(name: Union[str, VariantSpec]) -> VariantSpec:
    if isinstance(name, VariantSpec):
        return name
    try:
        return VARIANTS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}") from None


def v0_pair(n: int) -> OperatingSequencePair:
    s0 = "".join("A" if (i + 1) % 2 == 0 else "B" for i in range(n))
    s1 = "".join("C" if (i + 1) % 2 == 0 else "D" for i in range(n))
    return OperatingSequencePair(s0, s1)


def encode_bit(
    bit: int,
    pair: Optional[OperatingSequencePair],
    variant: VariantSpec = V1,
    rng: Optional[np.random.Generator] = None,
    coherent: bool = False,
    n: Optional[int] = None,
) -> list[PhotonState]:
    """Photon train for one bit.

    Unless ``coherent`` is set every multi-path photon gets an independent
    random relative phase, modelling incoherent source photons.
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    letters = variant.letters_for(bit, pair, n)
    states = [variant.prepare(L) for L in letters]
    if coherent or all(len(s.branches) == 1 for s in states):
        return states
    if rng is None:
        raise ValueError("phase randomization needs an rng")
    return [randomize_relative_phase(s, rng) if len(s.branches) > 1 else s for s in states]


Policy = Union[str, Sequence[AnalyzerBank]]


def measure_sequence(
    photons: Sequence[PhotonState],
    policy: Policy = "random",
    rng: Optional[np.random.Generator] = None,
    variant: VariantSpec = V1,
) -> list[MeasurementRecord]:
    """Measure every photon; ``policy`` is "random" or one analyzer bank per photon."""
    if rng is None:
        raise ValueError("measurement needs an rng")
    if isinstance(policy, str):
        if policy != "random":
            raise ValueError(f"unknown policy {policy!r}")
        k = len(variant.settings)
        picks = rng.integers(0, k, size=len(photons)) if k > 1 else [0] * len(photons)
        banks = [variant.settings[i] for i in picks]
    else:
        banks = list(policy)
        if len(banks) != len(photons):
            raise PolicyLengthMismatch(f"{len(banks)} analyzer banks for {len(photons)} photons")
    return [
        MeasurementRecord(i, bank.name, variant.classify(sample_outcome(ph, bank, rng)))
        for i, (ph, bank) in enumerate(zip(photons, banks))
    ]


def reduce_records(records: Sequence[MeasurementRecord]) -> list[MeasurementRecord]:
    """Keep only the conclusive (beta) records."""
    return [r for r in records if r.result is ResultClass.BETA]


@lru_cache(maxsize=256)
def _forbidden(variant: VariantSpec, setting: str) -> frozenset[str]:
    bank = variant.setting(setting)
    return frozenset(
        L for L in sorted(variant.preparations)
        if outcome_distribution(variant.prepare(L), bank).get(variant.carrying, 0.0) == 0.0
    )


def forbidden_letters(setting: Union[str, AnalyzerBank], variant: VariantSpec = V1) -> frozenset[str]:
    """Letters that can never give a conclusive click under ``setting``."""
    name = setting.name if isinstance(setting, AnalyzerBank) else setting
    return _forbidden(variant, name)


def contradictions_by_setting(
    reduced: Sequence[MeasurementRecord],
    hypothesis: int,
    pair: OperatingSequencePair,
    variant: VariantSpec = V1,
) -> dict[str, int]:
    letters = variant.letters_for(hypothesis, pair)
    counts = {bank.name: 0 for bank in variant.settings}
    for rec in reduced:
        if rec.result is not ResultClass.BETA:
            continue
        if letters[rec.position] in forbidden_letters(rec.setting, variant):
            counts[rec.setting] = counts.get(rec.setting, 0) + 1
    return counts


def correlation_test(
    reduced: Sequence[MeasurementRecord],
    hypothesis: int,
    pair: OperatingSequencePair,
    variant: VariantSpec = V1,
) -> tuple[bool, int]:
    """(consistent, contradiction count) of one hypothesis over all settings."""
    total = sum(contradictions_by_setting(reduced, hypothesis, pair, variant).values())
    return total == 0, total


def recover_bit(
    records: Sequence[MeasurementRecord],
    pair: Optional[OperatingSequencePair],
    variant: VariantSpec = V1,
) -> BitDecision:
    reduced = reduce_records(records)
    if variant.positional:
        n = (max(r.position for r in records) + 1) if records else 0
        pair = v0_pair(n)
    ok0, _ = correlation_test(reduced, 0, pair, variant)
    ok1, _ = correlation_test(reduced, 1, pair, variant)
    if ok0 and ok1:
        return BitDecision.AMBIGUOUS
    if ok0:
        return BitDecision.ZERO
    if ok1:
        return BitDecision.ONE
    return BitDecision.CONTRADICTION


def table_joint_probabilities(
    setting: Union[str, AnalyzerBank], variant: VariantSpec = V1
) -> dict[str, tuple[float, float, float]]:
    """Joint (alpha, beta, gamma) probabilities per letter, each letter weighted 1/2."""
    bank = setting if isinstance(setting, AnalyzerBank) else variant.setting(setting)
    table = {}
    for L in LETTERS:
        probs = {c: 0.0 for c in ResultClass}
        for outcome, p in outcome_distribution(variant.prepare(L), bank).items():
            probs[variant.classify(outcome)] += p
        table[L] = tuple(0.5 * probs[c] for c in ResultClass)
    return table


def sequence_density(bit: int, variant: VariantSpec = V1, incoherent_paths: bool = True) -> DensityMatrix:
    """Density matrix of a random sequence for ``bit`` (letters equiprobable)."""
    letters = ALPHABETS[bit]
    ensemble = [(variant.prepare(L), 1.0 / len(letters)) for L in letters]
    return density_of(ensemble, standard_basis(variant.paths), incoherent_paths)
