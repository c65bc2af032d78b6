"""Channel taxonomy demos and security contrasts between sequence variants.

* Channel A: one photon per bit, orthogonal states.  Deterministic.
* Channel B: one photon per bit, nonorthogonal states.  Never reliable.
* V0: a public even/odd pattern of 0 and 45 degree photons.
* V1: the two-path superposition sequences (nonorthogonal, equal mixtures).
* V2: orthogonal letter pairs with equal mixtures.
* V3: nonorthogonal letter pairs with unequal mixtures.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .codec import (
    ALPHABETS,
    V0,
    BitDecision,
    ResultClass,
    VariantSpec,
    encode_bit,
    generate_pair,
    get_variant,
    measure_sequence,
    recover_bit,
    sequence_density,
)
from .photon import (
    AnalyzerBank,
    malus,
    normalize_angle,
    sample_outcome,
    single_path,
    trace_distance,
)
from .session import EveStrategy, interception_experiment

_EMPTY = AnalyzerBank("none")


def v0_roundtrip(n: int, bit: int, rng: np.random.Generator) -> BitDecision:
    """Send one bit over the public even/odd channel.

    The receiver puts a 0 deg analyzer on every even (1-indexed) position:
    all clicks means bit 0, anything else bit 1.
    """
    if n < 2:
        raise ValueError("the even/odd channel needs n >= 2")
    photons = encode_bit(bit, None, V0, n=n)
    analyzer = V0.settings[0]
    banks = [analyzer if (i + 1) % 2 == 0 else _EMPTY for i in range(n)]
    records = measure_sequence(photons, banks, rng, V0)
    all_yes = all(r.result is ResultClass.BETA for r in records if (r.position + 1) % 2 == 0)
    return BitDecision.ZERO if all_yes else BitDecision.ONE


def _single_photon_accuracy(angles: tuple[float, float], analyzer: float, trials: int, rng) -> float:
    bank = AnalyzerBank.of("a", r=analyzer)
    states = [single_path("r", a) for a in angles]
    c0, c1 = (malus(analyzer - a) for a in angles)
    on_click = 0 if c0 >= c1 else 1
    on_dark = 0 if (1 - c0) > (1 - c1) else 1
    if c0 == c1:
        on_dark = 1 - on_click
    bits = rng.integers(0, 2, size=trials)
    correct = 0
    for b in bits:
        clicked = sample_outcome(states[b], bank, rng) is not None
        correct += int((on_click if clicked else on_dark) == b)
    return correct / trials


def channel_a_demo(rng: np.random.Generator, trials: int = 10_000, analyzer: float = 0.0) -> float:
    """Bits as 0/90 deg photons read by one analyzer; returns the empirical accuracy."""
    return _single_photon_accuracy((0.0, 90.0), analyzer, trials, rng)


def channel_b_accuracy(analyzer: float, angles: tuple[float, float] = (0.0, 45.0)) -> float:
    """Exact success probability of the best click/no-click rule for one analyzer."""
    c0, c1 = (malus(analyzer - a) for a in angles)
    return 0.5 * (max(c0, c1) + max(1 - c0, 1 - c1))


def best_channel_b_analyzer(step: float = 0.5, angles: tuple[float, float] = (0.0, 45.0)) -> tuple[float, float]:
    """Grid sweep of the analyzer angle; returns (angle, accuracy) of the best one."""
    grid = np.arange(0.0, 180.0, step)
    scores = [channel_b_accuracy(float(a), angles) for a in grid]
    i = int(np.argmax(scores))
    return float(grid[i]), scores[i]


def channel_b_demo(
    rng: np.random.Generator,
    trials: int = 10_000,
    analyzer: Optional[float] = None,
    angles: tuple[float, float] = (0.0, 45.0),
) -> float:
    if analyzer is None:
        analyzer, _ = best_channel_b_analyzer(angles=angles)
    return _single_photon_accuracy(angles, analyzer, trials, rng)


@dataclass
class VariantReport:
    variant: str
    honest_accuracy: float
    eve_strategy: str
    eve_bit_accuracy: float
    disturbance: float
    rho_distance: float
    eve_alphabet_accuracy: Optional[float] = None
    lucky_disturbance: Optional[float] = None
    wrong_basis_disturbance: Optional[float] = None
    luck_probability: Optional[float] = None

    def to_json(self) -> dict:
        return asdict(self)


def _honest_accuracy(variant: VariantSpec, trials: int, n: int, rng) -> float:
    pair = generate_pair(n, rng)
    correct = 0
    for _ in range(trials):
        bit = int(rng.integers(0, 2))
        records = measure_sequence(encode_bit(bit, pair, variant, rng), "random", rng, variant)
        correct += int(recover_bit(records, pair, variant).bit == bit)
    return correct / trials


def default_strategy(variant: VariantSpec) -> EveStrategy:
    if variant.name == "V1":
        return EveStrategy.random_da()
    if variant.name == "V2":
        return EveStrategy.fixed_basis(0.0)
    if variant.name == "V3":
        return EveStrategy.distinguish_density(variant)
    raise ValueError(f"no security contrast defined for {variant.name}")


def _lucky(variant: VariantSpec, bit: int, angle: float) -> bool:
    basis = {normalize_angle(angle), normalize_angle(angle + 90.0)}
    return all(
        {b.angle for b in variant.prepare(L).branches} <= basis for L in ALPHABETS[bit]
    )


def variant_security_report(
    variant: Union[str, VariantSpec],
    trials: int,
    n: int = 64,
    rng: Optional[np.random.Generator] = None,
    strategy: Optional[EveStrategy] = None,
) -> VariantReport:
    """Honest accuracy, Eve's accuracy and her disturbance for one variant.

    ``trials`` sequences of ``n`` photons are used for each measurement.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    variant = get_variant(variant)
    rng = rng if rng is not None else np.random.default_rng(0)
    strategy = strategy or default_strategy(variant)
    honest = _honest_accuracy(variant, trials, n, rng)
    tally = interception_experiment(variant, strategy, trials, n, rng)
    rho = trace_distance(sequence_density(0, variant), sequence_density(1, variant))
    report = VariantReport(
        variant.name, honest, strategy.describe(), tally.eve_accuracy, tally.failure_rate, rho
    )
    if strategy.kind == EveStrategy.FIXED_BASIS:
        lucky = [_lucky(variant, b, strategy.angle) for b in tally.sent_bits]
        lf = sum(f for f, l in zip(tally.per_bit_failures, lucky) if l)
        wf = sum(f for f, l in zip(tally.per_bit_failures, lucky) if not l)
        nl = sum(lucky)
        report.lucky_disturbance = lf / (nl * n) if nl else None
        report.wrong_basis_disturbance = wf / ((len(lucky) - nl) * n) if nl < len(lucky) else None
        report.luck_probability = nl / len(lucky)
        # Eve's guess names an alphabet; whether she also knows the alphabet-to-bit map is moot here.
        report.eve_alphabet_accuracy = tally.eve_accuracy
    return report
