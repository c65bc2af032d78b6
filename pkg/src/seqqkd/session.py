"""Bit-by-bit key distribution sessions with quantum authentication.

Each key bit runs one round:

1. Alice draws a random bit and sends the matching operating sequence.
2. Bob measures with random analyzer settings and recovers the bit.
3. Bob re-prepares a sequence from the shared pair and sends it back.
4. Alice checks every returned photon against the state she expects.
   A single failed check (by default) aborts the session for good.

Feedback photons are prepared with the canonical zero relative phase, the
phase reference both parties calibrated when they prepared the pair.
Alice's check is a projective test onto that reference state.

An eavesdropper can sit on the forward leg, the feedback leg, or both.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, NamedTuple, Optional, Sequence, Union

import numpy as np

from .codec import (
    ALPHABETS,
    BitDecision,
    VariantSpec,
    encode_bit,
    generate_pair,
    get_variant,
    measure_sequence,
    recover_bit,
    reduce_records,
    sequence_density,
)
from .errors import ConfigInvalid, LengthMismatch
from .photon import (
    DA0,
    DA1,
    PhotonState,
    malus,
    normalize_angle,
    outcome_distribution,
    overlap_probability,
    sample_outcome,
    single_path,
)
from .seeding import derive_seed


# --- eavesdropper -----------------------------------------------------------

@dataclass(frozen=True)
class EveStrategy:
    kind: str = "none"
    angle: Optional[float] = None

    NONE = "none"
    RANDOM_DA = "intercept-resend-random-da"
    FIXED_BASIS = "intercept-resend-fixed-basis"
    DISTINGUISH_DENSITY = "distinguish-density"

    @classmethod
    def random_da(cls) -> "EveStrategy":
        return cls(cls.RANDOM_DA)

    @classmethod
    def fixed_basis(cls, angle: float) -> "EveStrategy":
        return cls(cls.FIXED_BASIS, normalize_angle(angle))

    @classmethod
    def distinguish_density(cls, variant: Union[str, VariantSpec] = "V3") -> "EveStrategy":
        return cls(cls.DISTINGUISH_DENSITY, density_eigenbasis_angle(get_variant(variant)))

    @property
    def active(self) -> bool:
        return self.kind != self.NONE

    def describe(self) -> str:
        return self.kind if self.angle is None else f"{self.kind}:{self.angle:g}"

    @classmethod
    def parse(cls, text: str, variant: Union[str, VariantSpec] = "V1") -> "EveStrategy":
        """Parse CLI forms: none, random-da, fixed:<deg>, density."""
        key, _, arg = text.strip().lower().partition(":")
        if key in ("none", ""):
            return cls()
        if key in ("random-da", "random", cls.RANDOM_DA):
            return cls.random_da()
        if key in ("fixed", "fixed-basis", cls.FIXED_BASIS):
            if not arg:
                raise ConfigInvalid("fixed-basis strategy needs an angle, e.g. fixed:45")
            return cls.fixed_basis(float(arg))
        if key in ("density", cls.DISTINGUISH_DENSITY):
            return cls.distinguish_density(variant)
        raise ConfigInvalid(f"unknown eavesdropper strategy {text!r}")


NO_EVE = EveStrategy()


class EveNote(NamedTuple):
    """What Eve saw on one photon: the analyzer used and where it clicked.

    ``setting`` is a dual-analyzer name for the random-DA attack and the
    projection angle otherwise; ``outcome`` is a path label or None.
    """

    setting: Union[str, float]
    outcome: Optional[str]


def density_eigenbasis_angle(variant: VariantSpec) -> float:
    """Polarization angle of the positive eigenvector of rho0 - rho1.

    Only defined for single-path variants with unequal sequence mixtures.
    """
    if len(variant.paths) != 1:
        raise ConfigInvalid(f"density-distinguishing attack needs a single-path variant, not {variant.name}")
    diff = sequence_density(0, variant).matrix - sequence_density(1, variant).matrix
    vals, vecs = np.linalg.eigh(diff)
    if np.allclose(vals, 0.0, atol=1e-12):
        raise ConfigInvalid(f"{variant.name} sequences have equal density matrices; nothing to distinguish")
    v = vecs[:, int(np.argmax(vals))].real
    angle = math.degrees(math.atan2(v[1], v[0]))
    return normalize_angle(round(angle, 9))


def _project(photon: PhotonState, theta: float, rng: np.random.Generator) -> tuple[PhotonState, EveNote]:
    # Complete projective measurement in the per-path {theta, theta+90} basis.
    u = rng.random()
    acc = 0.0
    last = None
    for b in photon.branches:
        for angle in (theta, theta + 90.0):
            p = b.weight * malus(b.angle - angle)
            if p <= 0.0:
                continue
            last = (b.path, angle)
            acc += p
            if u < acc:
                return single_path(b.path, angle), EveNote(normalize_angle(angle), b.path)
    path, angle = last
    return single_path(path, angle), EveNote(normalize_angle(angle), path)


def eve_tap(
    photon: PhotonState,
    strategy: EveStrategy,
    rng: np.random.Generator,
) -> tuple[PhotonState, Optional[EveNote]]:
    """Intercept one photon and return what Eve resends plus her observation."""
    if not strategy.active:
        return photon, None
    if strategy.kind == EveStrategy.RANDOM_DA:
        bank = DA0 if rng.random() < 0.5 else DA1
        outcome = sample_outcome(photon, bank, rng)
        if outcome is not None:
            return single_path(outcome, bank.angle_for(outcome)), EveNote(bank.name, outcome)
        paths = bank.paths
        path = paths[int(rng.integers(0, len(paths)))]
        return single_path(path, bank.angle_for(path) + 90.0), EveNote(bank.name, None)
    if strategy.kind in (EveStrategy.FIXED_BASIS, EveStrategy.DISTINGUISH_DENSITY):
        return _project(photon, strategy.angle, rng)
    raise ConfigInvalid(f"unknown strategy {strategy.kind!r}")


def _note_likelihood(note: EveNote, state: PhotonState) -> float:
    if isinstance(note.setting, str):
        bank = DA0 if note.setting == DA0.name else DA1
        return outcome_distribution(state, bank).get(note.outcome, 0.0)
    for b in state.branches:
        if b.path == note.outcome:
            return b.weight * malus(b.angle - note.setting)
    return 0.0


def eve_guess_bits(
    eve_notes: Sequence[EveNote],
    variant: Union[str, VariantSpec],
    rng: Optional[np.random.Generator] = None,
) -> tuple[int, float]:
    """Maximum-likelihood bit guess from one sequence, without the shared pair.

    Every position is modelled as an equiprobable letter of the hypothesised
    alphabet.  Ties are broken by a coin from ``rng`` (bit 0 without one) and
    reported with confidence 0.5.
    """
    variant = get_variant(variant)
    loglik = []
    for alphabet in ALPHABETS:
        states = [variant.prepare(L) for L in alphabet]
        total = 0.0
        for note in eve_notes:
            p = sum(_note_likelihood(note, s) for s in states) / len(states)
            if p <= 0.0:
                total = -math.inf
                break
            total += math.log(p)
        loglik.append(total)
    l0, l1 = loglik
    if l0 == l1:
        guess = int(rng.integers(0, 2)) if rng is not None else 0
        return guess, 0.5
    guess = 0 if l0 > l1 else 1
    other, best = (l1, l0) if guess == 0 else (l0, l1)
    confidence = 1.0 if other == -math.inf else 1.0 / (1.0 + math.exp(other - best))
    return guess, confidence


# --- authentication ---------------------------------------------------------

def alice_verify_feedback(
    expected: Sequence[PhotonState],
    received: Sequence[PhotonState],
    rng: np.random.Generator,
) -> tuple[bool, int]:
    """Projective check of each returned photon onto the state Alice expects."""
    if len(expected) != len(received):
        raise LengthMismatch(f"expected {len(expected)} photons, received {len(received)}")
    failures = 0
    for e, r in zip(expected, received):
        p = overlap_probability(r, e)
        if p < 1.0 and rng.random() >= p:
            failures += 1
    return failures == 0, failures


# --- sessions ---------------------------------------------------------------

@dataclass(frozen=True)
class SessionConfig:
    n: int
    bits: int
    variant: str = "V1"
    eve: EveStrategy = NO_EVE
    seed: int = 0
    tap_forward: bool = True
    tap_feedback: bool = True
    feedback: str = "same"       # "same": return the recovered bit's sequence; "other": the complement
    failure_threshold: int = 0   # abort when a round has more failed checks than this

    def validate(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigInvalid(f"sequence length n must be >= 1, got {self.n!r}")
        if not isinstance(self.bits, (int, np.integer)) or self.bits < 1:
            raise ConfigInvalid(f"key length must be >= 1, got {self.bits!r}")
        if self.feedback not in ("same", "other"):
            raise ConfigInvalid(f"feedback must be 'same' or 'other', got {self.feedback!r}")
        if self.failure_threshold < 0:
            raise ConfigInvalid("failure threshold must be non-negative")
        try:
            v = get_variant(self.variant)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from None
        if v.positional:
            raise ConfigInvalid("the positional V0 channel has no shared secret; use v0_roundtrip")

    def to_json(self) -> dict:
        d = asdict(self)
        d["eve"] = self.eve.describe()
        return d


@dataclass(frozen=True)
class TranscriptEvent:
    kind: str
    index: int
    payload: tuple[tuple[str, Any], ...] = ()

    def to_json(self) -> dict:
        return {"event": self.kind, "index": self.index, **dict(self.payload)}

    def to_line(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


def _event(kind: str, index: int, **payload: Any) -> TranscriptEvent:
    return TranscriptEvent(kind, index, tuple(sorted(payload.items())))


@dataclass
class SessionStats:
    records: int = 0
    beta_records: int = 0
    beta_per_bit: list[dict[str, int]] = field(default_factory=list)
    bob_contradictions: int = 0
    bob_ambiguous: int = 0
    verified_photons: int = 0
    verification_failures: int = 0
    eve_guesses: int = 0
    eve_correct: int = 0


@dataclass
class SessionResult:
    agreed_key: list[int]
    aborted_at: Optional[int]
    abort_reason: Optional[str]
    sent_bits: list[int]
    bob_bits: list[Optional[int]]
    stats: SessionStats

    def to_json(self) -> dict:
        return {
            "agreed_key": "".join(map(str, self.agreed_key)),
            "aborted_at": self.aborted_at,
            "abort_reason": self.abort_reason,
            "stats": asdict(self.stats),
        }


def transcript_lines(events: Sequence[TranscriptEvent]) -> str:
    return "".join(ev.to_line() + "\n" for ev in events)


def run_session(config: SessionConfig) -> tuple[SessionResult, list[TranscriptEvent]]:
    config.validate()
    variant = get_variant(config.variant)
    rng = np.random.default_rng(config.seed)
    pair = generate_pair(config.n, rng)
    eve = config.eve
    stats = SessionStats()
    events: list[TranscriptEvent] = []
    key: list[int] = []
    sent: list[int] = []
    bob_bits: list[Optional[int]] = []
    aborted_at = reason = None

    for k in range(config.bits):
        bit = int(rng.integers(0, 2))
        sent.append(bit)
        events.append(_event("BitSent", k, bit=bit))
        photons = encode_bit(bit, pair, variant, rng)

        if eve.active and config.tap_forward:
            photons, notes = _tap_all(photons, eve, rng)
            events.append(_event("EveTapped", k, leg=1))
            guess, _ = eve_guess_bits(notes, variant, rng)
            stats.eve_guesses += 1
            stats.eve_correct += int(guess == bit)

        records = measure_sequence(photons, "random", rng, variant)
        reduced = reduce_records(records)
        stats.records += len(records)
        stats.beta_records += len(reduced)
        per_setting = {b.name: 0 for b in variant.settings}
        for rec in reduced:
            per_setting[rec.setting] += 1
        stats.beta_per_bit.append(per_setting)

        decision = recover_bit(records, pair, variant)
        bob_bits.append(decision.bit)
        events.append(_event("BitRecovered", k, decision=decision.value))
        if decision.bit is None:
            if decision is BitDecision.CONTRADICTION:
                stats.bob_contradictions += 1
            else:
                stats.bob_ambiguous += 1
            aborted_at, reason = k, f"bob-{decision.value}"
            events.append(_event("Aborted", k, reason=reason))
            break

        returned = decision.bit if config.feedback == "same" else 1 - decision.bit
        feedback = encode_bit(returned, pair, variant, coherent=True)
        events.append(_event("FeedbackSent", k))
        if eve.active and config.tap_feedback:
            feedback, _ = _tap_all(feedback, eve, rng)
            events.append(_event("EveTapped", k, leg=2))

        wanted = bit if config.feedback == "same" else 1 - bit
        expected = encode_bit(wanted, pair, variant, coherent=True)
        _, failures = alice_verify_feedback(expected, feedback, rng)
        ok = failures <= config.failure_threshold
        stats.verified_photons += len(expected)
        stats.verification_failures += failures
        events.append(_event("FeedbackVerified", k, failures=failures, passed=ok))
        if not ok:
            aborted_at, reason = k, "feedback-failure"
            events.append(_event("Aborted", k, reason=reason))
            break
        key.append(bit)

    result = SessionResult(key, aborted_at, reason, sent, bob_bits, stats)
    return result, events


def _tap_all(photons, eve, rng):
    resent, notes = [], []
    for ph in photons:
        out, note = eve_tap(ph, eve, rng)
        resent.append(out)
        notes.append(note)
    return resent, notes


# --- experiments ------------------------------------------------------------

def _trial(args: tuple[SessionConfig, int]) -> SessionResult:
    config, i = args
    result, _ = run_session(replace(config, seed=derive_seed(config.seed, i)))
    return result


def _mean_ci(values: Sequence[float]) -> dict[str, Optional[float]]:
    if not values:
        return {"mean": None, "ci95": None}
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    half = 1.96 * float(arr.std(ddof=1)) / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
    return {"mean": mean, "ci95": [mean - half, mean + half]}


def detection_experiment(config: SessionConfig, trials: int, workers: int = 1) -> dict[str, Any]:
    """Run independent seeded sessions and summarize aborts and disturbance.

    Trial ``i`` uses ``derive_seed(config.seed, i)`` so serial and pooled runs
    give identical numbers.
    """
    if trials < 1:
        raise ConfigInvalid("trials must be >= 1")
    config.validate()
    jobs = [(config, i) for i in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        results = [_trial(j) for j in jobs]

    abort_idx = [r.aborted_at for r in results if r.aborted_at is not None]
    verified = sum(r.stats.verified_photons for r in results)
    failures = sum(r.stats.verification_failures for r in results)
    guesses = sum(r.stats.eve_guesses for r in results)
    correct = sum(r.stats.eve_correct for r in results)
    agreed = [len(r.agreed_key) for r in results]
    return {
        "trials": trials,
        "aborts": len(abort_idx),
        "abort_rate": len(abort_idx) / trials,
        "abort_index": _mean_ci(abort_idx),
        "abort_reasons": _count(r.abort_reason for r in results if r.abort_reason),
        "aborted_by_index": {str(k): sum(1 for a in abort_idx if a <= k) / trials for k in range(6)},
        "verified_photons": verified,
        "verification_failures": failures,
        "verification_failure_rate": failures / verified if verified else None,
        "eve_guesses": guesses,
        "eve_accuracy": correct / guesses if guesses else None,
        "agreed_bits": _mean_ci(agreed),
    }


def _count(items) -> dict[str, int]:
    out: dict[str, int] = {}
    for it in items:
        out[it] = out.get(it, 0) + 1
    return dict(sorted(out.items()))


@dataclass
class InterceptionTally:
    bits: int = 0
    eve_correct: int = 0
    photons: int = 0
    failures: int = 0
    per_bit_failures: list[int] = field(default_factory=list)
    sent_bits: list[int] = field(default_factory=list)

    @property
    def eve_accuracy(self) -> float:
        return self.eve_correct / self.bits if self.bits else float("nan")

    @property
    def failure_rate(self) -> float:
        return self.failures / self.photons if self.photons else float("nan")


def interception_experiment(
    variant: Union[str, VariantSpec],
    strategy: EveStrategy,
    bits: int,
    n: int,
    rng: np.random.Generator,
    fixed_bit: Optional[int] = None,
) -> InterceptionTally:
    """Tap single sequences without a receiver in the loop.

    For each bit Eve taps a forward sequence (scored by her ML guess) and a
    clean feedback sequence that Alice then verifies (scored per photon).
    Every bit uses a fresh pair so letters are uniform across the run.
    """
    variant = get_variant(variant)
    tally = InterceptionTally()
    for _ in range(bits):
        pair = generate_pair(n, rng)
        bit = int(rng.integers(0, 2)) if fixed_bit is None else fixed_bit
        tally.sent_bits.append(bit)
        forward = encode_bit(bit, pair, variant, rng)
        _, notes = _tap_all(forward, strategy, rng)
        guess, _ = eve_guess_bits(notes, variant, rng)
        tally.bits += 1
        tally.eve_correct += int(guess == bit)

        clean = encode_bit(bit, pair, variant, coherent=True)
        tapped, _ = _tap_all(clean, strategy, rng)
        _, failures = alice_verify_feedback(clean, tapped, rng)
        tally.photons += n
        tally.failures += failures
        tally.per_bit_failures.append(failures)
    return tally
