"""Reference computations that share no code with seqqkd.

States are explicit numpy vectors over (path, H/V) pairs and all
probabilities come from projectors.  Everything the protocol needs is then
obtained by brute-force enumeration of letters, settings and outcomes.
"""

from fractions import Fraction
from itertools import product
from math import comb

import numpy as np

POL = {"A": 0.0, "B": 90.0, "C": 45.0, "D": 135.0}
DA = {"DA0": {"r": 0.0, "s": 0.0}, "DA1": {"r": 0.0, "s": 45.0}}


def basis_index(paths):
    return {(p, k): 2 * i + k for i, p in enumerate(paths) for k in (0, 1)}


def ket(paths, branches):
    """branches: {path: (angle_deg, amplitude)}"""
    idx = basis_index(paths)
    v = np.zeros(2 * len(paths), dtype=complex)
    for p, (ang, amp) in branches.items():
        t = np.radians(ang)
        v[idx[(p, 0)]] += amp * np.cos(t)
        v[idx[(p, 1)]] += amp * np.sin(t)
    return v


def pol_ket(paths, path, angle):
    return ket(paths, {path: (angle, 1.0)})


def letter_ket(letter, paths=("r", "s"), carrying="s", phases=None):
    m = len(paths)
    phases = phases or {}
    return ket(paths, {
        p: (POL[letter] if p == carrying else 0.0, np.exp(1j * phases.get(p, 0.0)) / np.sqrt(m))
        for p in paths
    })


def click_prob(psi, paths, path, angle):
    e = pol_ket(paths, path, angle)
    return float(abs(np.vdot(e, psi)) ** 2)


def analyzer_outcomes(psi, paths, bank):
    """Outcome -> probability for per-path analyzers (None = no click)."""
    out = {p: click_prob(psi, paths, p, a) for p, a in bank.items()}
    out[None] = 1.0 - sum(out.values())
    return out


def fidelity(a, b):
    return float(abs(np.vdot(a, b)) ** 2)


def table_oracle(setting):
    """Half-weighted (alpha, beta, gamma) per letter."""
    paths = ("r", "s")
    rows = {}
    for L in "ABCD":
        d = analyzer_outcomes(letter_ket(L), paths, DA[setting])
        rows[L] = (0.5 * d["r"], 0.5 * d["s"], 0.5 * d[None])
    return rows


def random_da_feedback_failure():
    """Per-photon failure probability of Alice's check after a random-DA intercept-resend.

    Expected letter uniform over A-D; the resend rule on no-click picks one
    of the two analyzed paths uniformly with the orthogonal polarization.
    """
    paths = ("r", "s")
    total = 0.0
    for L in "ABCD":
        expected = letter_ket(L)
        for bank in DA.values():
            for outcome, p in analyzer_outcomes(expected, paths, bank).items():
                if p <= 0:
                    continue
                if outcome is None:
                    fail = np.mean([
                        1 - fidelity(pol_ket(paths, q, bank[q] + 90.0), expected) for q in paths
                    ])
                else:
                    fail = 1 - fidelity(pol_ket(paths, outcome, bank[outcome]), expected)
                total += 0.25 * 0.5 * p * fail
    return total


def projective_failure(letter_angles, eve_angle):
    """Failure probability of Alice's check when Eve projects single-path photons
    onto {eve_angle, eve_angle + 90} and resends the result.  Letters equiprobable."""
    paths = ("r",)
    total = 0.0
    for a in letter_angles:
        psi = pol_ket(paths, "r", a)
        for b in (eve_angle, eve_angle + 90.0):
            e = pol_ket(paths, "r", b)
            p = fidelity(e, psi)
            total += p * (1 - fidelity(e, psi)) / len(letter_angles)
    return total


def majority_accuracy(p_correct, n):
    """Accuracy of an ML vote over n i.i.d. photons each pointing the right way
    with probability p_correct, by enumeration of all 2**n outcome strings."""
    acc = 0.0
    for outcome in product((0, 1), repeat=n):
        k = sum(outcome)
        prob = p_correct ** k * (1 - p_correct) ** (n - k)
        if 2 * k > n:
            acc += prob
        elif 2 * k == n:
            acc += 0.5 * prob
    return acc


def majority_accuracy_closed(p, n):
    s = sum(comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1) if 2 * k > n)
    if n % 2 == 0:
        s += 0.5 * comb(n, n // 2) * (p * (1 - p)) ** (n // 2)
    return s


# Exact rational Born weights for the protocol angles.
_COS2 = {0: Fraction(1), 45: Fraction(1, 2), 90: Fraction(0), 135: Fraction(1, 2)}


def cos2(delta):
    return _COS2[int(delta) % 180]


def beta_prob_exact(letter, setting):
    # weight 1/2 on the s branch times Malus factor
    return Fraction(1, 2) * cos2(DA[setting]["s"] - POL[letter])


def falsification_per_beta(true_bit, n=4):
    """P(a beta record refutes the wrong hypothesis | beta), by enumerating every
    (true letters, wrong letters, settings, outcome) configuration over n positions."""
    alph = ("AB", "CD")
    forbidden = {"DA0": "B", "DA1": "D"}
    beta_total = Fraction(0)
    contra_total = Fraction(0)
    for true_letters in product(alph[true_bit], repeat=n):
        for wrong_letters in product(alph[1 - true_bit], repeat=n):
            for settings in product(("DA0", "DA1"), repeat=n):
                w = Fraction(1, 2 ** (3 * n))
                for t, x, s in zip(true_letters, wrong_letters, settings):
                    pb = beta_prob_exact(t, s)
                    beta_total += w * pb
                    if x == forbidden[s]:
                        contra_total += w * pb
    return contra_total / beta_total, beta_total / n


def binom_cdf(k, n, p):
    return sum(comb(n, i) * p**i * (1 - p) ** (n - i) for i in range(k + 1))


def binom_upper(k, n, conf=0.95):
    """One-sided Clopper-Pearson upper limit for k successes in n trials."""
    if k >= n:
        return 1.0
    lo, hi = k / n, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if binom_cdf(k, n, mid) > 1 - conf:
            lo = mid
        else:
            hi = mid
    return hi
