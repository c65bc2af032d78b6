import math

import numpy as np
import pytest

from seqqkd.codec import BitDecision, generate_pair
from seqqkd.errors import BadPath, ConfigInvalid, ConflictingBits, MissingIndices
from seqqkd.photon import AnalyzerBank, outcome_distribution, path_labels, trace_distance
from seqqkd.splitting import (
    SplitConfig,
    four_letter_density,
    merge,
    prepare_split_letter,
    receiver_measure_and_recover,
    run_split_session,
    split_densities,
)


def test_prepare_split_letter_shape():
    st = prepare_split_letter("D", 3, "t")
    assert [(b.path, b.angle) for b in st.branches] == [("r", 0.0), ("s", 0.0), ("t", 135.0)]
    assert all(b.weight == pytest.approx(1 / 3, abs=1e-15) for b in st.branches)


def test_prepare_split_letter_random_phase():
    st = prepare_split_letter("B", 2, "r", np.random.default_rng(0))
    assert [b.angle for b in st.branches] == [90.0, 0.0]


def test_prepare_split_letter_errors():
    with pytest.raises(BadPath):
        prepare_split_letter("A", 2, "t")
    with pytest.raises(ValueError):
        prepare_split_letter("Q", 2, "r")


def _photons(bit, m, carrying, n=400, seed=0):
    rng = np.random.default_rng(seed)
    pair = generate_pair(n, rng)
    return pair, [prepare_split_letter(L, m, carrying, rng) for L in pair.sequence(bit)], rng


@pytest.mark.parametrize("m", [2, 3, 4])
def test_carrying_receiver_decodes(m):
    carrying = path_labels(m)[-1]
    for bit in (0, 1):
        pair, photons, rng = _photons(bit, m, carrying, n=200 * m, seed=m + bit)
        assert receiver_measure_and_recover(photons, carrying, pair, rng, m) is BitDecision.from_bit(bit)


@pytest.mark.parametrize("m", [2, 3])
def test_non_carrying_receiver_contradicts(m):
    paths = path_labels(m)
    pair, photons, rng = _photons(0, m, paths[-1], n=200 * m, seed=9)
    for p in paths[:-1]:
        assert receiver_measure_and_recover(photons, p, pair, rng, m) is BitDecision.CONTRADICTION


@pytest.mark.parametrize("m", [2, 3, 5])
def test_non_carrying_view_is_blind(m):
    # click statistics on a non-carrying path do not depend on letter or carrier
    paths = path_labels(m)
    for p in paths:
        for a in (0.0, 45.0):
            bank = AnalyzerBank.of(**{p: a})
            seen = {
                tuple(sorted(outcome_distribution(prepare_split_letter(L, m, c), bank).items(), key=str))
                for c in paths if c != p for L in "ABCD"
            }
            assert len(seen) == 1


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_split_densities_equal(m):
    rho0, rho1 = split_densities(m)
    assert np.abs(rho0.matrix - rho1.matrix).max() <= 1e-12
    assert trace_distance(rho0, rho1) == 0.0
    full = four_letter_density(m).matrix
    assert np.allclose(full, rho0.matrix, atol=1e-12, rtol=0)


def test_split_density_three_paths_value():
    rho0, _ = split_densities(3)
    assert np.allclose(rho0.matrix, np.diag([2, 0, 2, 0, 1, 1]) / 6, atol=1e-12, rtol=0)


def test_split_session_shares():
    result = run_split_session(SplitConfig(m=3, n=200, bits=60, seed=1))
    assert result.aborted_at is None and result.verification_failures == 0
    for p, share in result.partials.items():
        assert set(share) == {k for k, c in enumerate(result.schedule) if c == p}
        assert all(result.alice_key[k] == b for k, b in share.items())
    assert merge(result.partials, 60) == result.alice_key


def test_split_share_fraction_m3():
    result = run_split_session(SplitConfig(m=3, n=120, bits=600, seed=2))
    n = len(result.alice_key)
    for share in result.partials.values():
        assert abs(len(share) - n / 3) < 3 * math.sqrt(n * (1 / 3) * (2 / 3))


def test_fixed_schedule_starves_other_receivers():
    result = run_split_session(SplitConfig(m=2, n=200, bits=10, seed=3, schedule=("s",) * 10))
    assert len(result.partials["s"]) == 10
    assert result.partials["r"] == {}


def test_split_config_errors():
    for cfg in (SplitConfig(m=1, n=10, bits=1), SplitConfig(m=2, n=0, bits=1),
                SplitConfig(m=2, n=10, bits=2, schedule=("r",)), SplitConfig(m=2, n=10, bits=1, schedule=("z",))):
        with pytest.raises(ConfigInvalid):
            run_split_session(cfg)


def test_merge_success_and_string_indices():
    assert merge({"r": {0: 1, 2: 0}, "s": {"1": 1}}, 3) == [1, 1, 0]


def test_merge_missing():
    with pytest.raises(MissingIndices) as info:
        merge({"r": {0: 1}, "s": {}}, 3)
    assert info.value.missing == [1, 2]


def test_merge_conflict():
    with pytest.raises(ConflictingBits):
        merge({"r": {0: 1}, "s": {0: 0}}, 1)
