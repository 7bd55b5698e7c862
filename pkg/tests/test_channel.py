import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from otfsra.channel import (
    ETU,
    ChannelProfile,
    ChannelRealization,
    FrameScenario,
    PathTap,
    UtTransmission,
    conditional_poisson_pmf,
    draw_active_count,
    draw_etu_channel,
    draw_frame_scenario,
    draw_geometry,
    frame_stream,
    load_profile,
    pathloss_gain,
    ut_stream,
)
from otfsra.design import load_model
from otfsra.errors import InvalidParameter, ScenarioInfeasible
from otfsra.grid import OtfsGrid

MU_Q = math.pi * 2.24 * 0.01


def test_etu_profile():
    assert ETU.L == 9
    assert ETU.powers.sum() == pytest.approx(1.0, rel=1e-14)
    assert ETU.spread == pytest.approx(5e-6)
    ratio = ETU.powers[3] / ETU.powers[0]
    assert 10 * np.log10(ratio) == pytest.approx(1.0)


def test_load_profile(tmp_path):
    p = tmp_path / "p.txt"
    p.write_text("# two taps\n0, 0\n\n100 -3  # second\n")
    prof = load_profile(p)
    assert prof.L == 2
    assert prof.delays[1] == pytest.approx(100e-9)
    assert prof.powers[0] / prof.powers[1] == pytest.approx(10 ** 0.3)
    p.write_text("0 0 0\n")
    with pytest.raises(InvalidParameter):
        load_profile(p)
    with pytest.raises(InvalidParameter):
        ChannelProfile.from_db([100, 0], [0, 0])


def test_pathloss_reference_points():
    assert pathloss_gain(1500, 1500) == pytest.approx(1.0)
    assert pathloss_gain(100, 1500) == pytest.approx(3375.0)
    assert 10 * np.log10(pathloss_gain(100, 1500)) == pytest.approx(35.3, abs=0.05)  # quoted to one decimal


def test_geometry_median_of_squared_distance():
    rng = np.random.default_rng(11)
    d = np.array([draw_geometry(rng, 100, 1500)[0] for _ in range(40000)])
    assert np.all((d >= 100) & (d <= 1500))
    med = np.median(d**2)
    assert med == pytest.approx((100**2 + 1500**2) / 2, rel=0.02)


def test_geometry_rejects():
    with pytest.raises(InvalidParameter):
        draw_geometry(np.random.default_rng(0), 0, 10)
    with pytest.raises(InvalidParameter):
        draw_geometry(np.random.default_rng(0), 10, 10)


def test_etu_delays_at_1000_m():
    ch = draw_etu_channel(np.random.default_rng(0), 1000.0, 1.0, 0.0)
    assert ch.tau_first == pytest.approx(6.6667e-6, rel=1e-4)
    assert ch.tau_last == pytest.approx(11.6667e-6, rel=1e-4)
    assert np.all(ch.dopplers == 0)
    assert ch.L == 9


def test_etu_mean_power_matches_pathloss():
    rng = np.random.default_rng(5)
    beta = 7.5
    tot = np.array([np.sum(np.abs(draw_etu_channel(rng, 500, beta, 300).gains) ** 2) for _ in range(100_000)])
    assert tot.mean() == pytest.approx(beta, rel=0.02)


def test_etu_infeasible_on_grid():
    g = OtfsGrid(18, 96, 18 / 1.08e6)
    with pytest.raises(ScenarioInfeasible):
        draw_etu_channel(np.random.default_rng(0), 1800, 1.0, 0.0, grid=g)
    with pytest.raises(ScenarioInfeasible):
        draw_etu_channel(np.random.default_rng(0), 100, 1.0, 31e3, grid=g)


@given(st.integers(0, 2**32 - 1), st.floats(0, 2000), st.floats(100.0, 1499.0))
def test_channel_invariants(seed, nu_max, d):
    ch = draw_etu_channel(np.random.default_rng(seed), d, 1.0, nu_max)
    assert np.all(np.diff(ch.delays) >= 0)
    assert np.all(np.abs(ch.dopplers) <= nu_max)
    assert ch.tau_first == pytest.approx(2 * d / 3e8)


def test_doppler_symmetric():
    rng = np.random.default_rng(2)
    nu = np.concatenate([draw_etu_channel(rng, 500, 1, 300).dopplers for _ in range(20000)])
    # cos(theta) has variance 1/2
    assert abs(nu.mean()) < 4 * 300 * np.sqrt(0.5 / nu.size)


def test_realization_taps_roundtrip():
    taps = [PathTap(1j, 2e-6, 10.0), PathTap(0.5, 1e-6, -3.0)]
    ch = ChannelRealization.from_taps(taps, beta=2.0)
    assert [t.delay for t in ch.taps] == [1e-6, 2e-6]
    with pytest.raises(InvalidParameter):
        ChannelRealization(np.ones(2, complex), np.array([2e-6, 1e-6]), np.zeros(2))


def test_conditional_poisson_pmf():
    # e^-mu mu^2 / (2 (1 - e^-mu)) at mu_Q for lambda = 1, r_c = 1500 m
    assert conditional_poisson_pmf(2, MU_Q) == pytest.approx(0.0339623, rel=1e-5)
    assert conditional_poisson_pmf(0, MU_Q) == 0.0
    total = sum(conditional_poisson_pmf(k, 3.0) for k in range(1, 60))
    assert total == pytest.approx(1.0, rel=1e-12)
    assert conditional_poisson_pmf(1, 1e-9) == pytest.approx(1.0, rel=1e-8)


@pytest.mark.slow
def test_active_count_frequencies():
    rng = np.random.default_rng(17)
    n = 1_000_000
    q = np.array([draw_active_count(rng, MU_Q) for _ in range(n)])
    assert q.min() >= 1
    p2 = conditional_poisson_pmf(2, MU_Q)
    assert abs((q == 2).mean() - p2) <= 3 * np.sqrt(p2 * (1 - p2) / n)


def test_small_load_gives_single_ut():
    rng = np.random.default_rng(0)
    assert all(draw_active_count(rng, 1e-9) == 1 for _ in range(1000))


def test_two_uts_single_preamble_collide():
    rng = np.random.default_rng(0)
    load = load_model(50, 0.01, 1500, 100)  # mu_Q ~ 3.5
    for _ in range(50):
        sc = draw_frame_scenario(rng, load, 1)
        assert set(sc.preambles) == {0}
    assert FrameScenario((UtTransmission(draw_etu_channel(rng, 500, 1, 0), 0),) * 2).Q == 2
    with pytest.raises(InvalidParameter):
        FrameScenario(())


@pytest.mark.slow
def test_preamble_choice_uniform():
    rng = np.random.default_rng(23)
    prof = ChannelProfile.from_db([0], [0])
    R = 19
    counts = np.zeros(R, int)
    for _ in range(1_000_000):
        counts[draw_frame_scenario(rng, None, R, 0.0, profile=prof, r_a=100, r_c=1500).preambles[0]] += 1
    assert stats.chisquare(counts).pvalue > 0.01


def test_streams_are_order_independent():
    a = frame_stream(9, 5).standard_normal(4)
    frame_stream(9, 4).standard_normal(4)
    assert np.array_equal(a, frame_stream(9, 5).standard_normal(4))
    assert not np.array_equal(a, frame_stream(9, 6).standard_normal(4))
    assert not np.array_equal(ut_stream(9, 5, 0).standard_normal(4), a)


def test_frame_scenario_with_ut_streams_reproducible():
    load = load_model(4, 0.01, 1500, 100)

    def draw():
        return draw_frame_scenario(
            frame_stream(1, 3), load, 19, 300, ut_rng=lambda u: ut_stream(1, 3, u)
        )

    a, b = draw(), draw()
    assert a.preambles == b.preambles
    assert np.array_equal(a.uts[0].channel.gains, b.uts[0].channel.gains)


def test_single_ut_mode_needs_radii():
    with pytest.raises(InvalidParameter):
        draw_frame_scenario(np.random.default_rng(0), None, 4)
    with pytest.raises(InvalidParameter):
        draw_frame_scenario(np.random.default_rng(0), None, 0, r_a=1, r_c=2)
