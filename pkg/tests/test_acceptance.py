"""End-to-end acceptance gate. Each test records one PASS/FAIL line that is
echoed in the terminal summary."""

import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from otfsra.analysis import collision_lower_bound
from otfsra.channel import ChannelRealization, FrameScenario, PathTap, UtTransmission
from otfsra.cli import main
from otfsra.design import SystemBudget, derive_grid, load_model, min_doppler_width, policy_width
from otfsra.detector import analytic_threshold, empirical_false_alarm_rate, noise_dd_frames
from otfsra.grid import DdIndex, OtfsGrid, build_allocation
from otfsra.receiver import (
    WINDOW_KINDS,
    analytic_dd_response,
    doppler_leakage_profile,
    make_window,
    receive_dd,
    sidelobe_level_db,
)
from otfsra.simharness import ScenarioConfig, reference_budget, run_tep
from otfsra.waveform import TimeWaveformSpec, papr

GRID = OtfsGrid(18, 96, 18 / 1.08e6)
MU_Q = load_model(1.0, 0.01, 1500, 100).mu_Q


@pytest.fixture
def verdict(record_property, request):
    def report(n, title, ok, detail):
        line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        record_property("acceptance", line)
        print(line)
        assert ok, line

    return report


def test_01_parameter_derivation(verdict, capsys):
    b = SystemBudget(1.08e6, 1.6e-3, 15e-6, 300.0)
    g = derive_grid(b)
    n1 = min_doppler_width(g, b.nu_max)
    R = build_allocation(g, n1).R
    code = main(["design", "--config", "grid"])
    out = [line for line in capsys.readouterr().out.splitlines() if not line.startswith("#")]
    ok = (
        (g.M, g.N, n1, R) == (18, 96, 5, 19)
        and g.delta_f == pytest.approx(60e3, rel=1e-12)
        and abs(g.T - 16.66e-6) < 0.01e-6
        and code == 0
        and out == ["nu_max=300Hz M=18 N=96 T=16.67us delta_f=60kHz N1=5 R=19"]
    )
    verdict(1, "grid derivation", ok, f"M={g.M} N={g.N} df={g.delta_f:g} T={g.T:.4e} N1={n1} R={R}")


def test_02_papr(verdict):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        M, N = int(rng.integers(1, 33)), int(rng.integers(2, 129))
        anchor = DdIndex(int(rng.integers(N)), int(rng.integers(M)))
        p = papr(TimeWaveformSpec(OtfsGrid(M, N, 1e-5), anchor, float(rng.uniform(0.1, 10))))
        N2 = int(rng.integers(2, 129))
        p2 = papr(TimeWaveformSpec(OtfsGrid(M, N2, 1e-5), DdIndex(anchor.k % N2, anchor.l), 1.0))
        worst = max(worst, abs(p / M - 1), abs(p2 / M - 1))
    verdict(2, "PAPR equals M", worst <= 0.01, f"worst relative deviation {worst:.2e} over 50 configurations")


def test_03_noise_statistics(verdict):
    rng = np.random.default_rng(3)
    w = make_window("rectangular", GRID.N)
    frames, chunk = 100_000, 2000
    power = 0.0
    acf = np.zeros(GRID.shape)
    for _ in range(frames // chunk):
        x = noise_dd_frames(rng, GRID, w, 1.0, chunk)
        power += float(np.sum(np.abs(x) ** 2))
        spec = np.abs(np.fft.fft2(x)) ** 2
        acf = acf + np.fft.ifft2(spec.sum(axis=0)).real
    cells = frames * GRID.M * GRID.N
    var = power / cells
    rho = np.abs(acf / acf[0, 0])
    rho[0, 0] = 0.0
    ratio = var / (GRID.M * GRID.N)
    ok = abs(ratio - 1) <= 0.02 and rho.max() < 0.01
    verdict(3, "DD noise statistics", ok, f"variance/(MN N_o)={ratio:.4f}, max |corr|={rho.max():.2e} over all lags")


def test_04_false_alarm_exactness(verdict):
    al = build_allocation(GRID, 5)
    w = make_window("rectangular", GRID.N)
    details, ok = [], True
    for p_fa, n in ((1e-1, 100_000), (1e-2, 1_000_000)):
        mu = analytic_threshold(GRID, 5, 1.0, p_fa).mu
        rng = np.random.default_rng(np.random.SeedSequence(4, spawn_key=(int(round(-math.log10(p_fa))),)))
        hits, trials = empirical_false_alarm_rate(GRID, al, w, 1.0, mu, rng, n, group=0, chunk=5000)
        rate = hits / trials
        z = (rate - p_fa) / math.sqrt(p_fa * (1 - p_fa) / trials)
        ok &= abs(z) <= 3
        details.append(f"p_fa={p_fa:g}: {rate:.5f} ({z:+.2f} sigma, {trials} frames)")
    verdict(4, "analytic threshold false-alarm rate", ok, "; ".join(details))


def test_05_oracle_equivalence(verdict):
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(100):
        al = build_allocation(GRID, int(rng.integers(1, 8)), l_anchor=int(rng.integers(GRID.M)))
        w = make_window(WINDOW_KINDS[i % 4], GRID.N)
        path = PathTap(
            complex(*rng.standard_normal(2)), float(rng.uniform(0, 0.99) * GRID.T), float(rng.uniform(-1500, 1500))
        )
        q = int(rng.integers(al.R))
        ch = ChannelRealization(np.array([path.gain]), np.array([path.delay]), np.array([path.doppler]))
        E = float(rng.uniform(0.5, 2000))
        dd = receive_dd(FrameScenario((UtTransmission(ch, q),)), al, GRID, E, w).data
        k, l = np.unravel_index(np.argmax(np.abs(dd)), dd.shape)
        ref = analytic_dd_response(path, al.anchors[q], GRID, w, E)(int(k), int(l))
        worst = max(worst, abs(ref - dd[k, l]) / abs(ref))
    verdict(5, "pipeline vs U/V oracle", worst <= 1e-6, f"worst relative error at peak {worst:.2e} over 100 cases")


def test_06_collision_bound(verdict):
    got = {R: collision_lower_bound(R, MU_Q).value for R in (96, 48, 19)}
    ref = {96: 1.85e-4, 48: 3.7e-4, 19: 9.4e-4}
    err = {R: abs(got[R] / ref[R] - 1) for R in got}
    verdict(
        6,
        "collision bound table",
        max(err.values()) <= 0.02,
        ", ".join(f"R={R}: {got[R]:.4e} ({err[R]:.2%})" for R in got),
    )


def test_07_bound_decreasing_in_R(verdict):
    bad = []
    for mu in (0.01, 0.1, 1.0, 10.0):
        v = [collision_lower_bound(R, mu).value for R in range(1, 201)]
        bad += [(mu, R) for R, (a, b) in enumerate(zip(v, v[1:]), start=1) if not a > b]
    verdict(7, "bound strictly decreasing in R", not bad, f"{len(bad)} violations over R=1..200, 4 loads")


def test_08_doppler_robustness(verdict):
    parts, ok = [], True
    for nu in (300.0, 600.0, 1200.0):
        b = reference_budget(nu)
        window, n1 = policy_width(derive_grid(b), nu, 1500.0)
        res = run_tep(ScenarioConfig(b, window=window, N1=n1, rho_db=None, n_frames=10_000, master_seed=8))
        ok &= res.tep <= 1e-3
        parts.append(f"{nu:g} Hz ({window}, N1={n1}): {res.tep:.2e}")
    verdict(8, "noise-free single-UT TEP <= 1e-3", ok, "; ".join(parts))


def test_09_window_leakage(verdict):
    center = 71 + 300.0 * GRID.N * GRID.T
    levels = {}
    for kind in WINDOW_KINDS:
        prof, _ = doppler_leakage_profile(GRID, make_window(kind, GRID.N), 300.0, DdIndex(71, 0), 2 * 1000 / 3e8)
        levels[kind] = sidelobe_level_db(prof, center, kind)
    ok = levels["hamming"] <= -40 and levels["blackman_harris_3"] <= -67
    verdict(9, "window side-lobe suppression", ok, ", ".join(f"{k}: {v:.1f} dB" for k, v in levels.items()))


def test_10_high_snr_floor(verdict):
    cfg = ScenarioConfig(
        reference_budget(300.0),
        load=load_model(1.0, 0.01, 1500, 100),
        window="hamming",
        N1=5,
        rho_db=-5.0,
        p_fa=1e-2,
        n_frames=200_000,
        master_seed=10,
    )
    res = run_tep(cfg)
    bound = collision_lower_bound(cfg.allocation.R, MU_Q).value
    ratio = res.tep / bound
    lo, hi = res.ci()
    verdict(
        10,
        "TEP within 2x of collision bound",
        0.5 <= ratio <= 2.0,
        f"TEP {res.tep:.3e} [{lo:.2e}, {hi:.2e}] vs bound {bound:.3e} (x{ratio:.2f}); "
        f"Q=1 errors {res.errors_q1}/{res.errors}, collisions {res.errors_collision}",
    )


def test_11_determinism(verdict, tmp_path):
    outs = []
    for workers in (1, 2):
        path = tmp_path / f"w{workers}.csv"
        cmd = [sys.executable, "-m", "otfsra.cli", "simulate", "--config", "tep-vs-load", "--frames", "1500",
               "--seed", "11", "--set", "sim.rho_db=-10,0", "--workers", str(workers), "--out", str(path)]
        subprocess.run(cmd, check=True)
        outs.append(path.read_bytes())
    body = [line for line in outs[0].decode().splitlines() if not line.startswith("#")]
    n_rows = len(list(csv.DictReader(io.StringIO("\n".join(body)))))
    verdict(11, "byte-identical CSV across worker counts", outs[0] == outs[1] and n_rows == 8, f"{n_rows} rows, {len(outs[0])} bytes")
