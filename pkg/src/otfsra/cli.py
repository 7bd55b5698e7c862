"""Command-line front end.

Configuration is INI text with fixed sections and keys; a preset name or a
file path can be given with --config and single keys overridden with
--set section.key=value. Every CSV written starts with '#' lines echoing
the tool version, subcommand and fully resolved configuration.
"""

from __future__ import annotations

import argparse
import configparser
import io
import itertools
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import SWEEP_COLUMNS, bound_sweep, collision_lower_bound, write_rows
from .channel import ETU, load_profile
from .design import (
    SystemBudget,
    derive_grid,
    doppler_from_speed,
    load_model,
    min_doppler_width,
)
from .detector import analytic_threshold, empirical_threshold
from .errors import Infeasible, InvalidParameter, ModelDomainError, NumericError, OtfsRaError
from .grid import DdIndex, build_allocation
from .receiver import WINDOW_KINDS, doppler_leakage_profile, make_window, sidelobe_level_db
from .simharness import RESULT_COLUMNS, ScenarioConfig, result_row, run_tep

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4

DEFAULTS = """
[budget]
B_c = 1.08e6
T_c = 1.6e-3
G = 15e-6
nu_max = 300
speed_kmh =
f_c = 4e9

[load]
lambda = 1.0
T_a = 0.01
r_c = 1500
r_a = 100
single_ut = false

[detector]
window = hamming
N1 = auto
p_fa = 1e-2
calib_frames = auto

[sim]
scenario_id = run
rho_db = -5
frames = 10000
seed = 0
l_anchor = 0
pathloss_exp = 3
profile = etu

[bound]
R =
mu_q =
radii =
speeds_kmh = 100
lambdas = 1.0

[leakage]
windows = rectangular, hamming, blackman_harris_3, blackman_harris_4
nu = 300
k_q = 71
tau = 6.6666666667e-6
l_row = auto

[threshold]
N_o = 1.0
method = analytic
frames = auto
"""


class ConfigError(OtfsRaError):
    pass


def _allowed_keys() -> dict[str, set[str]]:
    cp = _parser()
    cp.read_string(DEFAULTS)
    return {s: set(cp[s]) for s in cp.sections()}


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (B_c, N1, ...)
    return cp


def preset_names() -> list[str]:
    d = resources.files("otfsra") / "presets"
    return sorted(p.name[:-4] for p in d.iterdir() if p.name.endswith(".ini"))


def _read_source(name_or_path: str) -> str:
    p = Path(name_or_path)
    if p.is_file():
        return p.read_text()
    res = resources.files("otfsra") / "presets" / f"{name_or_path}.ini"
    if res.is_file():
        return res.read_text()
    raise ConfigError(f"no config file or preset named {name_or_path!r}; presets: {preset_names()}")


def resolve_config(source: str | None, overrides: list[str]) -> configparser.ConfigParser:
    """Defaults, then the preset/file, then key=value overrides. Unknown
    sections or keys anywhere are rejected."""
    allowed = _allowed_keys()
    cp = _parser()
    cp.read_string(DEFAULTS)
    if source:
        user = _parser()
        try:
            user.read_string(_read_source(source))
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {source}: {e}") from e
        for sec in user.sections():
            for key, val in user[sec].items():
                _check_key(allowed, sec, key)
                cp[sec][key] = val
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        lhs, val = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        _check_key(allowed, sec, key)
        cp[sec][key] = val.strip()
    return cp


def _check_key(allowed, sec, key):
    if sec not in allowed:
        raise ConfigError(f"unknown section [{sec}]; expected one of {sorted(allowed)}")
    if key not in allowed[sec]:
        raise ConfigError(f"unknown key {sec}.{key}; expected one of {sorted(allowed[sec])}")


def _value(cp, sec, key, conv=float):
    raw = cp[sec][key].strip()
    try:
        return conv(raw)
    except ValueError as e:
        raise ConfigError(f"{sec}.{key}: cannot parse {raw!r}") from e


def _list(cp, sec, key, conv=float) -> list:
    """Comma-separated list; 'a:b:step' expands to an inclusive range."""
    raw = cp[sec][key].strip()
    if not raw:
        return []
    out = []
    for tok in raw.split(","):
        tok = tok.strip()
        try:
            if ":" in tok:
                a, b, s = (float(x) for x in tok.split(":"))
                n = int(math.floor((b - a) / s + 1e-9)) + 1
                out.extend(conv(a + i * s) for i in range(n))
            else:
                out.append(conv(tok))
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"{sec}.{key}: cannot parse {tok!r}") from e
    return out


def _auto_int(cp, sec, key):
    raw = cp[sec][key].strip()
    return None if raw in ("", "auto") else _value(cp, sec, key, int)


def _bool(cp, sec, key):
    try:
        return cp.getboolean(sec, key)
    except ValueError as e:
        raise ConfigError(f"{sec}.{key}: expected a boolean") from e


def _nu_values(cp) -> list[float]:
    speeds = _list(cp, "budget", "speed_kmh")
    if speeds:
        f_c = _value(cp, "budget", "f_c")
        return [doppler_from_speed(v, f_c) for v in speeds]
    return _list(cp, "budget", "nu_max")


def _budget(cp, nu_max: float) -> SystemBudget:
    return SystemBudget(
        _value(cp, "budget", "B_c"), _value(cp, "budget", "T_c"), _value(cp, "budget", "G"), nu_max
    )


def _header(cp, command: str) -> str:
    buf = io.StringIO()
    cp.write(buf)
    lines = [f"# otfsra {__version__}", f"# command: {command}", f"# seed: {cp['sim']['seed']}"]
    for line in buf.getvalue().splitlines():
        if line.strip():
            lines.append(f"# {line}")
    return "\n".join(lines) + "\n"


def _emit(args, cp, command, body: str):
    text = _header(cp, command) + body
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    write_rows(rows, buf, columns)
    return buf.getvalue()


def cmd_design(args, cp):
    nus = _nu_values(cp) or [0.0]
    lines = []
    for nu in nus:
        budget = _budget(cp, nu)
        if budget.G == 0:
            print("warning: G = 0 gives M = 1, so every TA estimate is 0", file=sys.stderr)
        g = derive_grid(budget)
        n1 = _auto_int(cp, "detector", "N1") or min_doppler_width(g, nu)
        R = build_allocation(g, n1).R
        lines.append(
            f"nu_max={nu:g}Hz M={g.M} N={g.N} T={g.T * 1e6:.4g}us "
            f"delta_f={g.delta_f / 1e3:.6g}kHz N1={n1} R={R}"
        )
    _emit(args, cp, "design", "\n".join(lines) + "\n")


def cmd_bound(args, cp):
    radii = _list(cp, "bound", "radii")
    if radii:
        rows = bound_sweep(
            _value(cp, "budget", "B_c"),
            _value(cp, "budget", "T_c"),
            radii,
            _list(cp, "bound", "speeds_kmh"),
            _list(cp, "bound", "lambdas"),
            T_a=_value(cp, "load", "T_a"),
            f_c=_value(cp, "budget", "f_c"),
            r_a=_value(cp, "load", "r_a"),
        )
        _emit(args, cp, "bound", _csv(rows, SWEEP_COLUMNS))
        return
    mus = _list(cp, "bound", "mu_q")
    if not mus:
        mus = [
            load_model(lam, _value(cp, "load", "T_a"), _value(cp, "load", "r_c"), _value(cp, "load", "r_a")).mu_Q
            for lam in _list(cp, "load", "lambda")
        ]
    Rs = _list(cp, "bound", "R", int)
    if not Rs:
        g = derive_grid(_budget(cp, _nu_values(cp)[0]))
        n1 = _auto_int(cp, "detector", "N1") or min_doppler_width(g, _nu_values(cp)[0])
        Rs = [g.N // n1]
    rows = []
    for R, mu in itertools.product(Rs, mus):
        b = collision_lower_bound(R, mu)
        rows.append({"R": R, "mu_q": mu, "truncation_K": b.truncation_K, "bound": b.value})
    _emit(args, cp, "bound", _csv(rows, ("R", "mu_q", "truncation_K", "bound")))


def _scenarios(cp):
    if cp["sim"]["profile"].strip().lower() in ("", "etu"):
        profile = ETU
    else:
        profile = load_profile(cp["sim"]["profile"].strip())
    single = _bool(cp, "load", "single_ut")
    lambdas = [None] if single else _list(cp, "load", "lambda")
    rhos = [None if math.isinf(r) else r for r in _list(cp, "sim", "rho_db")]
    n1s = [None] if _auto_int(cp, "detector", "N1") is None else _list(cp, "detector", "N1", int)
    windows = _list(cp, "detector", "window", str)
    pfas = _list(cp, "detector", "p_fa")
    for nu, lam, n1, window, pfa, rho in itertools.product(
        _nu_values(cp), lambdas, n1s, windows, pfas, rhos
    ):
        load = None
        if lam is not None:
            load = load_model(lam, _value(cp, "load", "T_a"), _value(cp, "load", "r_c"), _value(cp, "load", "r_a"))
        yield ScenarioConfig(
            budget=_budget(cp, nu),
            load=load,
            window=window,
            N1=n1,
            rho_db=rho,
            p_fa=pfa,
            n_frames=_value(cp, "sim", "frames", int),
            master_seed=_value(cp, "sim", "seed", int),
            l_anchor=_value(cp, "sim", "l_anchor", int),
            r_a=_value(cp, "load", "r_a"),
            r_c=_value(cp, "load", "r_c"),
            pathloss_exp=_value(cp, "sim", "pathloss_exp"),
            profile=profile,
            calib_frames=_auto_int(cp, "detector", "calib_frames"),
        )


def cmd_simulate(args, cp):
    sid = cp["sim"]["scenario_id"].strip()
    rows = []
    for cfg in _scenarios(cp):
        res = run_tep(cfg, workers=args.workers)
        rows.append(result_row(sid, cfg, res))
        if args.verbose:
            print(f"{sid}: tep={res.tep:.4g} over {res.frames} frames", file=sys.stderr)
    _emit(args, cp, "simulate", _csv(rows, RESULT_COLUMNS))


def cmd_threshold(args, cp):
    N_o = _value(cp, "threshold", "N_o")
    method = cp["threshold"]["method"].strip()
    if method not in ("analytic", "empirical"):
        raise ConfigError("threshold.method must be 'analytic' or 'empirical'")
    frames = _auto_int(cp, "threshold", "frames")
    rows = []
    for nu in _nu_values(cp):
        g = derive_grid(_budget(cp, nu))
        n1s = _list(cp, "detector", "N1", int) if _auto_int(cp, "detector", "N1") else [min_doppler_width(g, nu)]
        for n1, window, pfa in itertools.product(
            n1s, _list(cp, "detector", "window", str), _list(cp, "detector", "p_fa")
        ):
            row = {"M": g.M, "N": g.N, "N1": n1, "window": window, "p_fa": pfa, "method": method}
            if method == "analytic":
                if window != "rectangular":
                    raise ConfigError("the analytic threshold assumes the rectangular window")
                row.update(mu=analytic_threshold(g, n1, N_o, pfa).mu, frames=0)
            else:
                n = frames or math.ceil(100 / pfa)
                rng = np.random.default_rng(
                    np.random.SeedSequence(_value(cp, "sim", "seed", int), spawn_key=(1,))
                )
                t = empirical_threshold(g, build_allocation(g, n1), make_window(window, g.N), N_o, pfa, rng, n)
                row.update(mu=t.mu, frames=n)
            rows.append(row)
    _emit(args, cp, "threshold", _csv(rows, ("M", "N", "N1", "window", "p_fa", "method", "mu", "frames")))


def cmd_leakage(args, cp):
    nu = _value(cp, "leakage", "nu")
    g = derive_grid(_budget(cp, abs(nu)))
    anchor = DdIndex(_value(cp, "leakage", "k_q", int), 0)
    anchor.check(g)
    tau = _value(cp, "leakage", "tau")
    l_row = _auto_int(cp, "leakage", "l_row")
    rows = []
    for kind in _list(cp, "leakage", "windows", str):
        w = make_window(kind, g.N)
        prof, lr = doppler_leakage_profile(g, w, nu, anchor, tau, l_row)
        center = anchor.k + nu * g.N * g.T
        side = sidelobe_level_db(prof, center, kind)
        for k, db in enumerate(prof):
            rows.append({"window": kind, "l": lr, "k": k, "energy_db": db, "max_sidelobe_db": side})
    _emit(args, cp, "leakage", _csv(rows, ("window", "l", "k", "energy_db", "max_sidelobe_db")))


COMMANDS = {
    "design": cmd_design,
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "threshold": cmd_threshold,
    "leakage": cmd_leakage,
}


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="otfsra", description="OTFS random-access preamble toolkit")
    p.add_argument("--version", action="version", version=f"otfsra {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help=f"INI file or preset name ({', '.join(preset_names())})")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
        s.add_argument("--out", help="output file (default stdout)")
        s.add_argument("--seed", type=int)
        s.add_argument("--workers", type=int, default=None)
        s.add_argument("--frames", type=int)
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"sim.seed={args.seed}")
        if args.frames is not None:
            overrides.append(f"sim.frames={args.frames}")
        cp = resolve_config(args.config, overrides)
        for w in _list(cp, "detector", "window", str) + _list(cp, "leakage", "windows", str):
            if w not in WINDOW_KINDS:
                raise ConfigError(f"unknown window {w!r}; choose from {WINDOW_KINDS}")
        COMMANDS[args.command](args, cp)
    except (ConfigError, InvalidParameter, ModelDomainError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Infeasible as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericError, FloatingPointError) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
