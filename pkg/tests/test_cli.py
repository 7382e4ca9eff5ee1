import json
import math
import subprocess
import sys
import warnings
from pathlib import Path

import pytest

from casimir_lossy.cli import (ConfigError, CrossCheckError, CurvePoint, PressureCurve,
                               RepulsiveWindow, config_hash, cross_check, curve_to_csv,
                               curve_to_json, emit, evaluate_point, find_repulsive_window, main,
                               parse_config, parse_curve, run_scan)
from casimir_lossy.lifshitz import LAMBDA

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

DRUDE = {"epsilon": {"kind": "drude_epsilon", "plasma_frequency": 1.0, "damping": 0.01}}
MAGNETIC = {"epsilon": {"kind": "lorentz_kk", "oscillator_strength": 0.1, "resonance": 1.0,
                        "magnetic_damping": 1e-3},
            "mu": {"kind": "metamaterial_mu_kk", "oscillator_strength": 0.5, "resonance": 1.0,
                   "magnetic_damping": 1e-3}}


def ideal(**extra):
    raw = {"mirrors": [{"perfect": "electric"}, {"perfect": "electric"}],
           "L_grid": [0.1, 1.0], "T_list": [0.0]}
    raw.update(extra)
    return raw


def write(tmp_path, raw, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return p


def synthetic(values, T=0.0, method="lifshitz"):
    L = [0.01 * 2**i for i in range(len(values))]
    return PressureCurve([CurvePoint(x, T, v, 0.0, method) for x, v in zip(L, values)])


# --------------------------------------------------------------------------
# config

def test_ideal_scan_matches_analytic_value():
    curve = run_scan(parse_config(ideal()))
    assert len(curve.rows) == 2
    for r in curve.rows:
        # P L^3 in hbar Omega with L in c / Omega
        assert r.pressure == pytest.approx(math.pi**2 / (240 * r.L * LAMBDA), rel=1e-6)
    assert curve.provenance["config_hash"] == config_hash(ideal())


def test_grid_tables_are_log_spaced():
    spec = parse_config(ideal(L_grid={"min": 0.01, "max": 1.0, "n": 3}))
    assert spec.L_grid == pytest.approx((0.01, 0.1, 1.0))


@pytest.mark.parametrize("raw", [
    ideal(L_grid=[]),
    ideal(L_grid=[1.0, 0.1]),
    ideal(T_list=[0.1, 0.0]),
    ideal(method="real_axis"),
    ideal(mirrors=[{"perfect": "electric"}]),
    ideal(mirrors=[{"perfect": "dielectric"}, {"perfect": "electric"}]),
    ideal(unknown_key=1),
    ideal(omega_scale=0.0),
    ideal(quadrature={"relative_tolerance": 0.5}),
    ideal(mirrors=[{"epsilon": {"kind": "glass"}}, DRUDE]),
    ideal(mirrors=[{"epsilon": {"kind": "drude_epsilon"}}, DRUDE]),
    ideal(mirrors=[{"epsilon": {"kind": "drude_epsilon", "plasma_frequency": -1.0}}, DRUDE]),
    ideal(method="mode_sum"),
    ideal(mirrors=[DRUDE, MAGNETIC], method="mode_sum"),
    ideal(mirrors=[DRUDE, DRUDE], method="mode_sum", T_list=[0.0, 0.1]),
    ideal(mirrors=[MAGNETIC, MAGNETIC], method="plasmon_approx"),
])
def test_invalid_configs_are_rejected(raw):
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_omega_scale_invariance():
    base = {"mirrors": [DRUDE, MAGNETIC], "L_grid": [0.1, 1.0], "T_list": [0.0, 0.1]}
    scaled = json.loads(json.dumps(base))
    s = 2.0
    for m in scaled["mirrors"]:
        for model in m.values():
            for key in ("plasma_frequency", "damping", "resonance", "magnetic_damping"):
                if key in model:
                    model[key] *= s
    scaled.update(omega_scale=s, L_grid=[L / s for L in base["L_grid"]],
                  T_list=[T * s for T in base["T_list"]])
    a, b = run_scan(parse_config(base)), run_scan(parse_config(scaled))
    for ra, rb in zip(a.rows, b.rows):
        assert (ra.L, ra.T) == pytest.approx((rb.L, rb.T), rel=1e-14)
        assert ra.pressure == pytest.approx(rb.pressure, rel=1e-10)


def test_scan_is_deterministic():
    spec = parse_config({"mirrors": [DRUDE, MAGNETIC], "L_grid": [0.2, 0.5], "T_list": [0.03]})
    assert curve_to_csv(run_scan(spec)) == curve_to_csv(run_scan(spec, jobs=2))


def test_shipped_configs_parse():
    for p in sorted(CONFIGS.glob("*.json")):
        spec = parse_config(json.loads(p.read_text()), p.parent)
        assert spec.L_grid and spec.T_list


def test_plasmon_approx_tracks_lifshitz_at_short_distance():
    raw = {"mirrors": [DRUDE, DRUDE], "L_grid": [0.001], "method": "plasmon_approx",
           "cross_check": ["lifshitz"]}
    spec = parse_config(raw)
    p, e = evaluate_point(spec, 0.001, 0.0, "plasmon_approx")
    q, _ = evaluate_point(spec, 0.001, 0.0, "lifshitz")
    assert abs(p - q) <= e


# --------------------------------------------------------------------------
# output

def test_csv_layout():
    curve = synthetic([0.5, -0.25])
    lines = curve_to_csv(curve).splitlines()
    assert lines[0] == "L,T,pressure,err,method"
    assert len(lines) == 3
    assert lines[2] == "0.02,0.0,-0.25,0.0,lifshitz"


def test_empty_curve_is_header_only(tmp_path):
    out = tmp_path / "empty.csv"
    emit(PressureCurve(), "csv", out)
    assert out.read_text() == "L,T,pressure,err,method\n"
    with pytest.raises(ConfigError):
        emit(PressureCurve(), "xml", out)


def test_json_and_csv_round_trip():
    curve = run_scan(parse_config(ideal()))
    curve.rows.append(CurvePoint(2.0, 0.0, None, None, "lifshitz", "QuadratureError: x"))
    back = parse_curve(curve_to_json(curve))
    assert back == curve
    csv_back = parse_curve(curve_to_csv(curve))
    assert [(r.L, r.T, r.pressure, r.err, r.method) for r in csv_back.rows] == [
        (r.L, r.T, r.pressure, r.err, r.method) for r in curve.rows]
    with pytest.raises(ValueError):
        parse_curve("a,b\n1,2\n")


def test_cross_check_flags_disagreement():
    rows = [CurvePoint(1.0, 0.0, 1.0, 1e-3, "mode_sum"), CurvePoint(1.0, 0.0, 1.002, 1e-4, "lifshitz")]
    cross_check(PressureCurve(rows), ["mode_sum", "lifshitz"])
    rows[1] = CurvePoint(1.0, 0.0, 1.1, 1e-4, "lifshitz")
    with pytest.raises(CrossCheckError):
        cross_check(PressureCurve(rows), ["mode_sum", "lifshitz"])


# --------------------------------------------------------------------------
# windows

def test_all_positive_curve_has_no_window():
    assert find_repulsive_window(synthetic([3.0, 2.0, 1.0]), 0.0) == []


def test_synthetic_window_is_bracketed():
    curve = synthetic([1.0, -1.0, -1.0, 1.0])
    (w,) = find_repulsive_window(curve, 0.0)
    assert 0.01 < w.L_lo < 0.02 and 0.04 < w.L_hi < 0.08
    assert not (w.open_lo or w.open_hi)
    # log-linear interpolation puts a symmetric crossing at the geometric mean
    assert w.L_lo == pytest.approx(math.sqrt(0.01 * 0.02))


def test_window_bisection_reaches_requested_tolerance():
    root_lo, root_hi = 0.0123, 0.0567
    f = lambda L: (L - root_lo) * (L - root_hi)
    L = [0.01 * 2**i for i in range(4)]
    curve = PressureCurve([CurvePoint(x, 0.0, f(x), 0.0, "lifshitz") for x in L])
    (w,) = find_repulsive_window(curve, 0.0, f, rel_tol=1e-3)
    assert w.L_lo == pytest.approx(root_lo, rel=1e-3)
    assert w.L_hi == pytest.approx(root_hi, rel=1e-3)


def test_open_window_and_multiple_windows():
    (w,) = find_repulsive_window(synthetic([1.0, -1.0, -2.0]), 0.0)
    assert w.open_hi and w.L_hi == 0.04
    with pytest.warns(RuntimeWarning):
        ws = find_repulsive_window(synthetic([-1.0, 1.0, -1.0, 1.0]), 0.0)
    assert len(ws) == 2 and ws[0].open_lo
    assert RepulsiveWindow(0.0, 1.0, 3.0).width == 2.0


# --------------------------------------------------------------------------
# entry point

def test_scan_command_writes_csv(tmp_path, capsys):
    cfg = write(tmp_path, ideal())
    out = tmp_path / "curve.csv"
    assert main(["scan", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3


def test_window_command_on_json(tmp_path, capsys):
    cfg = write(tmp_path, {"mirrors": [{"perfect": "electric"}, {"perfect": "magnetic"}],
                           "L_grid": [0.1, 1.0]})
    out = tmp_path / "curve.json"
    assert main(["scan", "--config", str(cfg), "--out", str(out), "--format", "json"]) == 0
    capsys.readouterr()
    assert main(["window", "--in", str(out), "--no-refine"]) == 0
    (entry,) = json.loads(capsys.readouterr().out)
    (w,) = entry["windows"]
    assert w["open_lo"] and w["open_hi"]


def test_config_errors_exit_2(tmp_path):
    bad = write(tmp_path, ideal(method="nope"))
    assert main(["scan", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["scan", "--config", str(broken), "--out", str(tmp_path / "x.csv")]) == 2


def test_failed_points_exit_3(tmp_path, capsys):
    # an active medium makes the round-trip factor exceed one
    gain = {"epsilon": {"kind": "constant", "value": -0.5}}
    cfg = write(tmp_path, ideal(mirrors=[gain, gain], L_grid=[1e-4, 1.0]))
    out = tmp_path / "curve.csv"
    assert main(["scan", "--config", str(cfg), "--out", str(out)]) == 3
    assert "failed" in capsys.readouterr().err
    assert "nan" in out.read_text()


def test_modes_command(tmp_path, capsys):
    cfg = write(tmp_path, ideal(mirrors=[DRUDE, DRUDE], L_grid=[0.01]))
    assert main(["modes", "--config", str(cfg), "--k", "20", "--pol", "TM"]) == 0
    out = json.loads(capsys.readouterr().out)
    low = [m for m in out["modes"] if m["re"] < 1]
    assert len(low) == 2 and all(m["im"] < 0 for m in low)
    assert len(out["surface_modes"]) == 1


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "casimir_lossy.cli", "--help"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "scan" in r.stdout
