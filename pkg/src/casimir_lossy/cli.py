"""Command-line front end for distance/temperature scans.

Subcommands::

    casimir-cli scan   --config cfg.json --out curve.csv --format csv|json
    casimir-cli window --in curve.json [--config cfg.json]
    casimir-cli modes  --config cfg.json --k 3.0 [--L 0.1]

Lengths in config files and outputs are in units of Lambda = 2 pi c / Omega,
frequencies and temperatures in units of Omega (hbar = k_B = 1); pressures
are reported as P L^3 / (hbar Omega), attractive positive.  An optional
``omega_scale`` s lets a file state frequencies and temperatures in units of
Omega / s and lengths in units of s Lambda.

Exit status: 0 on success, 2 on a configuration error, 3 on a numerical
failure (a failed scan point counts as one).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .fresnel import Mirror, PerfectMirror, Polarization
from .lifshitz import LAMBDA, CavityConfig, QuadratureSpec, pressure
from .modes import (ModeSearchError, default_region, find_modes, mode_sum_energy,
                    plasmon_force_short_distance, surface_modes)
from .response import (Constant, DrudeEpsilon, DrudeParams, MetamaterialMuDirect,
                       MetamaterialMuKK, MetamaterialMuParams, ResponseError, TabulatedAbsorption,
                       TabulatedKK, Vacuum)

METHODS = ("lifshitz", "mode_sum", "plasmon_approx")
CSV_FIELDS = ("L", "T", "pressure", "err", "method")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    """Malformed or inconsistent scan configuration."""


class CrossCheckError(RuntimeError):
    """Two formulations disagree beyond their combined error bars."""


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_FREQ_KEYS = ("plasma_frequency", "damping", "resonance", "magnetic_damping")


def _model(d: dict, scale: float, base: Path):
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"response model needs a 'kind': {d!r}")
    d = dict(d)
    kind = d.pop("kind")
    for key in _FREQ_KEYS:
        if key in d:
            d[key] = float(d[key]) / scale
    try:
        if kind == "vacuum":
            return Vacuum()
        if kind == "constant":
            return Constant(float(d["value"]))
        if kind == "drude_epsilon":
            return DrudeEpsilon(DrudeParams(d["plasma_frequency"], d.get("damping", 0.0)))
        if kind in ("metamaterial_mu_kk", "lorentz_kk", "drude_lorentz_direct"):
            p = MetamaterialMuParams(float(d["oscillator_strength"]), d["resonance"],
                                     d.get("magnetic_damping", 0.0))
            return MetamaterialMuDirect(p) if kind == "drude_lorentz_direct" else MetamaterialMuKK(p)
        if kind == "tabulated_kk":
            if scale != 1.0:
                raise ConfigError("tabulated_kk tables must be given with omega_scale = 1")
            return TabulatedKK(TabulatedAbsorption.from_text(base / d["file"]))
    except KeyError as e:
        raise ConfigError(f"{kind}: missing parameter {e}") from None
    except (ResponseError, OSError) as e:
        raise ConfigError(f"{kind}: {e}") from None
    raise ConfigError(f"unknown response kind {kind!r}")


def _mirror(d: dict, scale: float, base: Path) -> Mirror:
    if "perfect" in d:
        try:
            return PerfectMirror(kind=d["perfect"])
        except ValueError as e:
            raise ConfigError(str(e)) from None
    return Mirror(_model(d.get("epsilon", {"kind": "vacuum"}), scale, base),
                  _model(d.get("mu", {"kind": "vacuum"}), scale, base))


def _grid(g, name):
    if isinstance(g, dict):
        try:
            lo, hi, n = float(g["min"]), float(g["max"]), int(g["n"])
        except KeyError as e:
            raise ConfigError(f"{name}: missing {e}") from None
        if not (0 < lo <= hi and n >= 1):
            raise ConfigError(f"{name}: need 0 < min <= max and n >= 1")
        return [float(x) for x in np.geomspace(lo, hi, n)] if n > 1 else [lo]
    if isinstance(g, (list, tuple)):
        return [float(x) for x in g]
    raise ConfigError(f"{name} must be a list or a {{min, max, n}} table")


def _same(a: Mirror, b: Mirror) -> bool:
    try:
        return bool(a == b)
    except ValueError:  # array-valued fields (tabulated data)
        return a is b


@dataclass(frozen=True)
class ScanSpec:
    """A validated scan: L_grid in Lambda, T_list in Omega, both sorted."""

    L_grid: Tuple[float, ...]
    T_list: Tuple[float, ...]
    mirror1: Mirror
    mirror2: Mirror
    method: str = "lifshitz"
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    cross_check: Tuple[str, ...] = ()
    config: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.L_grid or not self.T_list:
            raise ConfigError("L_grid and T_list must be non-empty")
        if any(L <= 0 for L in self.L_grid) or list(self.L_grid) != sorted(set(self.L_grid)):
            raise ConfigError("L_grid must be positive and strictly increasing")
        if any(T < 0 for T in self.T_list) or list(self.T_list) != sorted(set(self.T_list)):
            raise ConfigError("T_list must be non-negative and strictly increasing")
        for m in (self.method,) + tuple(self.cross_check):
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
        needs_pair = {"mode_sum", "plasmon_approx"} & ({self.method} | set(self.cross_check))
        if needs_pair:
            if not _same(self.mirror1, self.mirror2) or isinstance(self.mirror1, PerfectMirror):
                raise ConfigError(f"{sorted(needs_pair)} require identical dispersive mirrors")
            if any(T > 0 for T in self.T_list):
                raise ConfigError(f"{sorted(needs_pair)} are zero-temperature methods")
        if "plasmon_approx" in needs_pair:
            m = self.mirror1
            if not (isinstance(m.epsilon, DrudeEpsilon) and isinstance(m.mu, Vacuum)):
                raise ConfigError("plasmon_approx needs Drude-epsilon mirrors with mu = 1")

    def cavity(self, L: float, T: float) -> CavityConfig:
        return CavityConfig(L * LAMBDA, self.mirror1, self.mirror2, T)


def parse_config(raw: dict, base: Path = Path(".")) -> ScanSpec:
    """Build a ScanSpec from a parsed config mapping."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - {"mirrors", "L_grid", "T_list", "method", "cross_check",
                          "quadrature", "omega_scale", "description"}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    scale = float(raw.get("omega_scale", 1.0))
    if not scale > 0:
        raise ConfigError("omega_scale must be > 0")
    mirrors = raw.get("mirrors")
    if not isinstance(mirrors, list) or len(mirrors) != 2:
        raise ConfigError("'mirrors' must list exactly two mirrors")
    m1, m2 = (_mirror(m, scale, base) for m in mirrors)
    L_grid = tuple(L * scale for L in _grid(raw.get("L_grid"), "L_grid"))
    T_list = tuple(T / scale for T in _grid(raw.get("T_list", [0.0]), "T_list"))
    try:
        quad = QuadratureSpec(**raw.get("quadrature", {}))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"quadrature: {e}") from None
    cross = raw.get("cross_check", [])
    cross = (cross,) if isinstance(cross, str) else tuple(cross)
    return ScanSpec(L_grid, T_list, m1, m2, raw.get("method", "lifshitz"), quad, cross, raw)


def load_config(path) -> ScanSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return parse_config(raw, path.parent)


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# --------------------------------------------------------------------------
# scan
# --------------------------------------------------------------------------

@dataclass
class CurvePoint:
    L: float
    T: float
    pressure: Optional[float]
    err: Optional[float]
    method: str
    message: str = ""


@dataclass
class PressureCurve:
    rows: List[CurvePoint] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def at(self, T: float, method: Optional[str] = None) -> List[CurvePoint]:
        return sorted((r for r in self.rows if r.T == T and (method is None or r.method == method)),
                      key=lambda r: r.L)

    @property
    def failed(self) -> List[CurvePoint]:
        return [r for r in self.rows if r.pressure is None]


def _mode_sum_pressure(cfg: CavityConfig, rel_step=0.02):
    """dE/dL from mode-sum energies (Richardson-extrapolated central
    differences); with E < 0 rising towards zero this is the attractive-positive
    pressure."""
    L = cfg.L

    def central(h):
        ep, ep_err = mode_sum_energy(cfg.with_gap(L + h))
        em, em_err = mode_sum_energy(cfg.with_gap(L - h))
        return (ep - em) / (2 * h), (ep_err + em_err) / (2 * h)

    p1, e1 = central(rel_step * L)
    p2, e2 = central(2 * rel_step * L)
    p = (4 * p1 - p2) / 3
    return p, abs(p1 - p2) / 3 + (4 * e1 + e2) / 3


def evaluate_point(spec: ScanSpec, L: float, T: float, method: str) -> Tuple[float, float]:
    """Normalised pressure P L^3 and its error at (L in Lambda, T)."""
    cfg = spec.cavity(L, T)
    Lc = cfg.L
    if method == "lifshitz":
        r = pressure(cfg, spec.quadrature)
        return r.pressure * Lc**3, r.estimated_error * Lc**3
    if method == "mode_sum":
        p, e = _mode_sum_pressure(cfg)
        return p * Lc**3, e * Lc**3
    if method == "plasmon_approx":
        params = spec.mirror1.epsilon.params
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            p = plasmon_force_short_distance(params, Lc)
        # neglected terms are of relative order w_p L and (gamma / w_p)^2
        rel = params.plasma_frequency * Lc + (params.damping / params.plasma_frequency) ** 2
        return p * Lc**3, abs(p) * rel * Lc**3
    raise ConfigError(f"unknown method {method!r}")


def _point(args) -> CurvePoint:
    spec, L, T, method = args
    try:
        p, e = evaluate_point(spec, L, T, method)
        if not (math.isfinite(p) and math.isfinite(e)):
            raise FloatingPointError("non-finite result")
        return CurvePoint(L, T, float(p), float(e), method)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        return CurvePoint(L, T, None, None, method, f"{type(exc).__name__}: {exc}")


def run_scan(spec: ScanSpec, jobs: int = 1) -> PressureCurve:
    """Evaluate every (T, L) point; failures are recorded in their row."""
    methods = (spec.method,) + tuple(m for m in spec.cross_check if m != spec.method)
    tasks = [(spec, L, T, m) for T in spec.T_list for L in spec.L_grid for m in methods]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_point, tasks))
    else:
        rows = [_point(t) for t in tasks]
    rows.sort(key=lambda r: (r.T, r.L, methods.index(r.method)))
    prov = {"config_hash": config_hash(spec.config), "version": __version__,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "config": spec.config}
    return PressureCurve(rows, prov)


def cross_check(curve: PressureCurve, methods: Sequence[str], n_sigma: float = 3.0,
                rel_floor: float = 1e-6) -> None:
    """Raise CrossCheckError when two methods disagree beyond n_sigma
    combined error bars (plus a small relative floor)."""
    if len(methods) < 2:
        return
    by_key: Dict[Tuple[float, float], Dict[str, CurvePoint]] = {}
    for r in curve.rows:
        by_key.setdefault((r.L, r.T), {})[r.method] = r
    for (L, T), d in sorted(by_key.items()):
        pts = [d[m] for m in methods if m in d and d[m].pressure is not None]
        for a in pts[1:]:
            b = pts[0]
            tol = n_sigma * (a.err + b.err) + rel_floor * max(abs(a.pressure), abs(b.pressure))
            if abs(a.pressure - b.pressure) > tol:
                raise CrossCheckError(
                    f"L={L:g}, T={T:g}: {b.method}={b.pressure:.8g} vs {a.method}="
                    f"{a.pressure:.8g} (tolerance {tol:.3g})")


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _num(x: Optional[float]) -> str:
    return "nan" if x is None else repr(float(x))


def curve_to_csv(curve: PressureCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in curve.rows:
        w.writerow([_num(r.L), _num(r.T), _num(r.pressure), _num(r.err), r.method])
    return buf.getvalue()


def curve_to_json(curve: PressureCurve) -> str:
    return json.dumps({"provenance": curve.provenance,
                       "rows": [asdict(r) for r in curve.rows]}, indent=1, sort_keys=True) + "\n"


def emit(curve: PressureCurve, fmt: str, path) -> None:
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    text = curve_to_csv(curve) if fmt == "csv" else curve_to_json(curve)
    Path(path).write_text(text)


def _opt(s: str) -> Optional[float]:
    v = float(s)
    return None if math.isnan(v) else v


def parse_curve(text: str) -> PressureCurve:
    """Inverse of curve_to_json / curve_to_csv (CSV carries no provenance)."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        d = json.loads(text)
        return PressureCurve([CurvePoint(**r) for r in d["rows"]], d.get("provenance", {}))
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_FIELDS:
        raise ValueError(f"CSV header must be {','.join(CSV_FIELDS)}")
    rows = [CurvePoint(float(r["L"]), float(r["T"]), _opt(r["pressure"]), _opt(r["err"]),
                       r["method"]) for r in reader]
    return PressureCurve(rows, {})


# --------------------------------------------------------------------------
# repulsive windows
# --------------------------------------------------------------------------

@dataclass
class RepulsiveWindow:
    """Interval (L_lo, L_hi) in Lambda on which the pressure is negative.

    ``open_lo`` / ``open_hi`` flag a window that reaches the edge of the
    scanned grid, where the bound is only the grid edge."""

    T: float
    L_lo: float
    L_hi: float
    open_lo: bool = False
    open_hi: bool = False

    @property
    def width(self) -> float:
        return self.L_hi - self.L_lo


def _bisect_sign(f, lo, hi, f_lo, rel_tol):
    """Sign change of f on [lo, hi] refined in log L."""
    while hi / lo - 1 > rel_tol:
        mid = math.sqrt(lo * hi)
        fm = f(mid)
        if (fm < 0) == (f_lo < 0):
            lo, f_lo = mid, fm
        else:
            hi = mid
    return math.sqrt(lo * hi)


def _interpolate_sign(l0, p0, l1, p1):
    u0, u1 = math.log(l0), math.log(l1)
    return math.exp(u0 + (u1 - u0) * p0 / (p0 - p1))


def find_repulsive_window(curve: PressureCurve, T: float,
                          evaluate: Optional[Callable[[float], float]] = None,
                          rel_tol: float = 1e-3, method: Optional[str] = None
                          ) -> List[RepulsiveWindow]:
    """Negative-pressure intervals of the curve at temperature T.

    With ``evaluate`` (L -> pressure) the bounds are bisected to ``rel_tol``
    relative in L; otherwise they are interpolated linearly in log L between
    the bracketing grid points.  An empty list means no window; more than one
    window triggers a warning.
    """
    rows = [r for r in curve.at(T, method) if r.pressure is not None]
    if method is None and len({r.method for r in rows}) > 1:
        method = rows[0].method
        rows = [r for r in rows if r.method == method]
    windows = []
    i = 0
    while i < len(rows):
        if rows[i].pressure >= 0:
            i += 1
            continue
        j = i
        while j + 1 < len(rows) and rows[j + 1].pressure < 0:
            j += 1
        lo = hi = None
        if i > 0:
            a, b = rows[i - 1], rows[i]
            lo = (_bisect_sign(evaluate, a.L, b.L, a.pressure, rel_tol) if evaluate
                  else _interpolate_sign(a.L, a.pressure, b.L, b.pressure))
        if j + 1 < len(rows):
            a, b = rows[j], rows[j + 1]
            hi = (_bisect_sign(evaluate, a.L, b.L, a.pressure, rel_tol) if evaluate
                  else _interpolate_sign(a.L, a.pressure, b.L, b.pressure))
        windows.append(RepulsiveWindow(T, rows[i].L if lo is None else lo,
                                       rows[j].L if hi is None else hi, lo is None, hi is None))
        i = j + 1
    if len(windows) > 1:
        warnings.warn(f"T={T:g}: {len(windows)} disjoint repulsive windows", RuntimeWarning)
    return windows


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _cmd_scan(args) -> int:
    spec = load_config(args.config)
    curve = run_scan(spec, jobs=args.jobs)
    methods = (spec.method,) + tuple(m for m in spec.cross_check if m != spec.method)
    cross_check(curve, methods)
    emit(curve, args.format, args.out)
    for r in curve.failed:
        print(f"point L={r.L:g} T={r.T:g} ({r.method}) failed: {r.message}", file=sys.stderr)
    return EXIT_NUMERICAL if curve.failed else EXIT_OK


def _cmd_window(args) -> int:
    curve = parse_curve(Path(args.input).read_text())
    spec = None
    if args.config:
        spec = load_config(args.config)
    elif curve.provenance.get("config") and not args.no_refine:
        spec = parse_config(curve.provenance["config"], Path(args.input).parent)
    out = []
    for T in sorted({r.T for r in curve.rows}):
        method = args.method or (spec.method if spec else None)
        evaluate = None
        if spec is not None and not args.no_refine:
            evaluate = (lambda L, T=T, m=method: evaluate_point(spec, L, T, m)[0])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            wins = find_repulsive_window(curve, T, evaluate, args.rel_tol, method)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        out.append({"T": T, "windows": [asdict(w) for w in wins]})
    print(json.dumps(out, indent=1))
    return EXIT_OK


def _cmd_modes(args) -> int:
    spec = load_config(args.config)
    L = args.L if args.L is not None else spec.L_grid[0]
    cfg = spec.cavity(L, 0.0)
    pols = [Polarization(args.pol)] if args.pol else [Polarization.TM, Polarization.TE]
    region = default_region(cfg, args.k)
    out = {"L": L, "k": args.k, "region": asdict(region), "modes": [], "surface_modes": []}
    for pol in pols:
        for m in find_modes(cfg, pol, args.k, region):
            out["modes"].append({"pol": pol.value, "branch": m.branch_index, "re": m.omega.real,
                                 "im": m.omega.imag, "multiplicity": m.multiplicity,
                                 "residual": m.residual})
        for m in surface_modes(cfg, pol, args.k, region):
            out["surface_modes"].append({"pol": pol.value, "re": m.omega.real, "im": m.omega.imag})
    print(json.dumps(out, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="casimir-cli", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="pressure on an (L, T) grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("window", help="repulsive windows of a stored curve")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--config", help="config used to bisect the bounds (CSV input)")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--rel-tol", type=float, default=1e-3)
    p.add_argument("--no-refine", action="store_true", help="interpolate instead of bisecting")
    p.set_defaults(func=_cmd_window)

    p = sub.add_parser("modes", help="complex spectrum at one transverse wavenumber")
    p.add_argument("--config", required=True)
    p.add_argument("--k", type=float, required=True, help="transverse wavenumber in Omega / c")
    p.add_argument("--L", type=float, help="gap in Lambda (default: first grid point)")
    p.add_argument("--pol", choices=("TM", "TE"))
    p.set_defaults(func=_cmd_modes)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ResponseError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (CrossCheckError, ModeSearchError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
