#!/usr/bin/env python3
"""Pressure against distance for the stand-in mixed pair at four temperatures,
followed by the repulsive windows and their dependence on w0 sqrt(f).

    python3 scripts/window_scan.py --out results/
"""
import argparse
import copy
import json
from pathlib import Path

from casimir_lossy.cli import (curve_to_csv, evaluate_point, find_repulsive_window,
                               load_config, parse_config, run_scan)

HERE = Path(__file__).resolve().parent


def windows(spec, curve):
    out = {}
    for T in spec.T_list:
        ws = find_repulsive_window(curve, T, lambda L, T=T: evaluate_point(spec, L, T, "lifshitz")[0])
        out[T] = [(w.L_lo, w.L_hi, w.open_lo, w.open_hi) for w in ws]
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", default=str(HERE.parent / "configs" / "mixed_pair.json"))
    parser.add_argument("--out", default="results")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--sweep-T", type=float, default=0.03,
                        help="temperature for the oscillator-strength sweep")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    spec = load_config(args.config)
    curve = run_scan(spec, jobs=args.jobs)
    (out / "pressure.csv").write_text(curve_to_csv(curve))
    summary = {"windows": {str(T): w for T, w in windows(spec, curve).items()}, "sweep": {}}

    # magnetic plasma frequency w0 sqrt(f) raised through the oscillator strength
    for f in (0.3, 0.5, 0.7):
        raw = copy.deepcopy(spec.config)
        raw["mirrors"][1]["mu"]["oscillator_strength"] = f
        raw["T_list"] = [args.sweep_T]
        s = parse_config(raw)
        c = run_scan(s, jobs=args.jobs)
        summary["sweep"][str(f)] = windows(s, c)[args.sweep_T]
        print(f"f={f}: {summary['sweep'][str(f)]}")

    for T, w in summary["windows"].items():
        print(f"T={T}: {w}")
    (out / "windows.json").write_text(json.dumps(summary, indent=1))


if __name__ == "__main__":
    main()
