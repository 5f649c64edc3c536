"""Command-line interface.

Subcommands: run (Monte-Carlo sweep), dynamic (vehicular trajectory),
oracle (closed-form dispersion grids and Doppler-grid arithmetic),
pfa (noise-only CFAR operating point). Each writes CSV and, unless
--no-plot is given, matplotlib figures next to it.

Exit codes: 0 success, 2 configuration error, 3 runtime numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .analysis import (
    DispersionSpec,
    echo_dispersion,
    interference_dispersion,
    resolution_accuracy,
    spec_from_path,
)
from .channel import PropagationPath
from .config import ConfigError, parse_config
from .runner import (
    estimate_pfa,
    run_dynamic,
    run_sweep,
    rows_to_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.threads is not None:
        cfg.threads = args.threads
    return cfg.validate()


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _stem(out: str) -> str:
    return os.path.splitext(out)[0]


def cmd_run(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    rows = run_sweep(cfg)
    _write(args.out, rows_to_csv(rows))
    print(f"wrote {args.out} ({len(rows)} rows)")
    if not args.no_plot:
        from .plots import render_sweep

        for p in render_sweep(rows, _stem(args.out), cfg.sweep):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_dynamic(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    rows, steps = run_dynamic(cfg)
    _write(args.out, rows_to_csv(rows))
    print(f"wrote {args.out} ({len(rows)} rows)")
    geo_path = _stem(args.out) + "_geometry.csv"
    with open(geo_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "sir", "tau_r", "alpha_r_mag"])
        for s in steps:
            w.writerow([s.step, f"{s.sir:.9g}", f"{s.tau_r:.9g}",
                        f"{s.alpha_r_mag:.9g}"])
    print(f"wrote {geo_path}")
    if not args.no_plot:
        from .plots import render_dynamic

        for p in render_dynamic(rows, steps, _stem(args.out)):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    params = cfg.waveform_params()
    n_fast = params.Mos * params.Lc
    tau_bins = np.arange(n_fast, dtype=float)
    tau_c = np.where(tau_bins > n_fast / 2, tau_bins - n_fast, tau_bins)
    f_bins = np.arange(params.P, dtype=float)
    f_c = np.where(f_bins > params.P / 2, f_bins - params.P, f_bins)

    ipath = PropagationPath(cfg.alpha_c, cfg.tau_c, cfg.doppler_c)
    rpath = PropagationPath(cfg.alpha_r, cfg.tau_r, cfg.doppler_r)
    grid_i = interference_dispersion(spec_from_path(params, ipath), tau_c, f_c)
    grid_e = echo_dispersion(spec_from_path(params, rpath), tau_c, f_c)

    stem = _stem(args.out)
    for name, grid in (("interference", grid_i), ("echo", grid_e)):
        path = f"{stem}_{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau_bin"] + [f"f{int(f)}" for f in f_bins])
            for i, tb in enumerate(tau_bins):
                w.writerow([f"{tb:.9g}"] + [f"{v:.9g}" for v in grid[i]])
        print(f"wrote {path}")

    res_path = f"{stem}_resolution.csv"
    with open(res_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pulses", "zd", "resolution_hz", "accuracy_hz"])
        for pulses in (50, 100, 150, 200):
            for zd in range(cfg.zd + 1):
                out = resolution_accuracy(params.with_pulses(pulses),
                                          cfg.doppler_r, zd)
                w.writerow([pulses, zd, f"{out['resolution']:.9g}",
                            f"{out['accuracy']:.9g}"])
    print(f"wrote {res_path}")
    if not args.no_plot:
        from .plots import render_oracle

        for p in render_oracle(grid_i, grid_e, stem):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_pfa(args) -> int:
    cfg = _apply_overrides(parse_config(args.config), args)
    out = estimate_pfa(cfg)
    _write(args.out, "pfa_hat,flagged,cells,frames,target\n"
           f"{out['pfa_hat']:.9g},{out['flagged']},{out['cells']},"
           f"{out['frames']},{out['target']:.9g}\n")
    print(f"pfa_hat = {out['pfa_hat']:.3e} over {out['cells']} cells "
          f"(target {out['target']:.1e})")
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="isaclink",
        description="Link-level full-duplex PC-FMCW joint radar-communication "
                    "simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, default_out in (
            ("run", cmd_run, "sweep.csv"),
            ("dynamic", cmd_dynamic, "dynamic.csv"),
            ("oracle", cmd_oracle, "oracle.csv"),
            ("pfa", cmd_pfa, "pfa.csv")):
        p = sub.add_parser(name)
        p.add_argument("config", help="experiment config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--out", default=default_out)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--no-plot", action="store_true")
        p.set_defaults(fn=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        raise
    except Exception as e:  # numeric/runtime failure
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
