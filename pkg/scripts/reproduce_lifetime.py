#!/usr/bin/env python3
"""Squeezing lifetime versus interrogation time for the four preset
sequences, Monte Carlo points over analytic moment-transport curves.

Writes lifetime_curves.csv and lifetime_curves.png into --out.
"""

import argparse
import csv
import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from squeezeclock.sequences import (
    PRESET_KINDS,
    PresetParams,
    estimate_zeta,
    preset_sequence,
    propagate_moments,
    run_shots,
)
from squeezeclock.states import NoiseModel

GRIDS = {
    "css_ramsey": np.linspace(0.0, 1.2e-3, 13),
    "phase_squeezed_ramsey": np.linspace(0.0, 1.0e-3, 11),
    "number_squeezed_hold": np.linspace(0.0, 6.0e-3, 13),
    "echo_ramsey": np.linspace(1e-5, 6.0e-3, 13),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shots", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20260814)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--s0", type=float, default=1.5e4)
    ap.add_argument("--c-in", type=float, default=0.9)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("out"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    params = PresetParams()
    noise = NoiseModel(var_omega=(2 * math.pi * 1.3) ** 2, t_coh=0.011)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    rows = [("preset", "t_r_s", "zeta_mc", "zeta_stderr", "zeta_analytic")]
    for p_idx, kind in enumerate(PRESET_KINDS):
        grid = GRIDS[kind]
        mc, err, ana = [], [], []
        for t_idx, t_r in enumerate(grid):
            steps = preset_sequence(kind, float(t_r), params)
            seed = args.seed + 1 + p_idx * len(grid) + t_idx
            est = estimate_zeta(
                run_shots(steps, noise, args.shots, seed, args.threads),
                args.s0, args.c_in,
            )
            mc.append(est.zeta)
            err.append(est.stderr)
            ana.append(propagate_moments(steps, noise).zeta)
            rows.append((kind, f"{t_r:.6e}", f"{est.zeta:.6e}",
                         f"{est.stderr:.6e}", f"{ana[-1]:.6e}"))
        print(f"{kind:>24s}: zeta {mc[0]:.3f} -> {mc[-1]:.3f} over "
              f"{grid[0]*1e3:.2f}..{grid[-1]*1e3:.2f} ms")
        line, = ax.plot(np.asarray(grid) * 1e3, ana, lw=1.2, label=kind)
        ax.errorbar(np.asarray(grid) * 1e3, mc, yerr=err, fmt="o", ms=3,
                    color=line.get_color(), capsize=2)

    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set(xlabel="interrogation time (ms)", ylabel="metrological squeezing  $\\zeta$",
           yscale="log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out / "lifetime_curves.png", dpi=160)

    with open(args.out / "lifetime_curves.csv", "w", newline="\n") as fh:
        csv.writer(fh).writerows(rows)
    print(f"wrote {args.out / 'lifetime_curves.csv'} and lifetime_curves.png")


if __name__ == "__main__":
    main()
