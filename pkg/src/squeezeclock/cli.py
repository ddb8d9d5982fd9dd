"""Command-line front end.

Subcommands: ``lifetime`` (squeezing parameter vs interrogation time for
all presets, plus a quadratic fit summary), ``allan`` (clock records and
their Allan deviation with reference lines), ``oracle-check`` (Gaussian
shear against the exact symmetric-subspace calculation), and
``noise-selftest`` (Allan estimator slopes on synthetic noise).

All outputs are deterministic CSV: headers carry the fully resolved
configuration and the tool version, never timestamps, so identical
config and seed reproduce identical bytes.  Exit codes: 0 on success,
2 on configuration errors, 3 on tolerance failures in check commands.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .clock import (
    ClockConfig,
    allan_deviation,
    fit_loglog_slope,
    random_walk_frequency_noise,
    run_clock,
    sql_reference,
    white_frequency_noise,
    FrequencyRecord,
)
from .config import ConfigError, ExperimentConfig, load_config
from .dicke import compare_shear_to_exact, dicke_css, moments, zeta_from_moments
from .sequences import PresetParams, estimate_zeta, preset_sequence, run_shots

# fixed offsets keep the per-experiment seed streams disjoint for one
# master seed; every stream is (derived_seed, item_index) underneath
_SEED_CLOCK = 9001
_SEED_SELFTEST_WHITE = 12001
_SEED_SELFTEST_RW = 12002


def _fmt(x: float) -> str:
    return f"{x:.8e}"


def _header_lines(cfg: ExperimentConfig, command: str, extra=()):
    lines = [f"# squeezeclock {__version__}", f"# command: {command}"]
    # out_dir excluded: where a file is written must not change its bytes
    lines += [f"# {key} = {value!r}" for key, value in cfg.resolved if key != "out_dir"]
    lines += [f"# {line}" for line in extra]
    return lines


def _write_csv(path: str, header, columns, rows):
    with open(path, "w", newline="\n") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _preset_params(cfg: ExperimentConfig) -> PresetParams:
    return PresetParams(
        s0=cfg.s0,
        c_in=cfg.c_in,
        zeta0_target=cfg.zeta0_target,
        excess_area=cfg.excess_area,
        contrast_factor=cfg.contrast_factor,
    )


def _quadratic_fit(t, zeta, stderr):
    """Weighted LSQ of zeta against (1, t^2); returns (zeta0, curvature)."""
    t = np.asarray(t)
    w = 1.0 / np.maximum(np.asarray(stderr), 1e-30)
    design = np.stack([np.ones_like(t), t * t], axis=1) * w[:, None]
    coef, *_ = np.linalg.lstsq(design, np.asarray(zeta) * w, rcond=None)
    return float(coef[0]), float(coef[1])


def cmd_lifetime(cfg: ExperimentConfig, out_dir: str, n_threads: int) -> int:
    params = _preset_params(cfg)
    grid = cfg.lifetime.t_r_grid_s
    rows = []
    fit_rows = []
    for p_idx, preset in enumerate(cfg.lifetime.presets):
        ts, zs, es = [], [], []
        for t_idx, t_r in enumerate(grid):
            seed = cfg.master_seed + 1 + p_idx * len(grid) + t_idx
            steps = preset_sequence(preset, t_r, params)
            results = run_shots(steps, cfg.noise, cfg.lifetime.n_shots, seed, n_threads)
            est = estimate_zeta(
                results, cfg.s0, cfg.c_in, cfg.noise.readout_var,
                subtract_readout_variance=cfg.lifetime.subtract_readout_variance,
            )
            rows.append((preset, _fmt(t_r), _fmt(est.zeta), _fmt(est.stderr), _fmt(est.contrast)))
            if t_r <= cfg.lifetime.fit_t_max_s:
                ts.append(t_r)
                zs.append(est.zeta)
                es.append(est.stderr)
        zeta0, curvature = _quadratic_fit(ts, zs, es)
        var_omega_fit = curvature / (2.0 * cfg.s0 * cfg.c_in)
        fit_rows.append((preset, _fmt(zeta0), _fmt(var_omega_fit)))

    # thread count deliberately absent from the header: it must never
    # change the bytes of the output
    header = _header_lines(cfg, "lifetime")
    _write_csv(
        os.path.join(out_dir, "lifetime.csv"), header,
        ("preset", "t_r_s", "zeta", "zeta_stderr", "contrast"), rows,
    )
    _write_csv(
        os.path.join(out_dir, "lifetime_fit.csv"), header,
        ("preset", "zeta0_fit", "var_omega_fit_rad2_per_s2"), fit_rows,
    )
    return 0


def cmd_allan(cfg: ExperimentConfig, out_dir: str) -> int:
    clk = cfg.clock
    taus = np.asarray(clk.tau_grid_cycles, dtype=float) * clk.t_cycle_s
    rows = []
    extra = [
        "estimator = overlapping_allan",
        "ci = chi2_edf_symmetric_half_width",
        "drift_model = ornstein_uhlenbeck",
        "phase_estimator = asin_clamped",
        f"duty_factor = {clk.t_r_s / clk.t_cycle_s!r}",
    ]
    for state_idx, input_state in enumerate(clk.input_states):
        config = ClockConfig(
            omega0=clk.omega0,
            t_r=clk.t_r_s,
            t_cycle=clk.t_cycle_s,
            n_cycles=clk.n_cycles,
            input_state=input_state,
            s0=clk.s0,
            contrast=clk.contrast,
            c_in=clk.c_in,
            contrast_factor=clk.contrast_factor,
            excess_area=clk.excess_area,
            zeta_net=clk.zeta_net,
            noise=clk.noise,
        )
        record = run_clock(config, cfg.master_seed + _SEED_CLOCK + state_idx)
        curve = allan_deviation(record, taus)
        extra.append(f"{input_state}.n_fringe_excursions = {record.n_fringe_excursions}")
        for tau, sig, ci in zip(curve.taus, curve.sigma, curve.ci):
            rows.append((input_state, _fmt(tau), _fmt(sig), _fmt(sig - ci), _fmt(sig + ci)))

    ref_cfg = ClockConfig(
        omega0=clk.omega0, t_r=clk.t_r_s, t_cycle=clk.t_cycle_s,
        n_cycles=clk.n_cycles, s0=clk.s0,
    )
    sql = sql_reference(ref_cfg)
    for tau in taus:
        s = float(sql(tau))
        rows.append(("sql_reference", _fmt(tau), _fmt(s), _fmt(s), _fmt(s)))
    gain = math.sqrt(clk.zeta_net)
    for tau in taus:
        s = float(sql(tau)) * gain
        rows.append(("squeezed_reference", _fmt(tau), _fmt(s), _fmt(s), _fmt(s)))

    header = _header_lines(cfg, "allan", extra)
    _write_csv(
        os.path.join(out_dir, "allan.csv"), header,
        ("input_state", "tau_s", "sigma", "ci_lo", "ci_hi"), rows,
    )
    return 0


def cmd_oracle_check(cfg: ExperimentConfig, out_dir: str) -> int:
    # identity case first: no twisting, Gaussian and exact must agree to
    # numerical precision
    worst_identity = 0.0
    for spin in cfg.oracle.spins:
        mom = moments(dicke_css(spin, math.pi / 2.0, 0.0))
        worst_identity = max(worst_identity, abs(zeta_from_moments(mom, spin) - 1.0))
    rows = compare_shear_to_exact(cfg.oracle.spins, cfg.oracle.q_values, cfg.oracle.warn_q)

    csv_rows = []
    enforced_max = 0.0
    failed = worst_identity > 1e-9
    print(f"identity (mu=0) max |zeta - 1|: {worst_identity:.3e} (tolerance 1e-9)")
    print(f"{'spin':>6} {'q_eff':>7} {'mu':>12} {'zeta_gauss':>12} {'zeta_exact':>12} {'rel_disc':>10}")
    for row in rows:
        flag = " warn-only" if row.warn_only else ""
        print(
            f"{row.spin:6.1f} {row.q_eff:7.3f} {row.mu:12.5e} "
            f"{row.zeta_gaussian:12.6f} {row.zeta_exact:12.6f} {row.rel_discrepancy:10.5f}{flag}"
        )
        if not row.warn_only:
            enforced_max = max(enforced_max, row.rel_discrepancy)
            if row.rel_discrepancy > cfg.oracle.tolerance:
                failed = True
        csv_rows.append((
            _fmt(row.spin), _fmt(row.q_eff), _fmt(row.mu), _fmt(row.zeta_gaussian),
            _fmt(row.zeta_exact), _fmt(row.rel_discrepancy), str(int(row.warn_only)),
        ))
    print(f"max enforced relative discrepancy: {enforced_max:.5f} "
          f"(tolerance {cfg.oracle.tolerance})")

    header = _header_lines(cfg, "oracle-check")
    _write_csv(
        os.path.join(out_dir, "oracle.csv"), header,
        ("spin", "q_eff", "mu", "zeta_gaussian", "zeta_exact", "rel_discrepancy", "warn_only"),
        csv_rows,
    )
    if failed:
        print("oracle-check: FAIL", file=sys.stderr)
        return 3
    print("oracle-check: OK")
    return 0


def cmd_noise_selftest(cfg: ExperimentConfig, out_dir: str) -> int:
    st = cfg.selftest
    rows = []
    failed = False
    cases = (
        ("white", white_frequency_noise, st.white_sigma, st.white_tau_cycles,
         -0.5, st.white_slope_tolerance, _SEED_SELFTEST_WHITE),
        ("random_walk", random_walk_frequency_noise, st.rw_step_sigma, st.rw_tau_cycles,
         +0.5, st.rw_slope_tolerance, _SEED_SELFTEST_RW),
    )
    for name, gen, amp, cycles, target, tol, offset in cases:
        rng = np.random.default_rng([cfg.master_seed + offset, 0])
        record = FrequencyRecord(y=gen(st.n_samples, amp, rng), t_cycle=1.0)
        curve = allan_deviation(record, np.asarray(cycles, dtype=float))
        slope = fit_loglog_slope(curve.taus, curve.sigma)
        ok = abs(slope - target) <= tol
        failed = failed or not ok
        print(f"{name}: slope {slope:+.4f} target {target:+.1f} +- {tol} -> "
              f"{'ok' if ok else 'FAIL'}")
        for tau, sig, ci in zip(curve.taus, curve.sigma, curve.ci):
            rows.append((name, _fmt(tau), _fmt(sig), _fmt(sig - ci), _fmt(sig + ci)))

    header = _header_lines(cfg, "noise-selftest")
    _write_csv(
        os.path.join(out_dir, "selftest.csv"), header,
        ("noise_type", "tau_s", "sigma", "ci_lo", "ci_hi"), rows,
    )
    return 3 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="squeezeclock",
        description="stochastic simulator of a squeezed-spin Ramsey clock",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("lifetime", "squeezing parameter vs interrogation time for all presets"),
        ("allan", "clock Allan deviation with SQL reference lines"),
        ("oracle-check", "Gaussian shear vs exact twisting comparison"),
        ("noise-selftest", "Allan estimator slopes on synthetic noise"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", default=None, help="TOML config file")
        p.add_argument("--seed", metavar="N", type=int, default=None, help="override master seed")
        p.add_argument("--out", metavar="DIR", default=None, help="override output directory")
        p.add_argument("--threads", metavar="N", type=int, default=1,
                       help="worker threads (speed only, never results)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return 2

    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    if args.command == "lifetime":
        return cmd_lifetime(cfg, out_dir, args.threads)
    if args.command == "allan":
        return cmd_allan(cfg, out_dir)
    if args.command == "oracle-check":
        return cmd_oracle_check(cfg, out_dir)
    return cmd_noise_selftest(cfg, out_dir)


if __name__ == "__main__":
    sys.exit(main())
