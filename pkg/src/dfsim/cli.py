"""Command-line front end.

Subcommands: run (play a scenario from a JSON config and write a
transcript), verify (re-check a transcript), sweep (grid over eps /
seed / N with a summary CSV and figure), export (capital curves as CSV
plus a rendered PNG).  Exit codes: 0 success, 1 invariant or
verification failure, 2 usage/config/parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .adversaries import (
    RngPolicy,
    bin_calibration_sceptic,
    k29_kernel_sceptic,
    linear_sceptic,
    random_valid_sceptic,
    reality_strategy,
)
from .errors import ConfigError, DfsimError, ParseError, SchemaVersionMismatch
from .protocol import DefensiveForecaster, GameConfig, run_game
from .transcript import read, verify, write
from . import plotting

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SWEEP_CAP = 256


# --- spec-string parsing ----------------------------------------------------


def _kv(args_str):
    out = {}
    for part in args_str.split(","):
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_sceptic(spec, seed):
    """e.g. "linear:c=0,1", "bins:8:0.25", "k29:eta=0.1,sigma=0.2",
    "random" or "random:7"."""
    head, _, rest = spec.partition(":")
    try:
        if head == "linear":
            if not rest.startswith("c="):
                raise ConfigError(f"linear sceptic needs c=..., got {spec!r}")
            return linear_sceptic([float(x) for x in rest[2:].split(",")])
        if head == "bins":
            nbins, frac = rest.split(":")
            return bin_calibration_sceptic(int(nbins), float(frac))
        if head == "k29":
            kv = _kv(rest)
            return k29_kernel_sceptic(float(kv["eta"]), float(kv["sigma"]))
        if head == "random":
            return random_valid_sceptic(int(rest) if rest else seed)
    except (KeyError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad sceptic spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown sceptic {spec!r}")


def parse_reality(spec, seed):
    """e.g. "iid:0.7,0.3", "adversarial", "scripted:1,0,1"."""
    head, _, rest = spec.partition(":")
    try:
        if head == "iid":
            return reality_strategy("iid",
                                    dist=[float(x) for x in rest.split(",")],
                                    seed=seed)
        if head == "adversarial":
            return reality_strategy("adversarial_argmax")
        if head == "scripted":
            return reality_strategy("scripted",
                                    script=[int(x) for x in rest.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad reality spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown reality {spec!r}")


def parse_rng(spec, seed):
    """e.g. "rng:faithful:42", "faithful", "adversarial"."""
    parts = spec.split(":")
    if parts and parts[0] == "rng":
        parts = parts[1:]
    if not parts:
        raise ConfigError(f"empty rng spec {spec!r}")
    if parts[0] == "faithful":
        s = int(parts[1]) if len(parts) > 1 else seed
        return RngPolicy.faithful(s)
    if parts[0] == "adversarial":
        return RngPolicy.adversarial()
    raise ConfigError(f"unknown rng {spec!r}")


# --- config -----------------------------------------------------------------

REQUIRED = ("game", "M", "N", "sceptic", "reality")


def load_config(path, seed_override=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON "
                          f"(line {exc.lineno}): {exc.msg}") from exc
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"config missing keys {missing}")
    if seed_override is not None:
        raw["seed"] = seed_override
    if raw["N"] < 0 or raw["M"] < 2:
        raise ConfigError(f"need N >= 0 and M >= 2, got N={raw['N']} M={raw['M']}")
    sched = raw.get("eps_n_schedule")
    if sched is not None:
        vals = [v for k, v in sched.items() if k != "kind"]
        if any(not isinstance(v, (int, float)) or v < 0 for v in vals):
            raise ConfigError(f"bad eps_n_schedule {sched}")
    return raw


def _game_config(raw):
    kwargs = dict(game=raw["game"], M=raw["M"],
                  sceptic=str(raw["sceptic"]), reality=str(raw["reality"]),
                  rng=str(raw.get("rng", "faithful")),
                  seed=raw.get("seed"))
    for k in ("eps", "eps_c", "eps_n_schedule", "k0", "kmax"):
        if k in raw:
            kwargs[k] = raw[k]
    try:
        return GameConfig(**kwargs)
    except DfsimError as exc:
        raise ConfigError(str(exc)) from exc


def _execute(raw):
    cfg = _game_config(raw)
    seed = raw.get("seed", 0)
    # reality and the draw policy must not share a generator stream: with
    # the same seed their choice() calls are perfectly correlated and the
    # realized forecast tracks the outcome round after round
    reality_seed, draw_seed = np.random.SeedSequence(seed).spawn(2)
    sceptic = parse_sceptic(str(raw["sceptic"]), seed)
    reality = parse_reality(str(raw["reality"]), reality_seed)
    rng = parse_rng(str(raw.get("rng", "faithful")), draw_seed)
    return run_game(cfg, sceptic, DefensiveForecaster(cfg), reality, rng,
                    raw["N"]), cfg


# --- subcommands ------------------------------------------------------------


def cmd_run(config_path, out_path, seed_override=None):
    try:
        raw = load_config(config_path, seed_override)
        transcript, cfg = _execute(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write(transcript, out_path)
    v = transcript.verdict
    print(f"rounds={len(transcript.rounds)} supK={v.sup_K:.6g} "
          f"finalF={v.final_F:.6g} invariant_held={v.invariant_held} "
          f"forfeits={len(v.forfeits)}")
    for f in v.forfeits:
        print(f"forfeit: round {f['round']} {f['player']}: {f['reason']}")
    return EXIT_OK if v.invariant_held and not v.forfeits else EXIT_FAIL


def cmd_verify(transcript_path):
    try:
        t = read(transcript_path)
    except (ParseError, SchemaVersionMismatch) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = verify(t)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_FAIL


def _sweep_cell(args):
    raw, out_dir = args
    name = f"run_eps{raw['eps']:g}_seed{raw['seed']}_N{raw['N']}.jsonl"
    try:
        transcript, cfg = _execute(raw)
        write(transcript, Path(out_dir) / name)
        v = transcript.verdict
        return {"eps": raw["eps"], "seed": raw["seed"], "N": raw["N"],
                "supK": v.sup_K, "finalF": v.final_F,
                "held": v.invariant_held, "error": ""}
    except Exception as exc:  # keep other cells running
        return {"eps": raw["eps"], "seed": raw["seed"], "N": raw["N"],
                "supK": float("nan"), "finalF": float("nan"),
                "held": False, "error": str(exc)}


def cmd_sweep(config_path, out_dir, jobs=1, seed_override=None):
    try:
        raw = load_config(config_path, seed_override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    def as_list(v):
        return v if isinstance(v, list) else [v]

    eps_grid = as_list(raw.get("eps", 0.1))
    seed_grid = as_list(raw.get("seed", 0))
    n_grid = as_list(raw["N"])
    cells, seen = [], set()
    for eps in eps_grid:
        for seed in seed_grid:
            for N in n_grid:
                key = (eps, seed, N)
                if key in seen:
                    print(f"warning: duplicate grid cell {key} skipped",
                          file=sys.stderr)
                    continue
                seen.add(key)
                cells.append({**raw, "eps": eps, "seed": seed, "N": N})
    if len(cells) > SWEEP_CAP:
        print(f"config error: {len(cells)} cells exceeds cap {SWEEP_CAP}",
              file=sys.stderr)
        return EXIT_USAGE

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(c, str(out)) for c in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]

    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["eps", "seed", "N", "supK",
                                           "finalF", "held", "error"])
        w.writeheader()
        w.writerows(rows)
    plotting.sweep_summary(rows, out / "summary.png")

    failures = [r for r in rows if r["error"]]
    for r in failures:
        print(f"cell eps={r['eps']} seed={r['seed']} N={r['N']} "
              f"failed: {r['error']}", file=sys.stderr)
    print(f"{len(rows)} cells -> {out / 'summary.csv'}")
    return EXIT_FAIL if failures else EXIT_OK


def cmd_export(transcript_path, csv_path):
    try:
        t = read(transcript_path)
    except (ParseError, SchemaVersionMismatch) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    eps = float(t.header.get("eps", 0.0))
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "K", "F", "(1+eps)F"])
        for r in t.rounds:
            w.writerow([r.n, format(r.K, ".17g"), format(r.F, ".17g"),
                        format((1.0 + eps) * r.F, ".17g")])
    png_path = csv_path.with_suffix(".png")
    plotting.capital_curves(t.rounds, eps, png_path,
                            title=f"{t.header.get('game')} M={t.header.get('M')}")
    print(f"{len(t.rounds)} rows -> {csv_path}; figure -> {png_path}")
    return EXIT_OK


def main(argv=None):
    ap = argparse.ArgumentParser(prog="dfsim",
                                 description="defensive forecasting game simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="play a scenario and write a transcript")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed-override", type=int, default=None)

    p = sub.add_parser("verify", help="re-check a transcript's invariants")
    p.add_argument("transcript")

    p = sub.add_parser("sweep", help="grid of runs with a summary CSV/figure")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed-override", type=int, default=None)

    p = sub.add_parser("export", help="capital curves as CSV + PNG")
    p.add_argument("transcript")
    p.add_argument("--out", required=True)

    args = ap.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed_override)
    if args.command == "verify":
        return cmd_verify(args.transcript)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.out, jobs=args.jobs,
                         seed_override=args.seed_override)
    if args.command == "export":
        return cmd_export(args.transcript, args.out)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
