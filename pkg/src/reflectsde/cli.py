"""Command-line front end.

Subcommands:

* ``skorohod``: reflect a CSV path (columns t,y) and write columns t,x,k.
* ``simulate``: solve one reflected path and write columns t,X,L.
* ``decompose``: print the four-term split of S - I for one seeded path.
* ``study``: run a named Monte Carlo study, write its estimates and summary
  CSVs, exit 0 only if every threshold check passed.

All outputs are written atomically (temp file then rename), carry the
resolved config echo and a format-version line as leading ``#`` comments,
and contain no timestamps, so identical (binary, config, seed) reruns are
byte-identical. Exit codes: 0 success / all checks passed, 1 threshold
failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import FORMAT_VERSION, ConfigError, RunConfig, STUDY_NAMES, parse_config
from .paths import TimeGrid, make_dyadic_partition, make_fine_grid, sample_brownian
from .reflect import solve_reflected
from .skorohod import skorohod_map
from .stratonovich import decompose_error
from .studies import STUDY_RUNNERS, StudyReport


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _csv_text(meta: list[str], header: list[str], rows: list[list]) -> str:
    import io

    buf = io.StringIO()
    for line in meta:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _report_meta(cfg: RunConfig) -> list[str]:
    return [f"format = {FORMAT_VERSION}", *cfg.echo()]


def write_study_csvs(report: StudyReport, cfg: RunConfig, out_dir: Path) -> tuple[Path, Path]:
    meta = _report_meta(cfg)
    est_rows = [
        [report.study, e.cell, e.label, e.p, e.value, e.standard_error, e.n_paths, e.seed, e.n_nonfinite]
        for e in report.estimates
    ]
    est_path = out_dir / f"{report.study}.estimates.csv"
    _atomic_write_text(
        est_path,
        _csv_text(
            meta,
            ["study", "cell", "statistic", "p", "estimate", "stderr", "n_paths", "seed", "n_nonfinite"],
            est_rows,
        ),
    )
    sum_rows: list[list] = []
    for label, fit in report.fits:
        sum_rows.append(
            ["fit", label, fit.slope, fit.intercept, fit.r_squared, "", ""]
        )
    for chk in report.checks:
        sum_rows.append(
            ["check", chk.label, chk.value, "", "", chk.threshold, "pass" if chk.passed else "FAIL"]
        )
    sum_path = out_dir / f"{report.study}.summary.csv"
    _atomic_write_text(
        sum_path,
        _csv_text(
            meta,
            ["kind", "label", "value_or_slope", "intercept", "r_squared", "threshold", "status"],
            sum_rows,
        ),
    )
    return est_path, sum_path


def _load_config(args) -> RunConfig:
    text = ""
    if args.config is not None:
        text = Path(args.config).read_text()
    cfg = parse_config(text)
    overrides = {}
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    out_dir = getattr(args, "out_dir", None) or os.environ.get("REFLECTSDE_OUT_DIR")
    if out_dir:
        overrides["out_dir"] = out_dir
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    return cfg


def _cmd_skorohod(args) -> int:
    rows = []
    with open(args.input, newline="") as fh:
        rd = csv.reader(r for r in fh if not r.startswith("#"))
        header = next(rd)
        if [h.strip() for h in header[:2]] != ["t", "y"]:
            print("skorohod: input must have columns t,y", file=sys.stderr)
            return 2
        for rec in rd:
            rows.append((float(rec[0]), float(rec[1])))
    t = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    grid = TimeGrid(t)
    pair = skorohod_map(y, grid)
    out = Path(args.output)
    _atomic_write_text(
        out,
        _csv_text(
            [f"format = {FORMAT_VERSION}"],
            ["t", "x", "k"],
            [[float(ti), float(xi), float(ki)] for ti, xi, ki in zip(t, pair.x, pair.k)],
        ),
    )
    print(f"skorohod: wrote {out} ({t.size} knots, k_total={pair.k[-1]!r})")
    return 0


def _cmd_simulate(args, cfg: RunConfig) -> int:
    x0 = cfg.simulate["x0"] if args.x0 is None else args.x0
    if x0 < 0:
        print("simulate: x0 must be >= 0", file=sys.stderr)
        return 2
    grid = make_fine_grid(cfg.n_fine)
    b = sample_brownian(cfg.seed, cfg.simulate["path_index"], grid)
    rp = solve_reflected(x0, cfg.coefficients(), b)
    out = Path(args.output)
    _atomic_write_text(
        out,
        _csv_text(
            _report_meta(cfg),
            ["t", "X", "L"],
            [
                [float(t), float(x), float(l)]
                for t, x, l in zip(grid.knots, rp.state, rp.local_time)
            ],
        ),
    )
    print(
        f"simulate: wrote {out} (sigma={cfg.sigma}, x0={x0!r}, "
        f"X1={rp.state[-1]!r}, L1={rp.local_time[-1]!r})"
    )
    return 0


def _cmd_decompose(args, cfg: RunConfig) -> int:
    d = cfg.decompose
    x0 = d["x0"] if args.x0 is None else args.x0
    level = d["level"] if args.level is None else args.level
    grid = make_fine_grid(cfg.n_fine)
    b = sample_brownian(cfg.seed, d["path_index"], grid)
    rp = solve_reflected(x0, cfg.coefficients(), b)
    pi = make_dyadic_partition(level, grid)
    dec = decompose_error(rp, cfg.coefficients(), b, pi, d["t"])
    print(f"decompose: sigma={cfg.sigma} x0={x0!r} level={level} t={d['t']!r}")
    for name, v in (("a1", dec.a1), ("a2", dec.a2), ("a3", dec.a3), ("a4", dec.a4)):
        print(f"  {name} = {v!r}")
    print(f"  total (S - I) = {dec.total!r}")
    print(f"  identity residual = {dec.identity_residual!r}")
    return 0


def _cmd_study(args, cfg: RunConfig) -> int:
    name = args.name
    if name not in STUDY_RUNNERS:
        print(f"study: unknown study {name!r}; choose from {', '.join(STUDY_NAMES)}", file=sys.stderr)
        return 2
    report = STUDY_RUNNERS[name](cfg)
    out_dir = Path(cfg.out_dir)
    est_path, sum_path = write_study_csvs(report, cfg, out_dir)
    status = "PASS" if report.passed else "FAIL"
    n_bad = sum(1 for c in report.checks if not c.passed)
    print(
        f"study {name}: {status} ({len(report.checks)} checks, {n_bad} failing, "
        f"{len(report.estimates)} estimates) -> {est_path}, {sum_path}"
    )
    for c in report.checks:
        if not c.passed:
            print(f"  FAIL {c.label}: value {c.value!r} vs threshold {c.threshold!r} {c.detail}")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="reflectsde",
        description="Reflected-SDE simulation and Monte Carlo study harness on [0, 1]",
    )
    p.add_argument("--config", help="TOML config file (defaults apply when omitted)")
    p.add_argument("--workers", type=int, help="override run.workers")
    p.add_argument("--out-dir", help="override run.out_dir")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("skorohod", help="reflect a CSV path at 0")
    ps.add_argument("--input", required=True, help="CSV with columns t,y")
    ps.add_argument("--output", required=True, help="CSV to write with columns t,x,k")

    pm = sub.add_parser("simulate", help="solve one reflected path")
    pm.add_argument("--x0", type=float, default=None)
    pm.add_argument("--output", required=True, help="CSV to write with columns t,X,L")

    pd = sub.add_parser("decompose", help="print the four-term split of S - I")
    pd.add_argument("--x0", type=float, default=None)
    pd.add_argument("--level", type=int, default=None)

    pt = sub.add_parser("study", help="run a Monte Carlo study")
    pt.add_argument("name", choices=STUDY_NAMES)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as e:
        print(f"config error:\n{e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        if args.command == "skorohod":
            return _cmd_skorohod(args)
        if args.command == "simulate":
            return _cmd_simulate(args, cfg)
        if args.command == "decompose":
            return _cmd_decompose(args, cfg)
        if args.command == "study":
            return _cmd_study(args, cfg)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
