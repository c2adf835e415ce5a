"""Command-line front-end: fit, dimtest, simulate, and path.

Human-readable tables by default; `--format structured` emits line-delimited
JSON records (one object per line, each with a "record" field) that
round-trip exactly and are what the test suite parses.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .cancor import dimension_test, fit_from_moments
from .data import Dataset
from .errors import (ConfigError, DataError, DataFormatError, NumericalError)
from .moments import moments, standardize
from .splines import SplineConfig, design_matrix, make_basis
from .studies import (PipelineSettings, StudySpec, run_pipeline, run_study)


@dataclass
class RunConfig:
    order: int = 3
    knots: int = 4
    alpha_level: float = 0.005
    delta_t: float = 0.05
    test_level: float = 0.05
    k_override: int | None = None
    seed: int = 1234
    input_path: str | None = None
    output_path: str | None = None
    output_format: str = "table"
    response: str | None = None

    def settings(self) -> PipelineSettings:
        return PipelineSettings(order=self.order, knots=self.knots,
                                alpha_level=self.alpha_level,
                                delta_t=self.delta_t,
                                test_level=self.test_level)


def load_csv(path: str, response: str | None = None) -> Dataset:
    """Read a comma-separated file with a header row into a Dataset.

    The response column is selected by name (default: the first column);
    all remaining columns become predictors. Any non-numeric cell is an
    error naming the offending file line.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataFormatError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if response is None:
        response = header[0]
    if response not in header:
        raise DataFormatError(
            f"response column {response!r} not found in header {header}")
    y_col = header.index(response)

    parsed = []
    bad_lines = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            bad_lines.append(line_no)
            continue
        try:
            parsed.append([float(cell) for cell in row])
        except ValueError:
            bad_lines.append(line_no)
    if bad_lines:
        shown = ", ".join(str(b) for b in bad_lines[:10])
        raise DataFormatError(
            f"non-numeric or malformed row(s) at line(s) {shown} of {path}")
    if len(parsed) < 2:
        raise DataFormatError(f"{path} has fewer than 2 complete data rows")

    arr = np.asarray(parsed, dtype=float)
    x_cols = [j for j in range(len(header)) if j != y_col]
    return Dataset(y=arr[:, y_col], x=arr[:, x_cols],
                   names=[header[j] for j in x_cols], response_name=response)


class _Emitter:
    def __init__(self, fmt: str, out_path: str | None):
        self.fmt = fmt
        self.lines: list[str] = []
        self.out_path = out_path

    def record(self, kind: str, **fields):
        if self.fmt == "structured":
            payload = {"record": kind, **fields}
            self.lines.append(json.dumps(payload, sort_keys=True))

    def text(self, line: str = ""):
        if self.fmt == "table":
            self.lines.append(line)

    def flush(self):
        body = "\n".join(self.lines) + "\n"
        if self.out_path:
            with open(self.out_path, "w", encoding="utf-8") as fh:
                fh.write(body)
        else:
            sys.stdout.write(body)


def _floats(v) -> list[float]:
    return [float(x) for x in np.asarray(v).ravel()]


def _original_units(beta_std, sds) -> list[float]:
    raw = np.asarray(beta_std, dtype=float) / np.asarray(sds, dtype=float)
    nrm = np.linalg.norm(raw)
    if nrm > 0:
        raw = raw / nrm
        if raw[np.argmax(np.abs(raw))] < 0:
            raw = -raw
    return _floats(raw)


def cmd_fit(cfg: RunConfig) -> int:
    if cfg.k_override is not None and cfg.k_override < 1:
        raise ConfigError("no directions requested (K must be >= 1)")
    data = load_csv(cfg.input_path, response=cfg.response)
    result = run_pipeline(data, K=cfg.k_override, settings=cfg.settings())
    em = _Emitter(cfg.output_format, cfg.output_path)

    em.record("config", order=cfg.order, knots=cfg.knots,
              alpha_level=cfg.alpha_level, delta_t=cfg.delta_t,
              test_level=cfg.test_level, k_override=cfg.k_override,
              n=data.n, p=data.p, response=data.response_name)
    for i, g in enumerate(result.fit.gamma, start=1):
        em.record("gamma", i=i, value=float(g))
    em.record("dimension", k_used=result.k_used, k_hat=result.k_hat,
              overridden=cfg.k_override is not None)

    em.text(f"n = {data.n}, p = {data.p}, response = {data.response_name}")
    em.text("canonical correlations: "
            + ", ".join(f"{g:.4f}" for g in result.fit.gamma))
    em.text(f"directions used: {result.k_used}"
            + ("" if cfg.k_override is None else " (override)"))

    final = result.final
    for i, (dir_i, trace) in enumerate(
            zip(result.directions, final.traces), start=1):
        support = [int(j) for j in trace.support]
        names = [result.names[j] for j in support]
        em.record("direction", i=i, t_selected=float(dir_i.t_selected),
                  gamma_constrained=float(dir_i.gamma_c),
                  d0=int(trace.d0), support=names, support_idx=support)
        for rec in trace.records:
            em.record("filter_step", i=i, d=int(rec.d), r=float(rec.r),
                      bic=float(rec.bic), zeroed=bool(rec.zeroed))
        em.record("final_direction", i=i,
                  beta_std=_floats(final.beta_f[:, i - 1]),
                  beta_reported=_floats(final.reported[:, i - 1]),
                  beta_original=_original_units(
                      final.beta_f[:, i - 1], result.column_sds),
                  correlation=float(final.final_corr[i - 1]))
        em.text("")
        em.text(f"direction {i}: t = {dir_i.t_selected:.4f}, "
                f"constrained correlation = {dir_i.gamma_c:.4f}")
        em.text(f"  kept variables ({trace.d0}): {', '.join(names)}")
        em.text(f"  final correlation = {final.final_corr[i - 1]:.4f}")
        em.text("  reported direction: "
                + ", ".join(f"{result.names[j]}={final.reported[j, i - 1]:.3f}"
                            for j in support))
    em.flush()
    return 0


def _parse_knot_range(spec: str):
    s = str(spec).strip()
    try:
        if "-" in s[1:]:
            lo, hi = s.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo or lo < 0:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(s)]
    except ValueError:
        raise ConfigError(f"bad knot count or range {spec!r}") from None


def cmd_dimtest(cfg: RunConfig, knot_values) -> int:
    data = load_csv(cfg.input_path, response=cfg.response)
    x = standardize(data.x, data.names)
    em = _Emitter(cfg.output_format, cfg.output_path)
    em.text(f"{'knots':>6} {'k_hat':>6}")
    for kn in knot_values:
        basis = make_basis(data.y, SplineConfig(
            order=cfg.order, internal_knot_count=kn))
        P = design_matrix(basis, data.y)
        fit = fit_from_moments(moments(x, P))
        test = dimension_test(fit, data.n, level=cfg.test_level)
        em.record("dimtest", knots=int(kn), k_hat=int(test.k_hat))
        em.text(f"{kn:>6} {test.k_hat:>6}")
    em.flush()
    return 0


def cmd_simulate(cfg: RunConfig, study: int, n: int, reps: int) -> int:
    spec = StudySpec(study=study, n=n, replicates=reps, base_seed=cfg.seed)
    workers = int(os.environ.get("CCDR_WORKERS", "1"))
    report = run_study(spec, cfg.settings(), workers=workers)
    em = _Emitter(cfg.output_format, cfg.output_path)

    em.record("study_config", study=study, n=n, replicates=reps,
              base_seed=cfg.seed, order=cfg.order, knots=cfg.knots,
              alpha_level=cfg.alpha_level, delta_t=cfg.delta_t,
              k_used=spec.true_k)
    em.text(f"study {study}: n = {n}, {reps} replicate(s), "
            f"seed = {cfg.seed}")
    for rep, c in enumerate(report.counts):
        if c is not None:
            em.record("replicate", rep=rep, counts=c)
    for name in spec.metric_names:
        em.record("metric", name=name, mean=report.means[name],
                  se=report.ses[name])
        em.text(f"  {name}: {report.means[name]:.2f} "
                f"(SE {report.ses[name]:.2f})")
    if reps == 1:
        em.record("warning", message="single replicate: SE is 0 by definition")
        em.text("  warning: single replicate, SE is 0 by definition")
    if report.failures:
        em.record("warning",
                  message=f"{len(report.failures)} replicate(s) failed",
                  failed=[r for r, _ in report.failures])
        em.text(f"  warning: {len(report.failures)} replicate(s) failed "
                "and were excluded")
    em.flush()
    return 0


def cmd_path(cfg: RunConfig, direction: int) -> int:
    if direction < 1:
        raise ConfigError("direction index must be >= 1")
    data = load_csv(cfg.input_path, response=cfg.response)
    result = run_pipeline(data, K=direction, settings=cfg.settings())
    trace = result.path_traces[direction - 1]
    chosen = result.directions[direction - 1]
    em = _Emitter(cfg.output_format, cfg.output_path)

    em.record("path_config", direction=direction, t0=float(trace.t0),
              limit=float(trace.limit), delta_t=cfg.delta_t,
              alpha_level=cfg.alpha_level, stop_reason=trace.stop_reason)
    em.text(f"direction {direction}: t0 = {trace.t0:.4f}, "
            f"confidence limit = {trace.limit:.4f}")
    em.text(f"{'t':>8} {'gamma':>9} {'nonzero':>8}")
    for step in trace.steps:
        nz = int(np.sum(np.abs(step.beta) > 1e-8))
        em.record("path_step", t=float(step.t), gamma=float(step.gamma),
                  nonzero=nz, converged=bool(step.converged),
                  coefficients=_floats(step.beta))
        em.text(f"{step.t:>8.4f} {step.gamma:>9.4f} {nz:>8}")
    em.record("path_selected", t=float(chosen.t_selected),
              gamma=float(chosen.gamma_c),
              coefficients=_floats(chosen.beta_c))
    em.text(f"selected t = {chosen.t_selected:.4f}, "
            f"gamma = {chosen.gamma_c:.4f} ({trace.stop_reason})")
    em.flush()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccdr",
        description="Sparse dimension reduction by constrained canonical "
                    "correlation with a spline basis of the response.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, with_input=True):
        if with_input:
            sp.add_argument("input", help="CSV file with a header row")
            sp.add_argument("--response", default=None,
                            help="response column name (default: first)")
        sp.add_argument("--order", type=int, default=3)
        sp.add_argument("--knots", default="4",
                        help="internal knot count (dimtest accepts a range "
                             "like 0-5)")
        sp.add_argument("--alpha", type=float, default=0.005,
                        help="confidence level parameter for the t path")
        sp.add_argument("--dt", type=float, default=0.05)
        sp.add_argument("--level", type=float, default=0.05,
                        help="level of the sequential dimension tests")
        sp.add_argument("--seed", type=int, default=1234)
        sp.add_argument("--format", choices=["table", "structured"],
                        default="table")
        sp.add_argument("--out", default=None)

    sp_fit = sub.add_parser("fit", help="full estimation pipeline")
    common(sp_fit)
    sp_fit.add_argument("--k", type=int, default=None,
                        help="override the estimated dimensionality")

    sp_dim = sub.add_parser("dimtest",
                            help="dimensionality across knot counts")
    common(sp_dim)

    sp_sim = sub.add_parser("simulate", help="run a built-in study")
    common(sp_sim, with_input=False)
    sp_sim.add_argument("--study", type=int, required=True)
    sp_sim.add_argument("--n", type=int, default=120)
    sp_sim.add_argument("--reps", type=int, default=100)

    sp_path = sub.add_parser("path", help="trace one direction's t path")
    common(sp_path)
    sp_path.add_argument("--k", type=int, default=1,
                         help="direction index to trace")
    return parser


def _config_from(args) -> RunConfig:
    try:
        knots_single = int(str(args.knots).strip())
    except ValueError:
        knots_single = 4  # range form, consumed only by dimtest
    return RunConfig(order=args.order, knots=knots_single,
                     alpha_level=args.alpha, delta_t=args.dt,
                     test_level=args.level,
                     k_override=getattr(args, "k", None),
                     seed=args.seed,
                     input_path=getattr(args, "input", None),
                     output_path=args.out, output_format=args.format,
                     response=getattr(args, "response", None))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from(args)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "dimtest":
            return cmd_dimtest(cfg, _parse_knot_range(args.knots))
        if args.command == "simulate":
            return cmd_simulate(cfg, args.study, args.n, args.reps)
        if args.command == "path":
            return cmd_path(cfg, args.k if args.k is not None else 1)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


def entrypoint():
    raise SystemExit(main())
