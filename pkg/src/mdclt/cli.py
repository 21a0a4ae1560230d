"""Command-line runner: ``mdclt <command> [options]``.

Exit codes: 0 pass, 1 statistical failure, 2 model error (unstable or
overflowing model), 3 numerical non-convergence, 4 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from mdclt import __version__
from mdclt import matrix_core as mc
from mdclt.ar_process import ArParams, check_stable, companion, sigma_series
from mdclt.errors import ConfigError, MdcltError, NonConvergence, SimulationOverflow, Unstable
from mdclt.innovations import InnovationSpec
from mdclt.mda_diagnostics import report_csv_header
from mdclt.stable_test import (
    DECAY_CSV_HEADER,
    SCHEMA_VERSION,
    AtomAtZero,
    Conditioning,
    Initial,
    McConfig,
    StationaryContinuous,
    Thresholds,
    ZeroStartContinuous,
    condition_rows,
    decay_csv_rows,
    dumps,
    omega_rank_demo,
    replication_path,
    run_experiment,
)

EXIT_PASS, EXIT_FAIL, EXIT_MODEL, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3, 4


# --------------------------------------------------------------------------
# config schema (version 1)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Strict):
    theta: list[float] = Field(min_length=1, max_length=mc.MAX_DIM)


class InnovationSection(_Strict):
    kind: Literal["normal", "rademacher", "uniform", "three_point", "asym_two_point"]
    scale: float = 1.0
    p0: float = 0.0
    a: float = 1.0
    b: float = 1.0


class ConditioningSection(_Strict):
    kind: Literal["sign_z1", "first_coord_u0_positive", "u0_in_ball"] = "sign_z1"
    radius: float = 1.0


class InitialSection(_Strict):
    kind: Literal["zero", "fixed", "stationary"] = "zero"
    vector: list[float] = []
    tol: float = 1e-10


class ThresholdSection(_Strict):
    cov_rel: float = 0.15
    selfnorm_rel: float = 0.10
    alpha: float = 0.01
    negative_control_p: float = 1e-6
    decay: dict[str, float] = {"clb2": 1e-3}


class RankDemoSection(_Strict):
    p0: float = 0.5
    pU0: float = 1.0
    tol: float = 1e-10


class ExperimentConfig(_Strict):
    schema_version: Literal[1]
    model: ModelSection
    innovation: InnovationSection
    n_grid: list[int] = Field(min_length=1)
    replications: int = Field(ge=2)
    seed: int = Field(ge=0, lt=2**64)
    conditioning: ConditioningSection = ConditioningSection()
    truncation_a: float = 1.0
    eps_grid: list[float] = Field(default=[0.1], min_length=1)
    initial: InitialSection = InitialSection()
    thresholds: ThresholdSection = ThresholdSection()
    conditions: bool = True
    workers: int = Field(default=1, ge=1)
    out: Optional[str] = None
    formats: list[Literal["json", "csv"]] = ["json", "csv"]
    rank_demo: RankDemoSection = RankDemoSection()

    def to_mc(self, seed: int | None = None) -> McConfig:
        spec = InnovationSpec(**self.innovation.model_dump())
        return McConfig(
            model=ArParams(tuple(self.model.theta)),
            innovation=spec,
            n_grid=tuple(self.n_grid),
            replications=self.replications,
            seed=self.seed if seed is None else seed,
            conditioning=Conditioning(self.conditioning.kind, self.conditioning.radius),
            truncation_a=self.truncation_a,
            eps_grid=tuple(self.eps_grid),
            initial=Initial(self.initial.kind, tuple(self.initial.vector), self.initial.tol),
            thresholds=Thresholds(
                cov_rel=self.thresholds.cov_rel,
                selfnorm_rel=self.thresholds.selfnorm_rel,
                alpha=self.thresholds.alpha,
                negative_control_p=self.thresholds.negative_control_p,
                decay=tuple(sorted(self.thresholds.decay.items())),
            ),
            conditions=self.conditions,
        )


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a config file; every problem becomes a ConfigError."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = [f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()]
        raise ConfigError(f"{path}: invalid config\n  " + "\n  ".join(lines)) from None


# --------------------------------------------------------------------------
# output helpers


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    out = Path(args.out or (cfg.out if cfg and cfg.out else "mdclt-out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _workers(args, cfg: ExperimentConfig) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("MDCLT_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MDCLT_WORKERS must be an integer, got {env!r}") from None
    return cfg.workers


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _write_json(path: Path, obj) -> None:
    path.write_text(dumps(obj), encoding="utf-8")


def _header(mc_cfg: McConfig | None, digest: str | None = None) -> dict:
    return {
        "config_hash": digest if mc_cfg is None else mc_cfg.digest(),
        "seed": None if mc_cfg is None else mc_cfg.seed,
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
    }


def _load(args) -> tuple[ExperimentConfig, McConfig]:
    cfg = load_config(args.config)
    return cfg, cfg.to_mc(args.seed)


# --------------------------------------------------------------------------
# commands


def cmd_compute_sigma(args) -> int:
    p = ArParams(tuple(args.theta))
    if args.d is not None and args.d != p.d:
        raise ConfigError(f"--d {args.d} does not match {p.d} coefficients")
    rho = check_stable(p)
    res = sigma_series(p, tol=args.tol)
    b = companion(p)
    consts = mc.stability_constants(b)
    itilde = np.zeros((p.d, p.d))
    itilde[0, 0] = 1.0
    lyap = mc.solve_lyapunov(b, itilde)
    digest = hashlib.sha256(json.dumps({"theta": list(p.theta), "tol": args.tol}).encode()).hexdigest()
    report = {
        "header": _header(None, digest),
        "theta": list(p.theta),
        "spectral_radius": rho,
        "sigma": res.sigma,
        "sigma_inv": mc.inverse(res.sigma),
        "sigma_sqrt": mc.psd_sqrt(res.sigma),
        "sigma_inv_sqrt": mc.inverse_sqrt(res.sigma),
        "head": res.head,
        "terms_used": res.terms_used,
        "tail_bound": res.tail_bound,
        "kappa1": consts.kappa1,
        "kappa2": consts.kappa2,
        "kappa3": consts.kappa3,
        "kappa_tail_bound": consts.tail_bound,
        "lyapunov_sigma": lyap,
        "lyapunov_max_abs_diff": float(np.max(np.abs(lyap - res.sigma))),
    }
    text = dumps(report)
    if args.out:
        (_out_dir(args) / "sigma.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_PASS


def _statistics_rows(summary, d: int):
    for rec in summary.records:
        sn = rec["selfnorm"] if rec["selfnorm"] is not None else [None] * d
        yield [rec["r"], rec["n"], int(rec["gram_pd"]), rec["w"], rec["z1"]] + rec["clt"] + sn


def cmd_verify_clt(args) -> int:
    cfg, mcc = _load(args)
    out = _out_dir(args, cfg)
    summary = run_experiment(mcc, workers=_workers(args, cfg))
    d = mcc.model.d
    if "json" in cfg.formats:
        (out / "summary.json").write_text(summary.to_json(), encoding="utf-8")
    if "csv" in cfg.formats:
        header = ["r", "n", "gram_pd", "w", "z1"] + [f"clt_{j + 1}" for j in range(d)]
        header += [f"selfnorm_{j + 1}" for j in range(d)]
        _write_csv(out / "statistics.csv", header, _statistics_rows(summary, d))
        mix_rows = []
        for h in summary.per_n:
            for t in h["mixing"].get("tests", []):
                mix_rows.append([h["n"], t["bucket"], t["component"], t["n_bucket"], t["n_rest"], t["statistic"], t["p_value"]])
        _write_csv(out / "mixing.csv", ["n", "bucket", "component", "n_bucket", "n_rest", "statistic", "p_value"], mix_rows)
        if summary.decay is not None:
            _write_csv(out / "decay.csv", DECAY_CSV_HEADER, decay_csv_rows(summary.decay))
    verdict = summary.verdict
    for name, ok in verdict["checks"].items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    print(f"verdict: {'PASS' if verdict['passed'] else 'FAIL'}")
    return EXIT_PASS if verdict["passed"] else EXIT_FAIL


def cmd_diagnose_conditions(args) -> int:
    cfg, mcc = _load(args)
    out = _out_dir(args, cfg)
    workers = _workers(args, cfg)
    if len(mcc.n_grid) < 3:
        raise ConfigError("diagnose-conditions needs an n_grid with at least three horizons")
    mcc = replace(mcc, conditions=True)
    summary = run_experiment(mcc, workers=workers, audit=True)
    report = {"header": summary.header, "decay": summary.decay, "audit": summary.audit}
    _write_json(out / "conditions.json", report)
    _write_csv(out / "decay.csv", DECAY_CSV_HEADER, decay_csv_rows(summary.decay))
    _write_csv(out / "conditions.csv", ["r"] + report_csv_header(mcc.model.d), condition_rows(mcc, workers))
    violations = summary.audit["violations"]
    for v in violations[:20]:
        print(f"audit check {v['check']} violated: r={v['r']} n={v['n']} eps={v['eps']} k={v['k']}")
    print(f"audit violations: {len(violations)}")
    for name, row in summary.decay["statistics"].items():
        print(f"{name}: {'PASS' if row['passed'] else 'FAIL'} medians={row['median']}")
    ok = not violations and summary.decay["passed"]
    print(f"verdict: {'PASS' if ok else 'FAIL'}")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_rank_demo(args) -> int:
    cfg, mcc = _load(args)
    out = _out_dir(args, cfg)
    rd = cfg.rank_demo
    case = {
        "atom_at_zero": lambda: AtomAtZero(rd.p0, rd.pU0),
        "zero_start_continuous": ZeroStartContinuous,
        "stationary_continuous": lambda: StationaryContinuous(rd.tol),
    }[args.case]()
    rep = omega_rank_demo(case, mcc, workers=_workers(args, cfg))
    _write_json(out / "omega.json", {"header": _header(mcc), **rep.to_dict()})
    rows = zip(rep.n, rep.frequency, rep.bound, rep.bound_ok)
    _write_csv(out / "omega.csv", ["n", "frequency", "bound", "bound_ok"], rows)
    for n, f, ok in zip(rep.n, rep.frequency, rep.bound_ok):
        print(f"n={n} P(Omega_n)={f:.6f} {'ok' if ok else 'VIOLATED'}")
    print(f"monotone violations: {rep.monotone_violations}")
    print(f"verdict: {'PASS' if rep.passed else 'FAIL'}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_simulate(args) -> int:
    cfg, mcc = _load(args)
    out = _out_dir(args, cfg)
    path = replication_path(mcc, args.replication, args.n)
    d = path.d
    rows = ([k, y, "" if k <= 0 else path.z[k - 1]] for k, y in zip(range(-d + 1, path.n + 1), path.y))
    _write_csv(out / f"path_r{args.replication}.csv", ["k", "Y_k", "Z_k"], rows)
    _write_json(out / f"path_r{args.replication}.json", {"header": _header(mcc), "replication": args.replication, "n": path.n})
    return EXIT_PASS


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdclt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mdclt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment config JSON (schema version 1)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="worker processes (fallback: MDCLT_WORKERS)")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("compute-sigma", help="limit covariance and stability constants for theta")
    p.add_argument("--theta", type=float, nargs="+", required=True)
    p.add_argument("--d", type=int)
    p.add_argument("--tol", type=float, default=1e-13)
    common(p, config=False)
    p.set_defaults(func=cmd_compute_sigma)

    p = sub.add_parser("verify-clt", help="Monte Carlo check of both normalisations")
    common(p)
    p.set_defaults(func=cmd_verify_clt)

    p = sub.add_parser("diagnose-conditions", help="condition-statistic decay and inequality audit")
    common(p)
    p.set_defaults(func=cmd_diagnose_conditions)

    p = sub.add_parser("rank-demo", help="frequency of a positive definite Gram matrix")
    p.add_argument("--case", required=True, choices=["atom_at_zero", "zero_start_continuous", "stationary_continuous"])
    common(p)
    p.set_defaults(func=cmd_rank_demo)

    p = sub.add_parser("simulate", help="dump one replication as CSV (k, Y_k, Z_k)")
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--n", type=int, help="horizon (default: largest n in the grid)")
    common(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Unstable as exc:
        print(f"error: {exc} (rho={exc.rho:.12g})", file=sys.stderr)
        return EXIT_MODEL
    except SimulationOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MdcltError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
