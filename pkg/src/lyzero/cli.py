"""Command-line interface: ``lyzero <command> ...``.

Exit status is 0 on success, 1 on errors, and 2 when ``verify`` finds a
computed verdict that contradicts the predicted Lee-Yang property.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _precision as P
from .engines import ENGINES, partition
from .modelspec import SpecError, load_model_spec
from .structure import bottleneck_matching
from .theorem import (
    bound_condition_i,
    bound_condition_ii,
    corollary_bounds,
    sharpness_scan,
    verify_theorem1,
)
from .zeros import DEFAULT_TOL, classify, find_zeros, zero_trajectory

COMMANDS = ("partition", "zeros", "structure", "bounds", "verify", "scan")
EXIT_OK, EXIT_ERROR, EXIT_MISMATCH = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    model_path: str | None = None
    engine: str = "auto"
    tolerance: float = DEFAULT_TOL
    out: str = "json"
    output_path: str | None = None
    threads: int = 1
    precision: str = P.DOUBLE
    beta: float | None = None
    kappa: float | None = None
    param: str = "theta"
    start: float | None = None
    stop: float | None = None
    steps: int = 11
    gnuplot: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.model_path is not None and not Path(self.model_path).exists():
            raise ValueError(f"model file not found: {self.model_path}")
        if self.gnuplot and not self.output_path:
            raise ValueError("--gnuplot needs --output so the script can reference the CSV")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    return repr(float(v))


def _json(data) -> str:
    return json.dumps(data, indent=2) + "\n"


def _partition_payload(cfg, spec):
    model = spec.build()
    poly = partition(model, cfg.engine, spec=spec.hierarchy(), precision=cfg.precision)
    if cfg.out == "csv":
        rows = [(m, _fmt(poly.coefficient(m))) for m in range(-poly.degree, poly.degree + 1)]
        return _csv_text(["m", "coeff"], rows)
    data = poly.to_dict()
    data["engine"] = cfg.engine
    data["n_sites"] = model.n
    data["log_prefactor"] = model.log_prefactor()
    return _json(data)


def _zeros_payload(cfg, spec):
    model = spec.build()
    poly = partition(model, cfg.engine, spec=spec.hierarchy(), precision=cfg.precision)
    zs = find_zeros(poly, precision=cfg.precision)
    verdict = classify(zs, poly, cfg.tolerance)
    phase = np.angle(zs.roots)
    if cfg.out == "csv":
        rows = []
        for z, dev, ph in zip(zs.roots, zs.radial_deviation, phase):
            gamma = 1.0 / ph**2 if verdict.holds and ph > 0 else None
            rows.append((_fmt(z.real), _fmt(z.imag), _fmt(dev), _fmt(ph), _fmt(gamma)))
        return _csv_text(["re_z", "im_z", "abs_z_minus_1", "phase", "gamma"], rows)
    return _json({
        "roots": [[float(z.real), float(z.imag)] for z in zs.roots],
        "abs_z_minus_1": [float(v) for v in zs.radial_deviation],
        "beta_h": [[float(w.real), float(w.imag)] for w in zs.beta_h],
        "residual": zs.residual,
        "clusters": [[[c.real, c.imag], k] for c, k in zs.clusters],
        "verdict": verdict.to_dict(),
    })


def _scan(cfg, spec):
    if cfg.start is None or cfg.stop is None:
        raise ValueError("scan needs --from and --to")
    grid = [float(v) for v in np.linspace(cfg.start, cfg.stop, cfg.steps)]

    def family(v):
        return spec.with_param(cfg.param, v).build()

    traj = zero_trajectory(family, grid, tol=cfg.tolerance, precision=cfg.precision,
                           threads=cfg.threads, engine=cfg.engine)
    rows = [
        (_fmt(v), int(verdict.holds), _fmt(verdict.max_radial_deviation), _fmt(verdict.first_zero_phase))
        for v, _, verdict in traj
    ]
    if cfg.out == "csv":
        return _csv_text([cfg.param, "holds", "max_abs_z_minus_1", "first_zero_phase"], rows)
    data = {"param": cfg.param, "grid": grid, "holds": [bool(r[1]) for r in rows],
            "max_abs_z_minus_1": [v.max_radial_deviation for _, _, v in traj]}
    if cfg.param == "theta":
        data["sharpness"] = sharpness_scan(family, grid, tol=cfg.tolerance, engine=cfg.engine).to_dict()
    return _json(data)


def _bounds_payload(cfg):
    if cfg.beta is None or cfg.kappa is None:
        raise ValueError("bounds needs --beta and --kappa")
    bk = cfg.beta * cfg.kappa
    b1, b2 = bound_condition_i(bk), bound_condition_ii(bk)
    cor = corollary_bounds(cfg.beta, cfg.kappa)
    if cfg.out == "json":
        return _json({"beta_kappa": bk, "theta_bound_i": b1, "theta_bound_ii": b2,
                      "delta_max": cor.delta_max, "q_max": cor.q_max,
                      "delta_max_exceeds_half_kappa": cor.delta_max_exceeds_half_kappa})
    return (f"theta_bound_i {b1:.4f}\n"
            f"theta_bound_ii {b2:.4f}\n"
            f"delta_max {cor.delta_max:.4f}\n"
            f"q_max {cor.q_max:.4f}\n")


def _gnuplot_script(cfg) -> str:
    csv_path = cfg.output_path
    if cfg.command == "zeros":
        return (
            "set datafile separator ','\n"
            "set size ratio -1\n"
            "set key off\n"
            "set parametric\n"
            "set trange [0:2*pi]\n"
            f"plot cos(t), sin(t) lc rgb 'gray', '{csv_path}' every ::1 using 1:2 with points pt 7\n"
        )
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        f"plot '{csv_path}' using 1:2 with linespoints\n"
    )


def run(cfg: RunConfig) -> int:
    """Execute one command; artifacts go to ``cfg.output_path`` or stdout."""
    try:
        cfg.validate()
        status = EXIT_OK
        spec = load_model_spec(cfg.model_path) if cfg.model_path else None
        if cfg.command in ("partition", "zeros", "structure", "verify", "scan") and spec is None:
            raise ValueError(f"{cfg.command} needs a model file")
        if cfg.command == "partition":
            text = _partition_payload(cfg, spec)
        elif cfg.command == "zeros":
            text = _zeros_payload(cfg, spec)
        elif cfg.command == "structure":
            text = _json(bottleneck_matching(spec.build_coupling()).to_dict())
        elif cfg.command == "bounds":
            text = _bounds_payload(cfg)
        elif cfg.command == "verify":
            precision = "auto" if cfg.precision == P.DOUBLE else cfg.precision
            record = verify_theorem1(spec.build(), cfg.tolerance, cfg.engine, precision, spec.hierarchy())
            text = _json(record.to_dict())
            if not record.consistent:
                status = EXIT_MISMATCH
        else:
            text = _scan(cfg, spec)
    except (SpecError, ValueError, RuntimeError, OSError) as exc:
        print(f"lyzero: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
        if cfg.gnuplot:
            Path(cfg.gnuplot).write_text(_gnuplot_script(cfg))
    else:
        sys.stdout.write(text)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lyzero", description="Exact Lee-Yang zero laboratory")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--precision", choices=P.PRECISIONS, default=P.DOUBLE)
    common.add_argument("--output", dest="output_path", help="write results here instead of stdout")
    common.add_argument("--gnuplot", help="also write a gnuplot script that plots the CSV output")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", parents=[common], help="fugacity polynomial coefficients")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--engine", choices=ENGINES, default="auto")
    p.add_argument("--out", choices=("json", "csv"), default="json")

    p = sub.add_parser("zeros", parents=[common], help="zeros and Lee-Yang verdict")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--engine", choices=ENGINES, default="auto")
    p.add_argument("--tol", dest="tolerance", type=float, default=DEFAULT_TOL)
    p.add_argument("--out", choices=("json", "csv"), default="json")

    p = sub.add_parser("structure", parents=[common], help="pairing conditions of the coupling")
    p.add_argument("--model", dest="model_path", required=True)

    p = sub.add_parser("bounds", parents=[common], help="theta bounds for given beta and kappa")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--out", choices=("text", "json"), default="text")

    p = sub.add_parser("verify", parents=[common], help="check the predicted Lee-Yang property")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--engine", choices=ENGINES, default="auto")
    p.add_argument("--tol", dest="tolerance", type=float, default=DEFAULT_TOL)

    p = sub.add_parser("scan", parents=[common], help="verdicts along a parameter grid")
    p.add_argument("--family", dest="model_path", required=True)
    p.add_argument("--param", choices=("theta", "q", "beta"), default="theta")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--engine", choices=ENGINES, default="auto")
    p.add_argument("--tol", dest="tolerance", type=float, default=DEFAULT_TOL)
    p.add_argument("--out", choices=("json", "csv"), default="csv")
    return parser


def config_from_args(argv=None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    logging.basicConfig(level=logging.DEBUG if args.pop("verbose") else logging.WARNING)
    env_threads = os.environ.get("LYZERO_THREADS")
    if env_threads:
        args["threads"] = int(env_threads)
    return RunConfig(**args)


def main(argv=None) -> int:
    return run(config_from_args(argv))


if __name__ == "__main__":
    sys.exit(main())
