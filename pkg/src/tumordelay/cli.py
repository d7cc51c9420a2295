"""Command-line front end.

Every command takes the same parameter flags. A parameter flag holds either
a single value or a sweep ``min:max:count`` (linear, or logarithmic with
``--log``). Output goes to ``<out>.csv`` (tables) and ``<out>.json``
(flat summaries); ``--format json`` puts the tables into the JSON file
instead.

Exit codes: 0 success, 1 failed property, 2 invalid input, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tumordelay import modes, radialsim, verify
from tumordelay.errors import ConvergenceError, DomainError, SimulationAborted
from tumordelay.profile import write_columns
from tumordelay.stationary import ModelParams, solve_r0, solve_stationary_delayed, stationary_report
from tumordelay.tau1 import rho1_evolve

EXIT_OK, EXIT_PROPERTY, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3

PARAM_KEYS = ("alpha", "sigma_bar", "sigma_tilde", "mu", "tau")
DEFAULTS = {"alpha": "1", "sigma_bar": "1", "sigma_tilde": "0.5", "mu": "1", "tau": "0",
            "t_end": "10", "dt": "0.005", "out": "out", "format": "csv", "seed": None,
            "r_init": None, "r0": None, "modes": "0,2,3,5,10", "jobs": "1", "log": "false",
            "inject_fault": None}


@dataclass(frozen=True)
class Sweep:
    lo: float
    hi: float
    count: int
    log: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise DomainError("sweep count must be at least 1")
        if self.hi < self.lo:
            raise DomainError("sweep range must satisfy min <= max")
        if self.log and self.lo <= 0:
            raise DomainError("log sweep needs a positive minimum")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lo])
        if self.log:
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


def parse_value(text: str, log: bool = False) -> Sweep:
    """A single number or ``min:max:count``."""
    parts = str(text).split(":")
    if len(parts) not in (1, 3):
        raise DomainError(f"expected a number or min:max:count, got {text!r}")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise DomainError(f"cannot parse {text!r} as a number or min:max:count") from None
    if len(nums) == 1:
        return Sweep(nums[0], nums[0], 1, False)
    if nums[2] != int(nums[2]):
        raise DomainError(f"sweep count must be an integer, got {parts[2]!r}")
    return Sweep(nums[0], nums[1], int(nums[2]), log)


@dataclass
class RunConfig:
    command: str
    sweeps: dict[str, Sweep]
    settings: dict[str, str] = field(default_factory=dict)

    @property
    def out(self) -> Path:
        return Path(self.settings["out"])

    @property
    def fmt(self) -> str:
        return self.settings["format"]

    def number(self, key: str) -> float | None:
        raw = self.settings.get(key)
        if raw is None:
            return None
        try:
            return float(raw)
        except ValueError:
            raise DomainError(f"{key} must be a number, got {raw!r}") from None

    def scalar(self, key: str) -> float:
        sw = self.sweeps[key]
        if sw.count != 1:
            raise DomainError(f"{self.command} does not sweep {key}")
        return sw.lo

    def params(self, **override) -> ModelParams:
        vals = {k: self.scalar(k) for k in PARAM_KEYS if k not in override}
        vals.update(override)
        return ModelParams(**vals)

    def swept(self) -> list[str]:
        return [k for k, sw in self.sweeps.items() if sw.count > 1]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tumordelay", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    for key in PARAM_KEYS:
        common.add_argument(f"--{key.replace('_', '-')}", dest=key, help=f"{key} value or min:max:count")
    common.add_argument("--r0", help="stationary radius sweep for threshold-map (replaces sigma_tilde)")
    common.add_argument("--r-init", dest="r_init", help="initial radius for simulate (default: stationary)")
    common.add_argument("--t-end", dest="t_end", help="final time")
    common.add_argument("--dt", help="time step")
    common.add_argument("--out", help="output path stem")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--seed", help="seed for randomized checks")
    common.add_argument("--log", action="store_const", const="true", help="log spacing for sweeps")
    common.add_argument("--jobs", help="worker processes for sweeps")
    common.add_argument("--config", help="key=value file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("stationary", parents=[common], help="stationary radii and profiles")
    sub.add_parser("threshold-map", parents=[common], help="stability threshold over a parameter grid")
    m = sub.add_parser("modes", parents=[common], help="mode rates and first-order amplitudes")
    m.add_argument("--modes", help="comma-separated mode numbers")
    sub.add_parser("simulate", parents=[common], help="radially symmetric simulation with delay")
    v = sub.add_parser("verify", parents=[common], help="run the property suite")
    v.add_argument("--inject-fault", dest="inject_fault", choices=sorted(verify.FAULTS))
    return parser


def make_config(argv: list[str] | None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    settings = dict(DEFAULTS)
    if ns.get("config"):
        try:
            settings.update(radialsim.load_config(ns["config"]))
        except OSError as exc:
            raise DomainError(f"cannot read config: {exc}") from None
    settings.update({k: v for k, v in ns.items() if v is not None and k not in ("command", "config")})
    log = str(settings["log"]).lower() in ("1", "true", "yes")
    sweeps = {k: parse_value(settings[k], log) for k in PARAM_KEYS}
    if settings.get("r0") is not None:
        sweeps["r0"] = parse_value(settings["r0"], log)
    if settings["format"] not in ("csv", "json"):
        raise DomainError("format must be csv or json")
    return RunConfig(ns["command"], sweeps, settings)


# --------------------------------------------------------------------------
# output

def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def _write_json(path: Path, obj) -> None:
    if isinstance(obj, dict):
        obj = {k: _jsonable(v) for k, v in obj.items()}
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)


def _emit(cfg: RunConfig, meta: dict, rows: list[dict] | None = None,
          columns: dict | None = None, extra: dict[str, dict] | None = None) -> list[Path]:
    """Write the summary and the table in the requested format; return the written paths."""
    stem = cfg.out
    written = []
    if columns is None and rows:
        columns = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    if cfg.fmt == "json":
        payload = {k: _jsonable(v) for k, v in meta.items()}
        if columns is not None:
            n = len(next(iter(columns.values())))
            payload["rows"] = [{k: _jsonable(float(columns[k][i])) for k in columns} for i in range(n)]
        _write_json(stem.with_suffix(".json"), payload)
        return [stem.with_suffix(".json")]
    stem.parent.mkdir(parents=True, exist_ok=True)
    _write_json(stem.with_suffix(".json"), meta)
    written.append(stem.with_suffix(".json"))
    if columns is not None:
        write_columns(stem.with_suffix(".csv"), columns)
        written.append(stem.with_suffix(".csv"))
    for suffix, cols in (extra or {}).items():
        p = stem.with_name(stem.name + suffix + ".csv")
        write_columns(p, cols)
        written.append(p)
    return written


def _parallel_map(func, items: list, jobs: int) -> list:
    """Ordered map; fans out to worker processes when ``jobs > 1``."""
    if jobs <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _param_grid(cfg: RunConfig) -> list[ModelParams]:
    axes = [cfg.sweeps[k].values() for k in PARAM_KEYS]
    grid = np.meshgrid(*axes, indexing="ij")
    return [ModelParams(**{k: float(g.flat[i]) for k, g in zip(PARAM_KEYS, grid)})
            for i in range(grid[0].size)]


# --------------------------------------------------------------------------
# commands

def _stationary_row(params: ModelParams) -> dict:
    return solve_stationary_delayed(params).to_dict()


def cmd_stationary(cfg: RunConfig) -> int:
    if not cfg.swept():
        report = solve_stationary_delayed(cfg.params())
        d = report.delayed
        extra = {"_profiles": report.profile_columns()}
        if report.params.tau > 0:
            extra["_delayed"] = {"r": d.nodes, "sigma": d.sigma, "sigma_delayed": d.sigma_delayed,
                                 "pressure": d.pressure, "pressure_gradient": d.pressure_gradient,
                                 "xi_back": d.xi_back}
        if cfg.fmt == "json":
            _emit(cfg, report.to_dict(), columns=report.profile_columns())
        else:
            _emit(cfg, report.to_dict(), extra=extra)
        return EXIT_OK
    rows = _parallel_map(_stationary_row, _param_grid(cfg), int(cfg.number("jobs")))
    _emit(cfg, {"row_count": len(rows), "swept": ",".join(cfg.swept())}, rows=rows)
    return EXIT_OK


def cmd_threshold_map(cfg: RunConfig) -> int:
    alphas = cfg.sweeps["alpha"].values()
    mu = cfg.scalar("mu")
    sigma_bar = cfg.scalar("sigma_bar")
    if "r0" in cfg.sweeps:
        r0s = cfg.sweeps["r0"].values()
        if np.any(r0s <= 0):
            raise DomainError("r0 must be positive")
        rows = modes.stability_map(alphas, r0s, mu, sigma_bar)
    else:
        rows = []
        for st in cfg.sweeps["sigma_tilde"].values():
            for a in alphas:
                r0 = solve_r0(ModelParams(float(a), sigma_bar, float(st), mu))
                row = modes.stability_map([a], [r0], mu, sigma_bar)[0]
                rows.append({"sigma_tilde": float(st), **row})
    r_crit = modes.critical_radius()
    for row in rows:
        row["above_critical_radius"] = int(row["r0"] > r_crit)
    meta = {"critical_radius": r_crit, "row_count": len(rows), "mu": mu, "sigma_bar": sigma_bar,
            "alpha_min": float(alphas[0]), "alpha_max": float(alphas[-1]), "alpha_count": len(alphas),
            "alpha_log_spacing": cfg.sweeps["alpha"].log}
    _emit(cfg, meta, rows=rows)
    return EXIT_OK


def _mode_numbers(text: str) -> list[int]:
    try:
        ns = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise DomainError(f"modes must be comma-separated integers, got {text!r}") from None
    if not ns or min(ns) < 0:
        raise DomainError("mode numbers must be nonnegative")
    return ns


def cmd_modes(cfg: RunConfig) -> int:
    params = cfg.params()
    report = stationary_report(params)
    ns = _mode_numbers(cfg.settings["modes"])
    t_end, dt = cfg.number("t_end"), cfg.number("dt")
    if not (t_end > 0 and dt > 0):
        raise DomainError("t_end and dt must be positive")
    t = np.linspace(0.0, t_end, int(round(t_end / dt)) + 1)
    ms = modes.mu_star(report.r0, params.alpha, params.sigma_bar)
    meta = {"r0": report.r0, "r1": report.r1, "mu_star": ms, "mu": params.mu, "t_end": t_end}
    cols: dict[str, list] = {"t": [], "n": [], "rho0_n": [], "rho1_n": [], "rho_n": []}
    for n in ns:
        mr = modes.mode_report(n, params.mu, report.r0, params.alpha, params.sigma_bar)
        traj = rho1_evolve(n, params, report, 1.0, 0.0, t)
        for key, val in mr.row().items():
            if key != "n":
                meta[f"mode{n}_{key}"] = val
        meta[f"mode{n}_rate_envelope"] = traj.rate_envelope
        meta[f"mode{n}_linear_coefficient"] = traj.linear_coefficient
        meta[f"mode{n}_forcing_coefficient"] = traj.forcing_coefficient
        cols["t"].extend(t)
        cols["n"].extend([n] * len(t))
        cols["rho0_n"].extend(traj.rho0)
        cols["rho1_n"].extend(traj.values)
        cols["rho_n"].extend(traj.composed(params.tau))
    _emit(cfg, meta, columns={k: np.asarray(v, dtype=float) for k, v in cols.items()})
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    params = cfg.params()
    r_init = cfg.number("r_init")
    if r_init is None:
        r_init = solve_r0(params)
    t_end, dt = cfg.number("t_end"), cfg.number("dt")
    result = radialsim.run(params, r_init, t_end, dt)
    meta = {**result.summary(), "radius_init": r_init}
    _emit(cfg, meta, columns={"t": result.t, "radius": result.radius,
                              "boundary_pressure_gradient": result.boundary_gradient})
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    seed = cfg.settings.get("seed")
    results = verify.run_all(cfg.settings.get("inject_fault"), None if seed is None else int(seed))
    summary = verify.report(results)
    path = cfg.out.with_suffix(".json")
    _write_json(path, summary)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} {r.kind}={r.metric:.3e}")
    return EXIT_OK if summary["all_passed"] else EXIT_PROPERTY


HANDLERS = {
    "stationary": cmd_stationary,
    "threshold-map": cmd_threshold_map,
    "modes": cmd_modes,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = make_config(argv)
        return HANDLERS[cfg.command](cfg)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, SimulationAborted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
