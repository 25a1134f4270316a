"""Command-line experiment runner.

Usage::

    python -m mdscm helmholtz --preset ex41-const
    python -m mdscm eigen --preset fig5-left --output out/
    python -m mdscm converge --config study.json --sweep 4 8 12

Settings are merged in the order preset, config file (flat JSON object),
``MDSCM_OUTPUT_DIR`` (output directory only), command-line flags; later
sources win. The whole configuration is validated before any computation
and every problem found is reported.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from mdscm.analysis import (
    MeshSpec,
    condition_number_l2,
    convergence_study,
    convergence_to_csv,
    eigenvalues,
    linf_error,
)
from mdscm.assembly import assemble_mdfdm, assemble_penalty
from mdscm.expr import ExprError, parse_order_expr
from mdscm.fracops import OrderField, OrderFieldError
from mdscm.jacobi import JacobiParams
from mdscm.solvers import (
    BurgersProblem,
    HelmholtzProblem,
    example41_rhs,
    example42_exact,
    example42_rhs,
    helmholtz_matrix,
    solve_burgers,
    solve_helmholtz,
)

OUTPUT_ENV = "MDSCM_OUTPUT_DIR"
SUBCOMMANDS = ("helmholtz", "burgers", "eigen", "cond", "converge")
MESH_KINDS = ("uniform", "graded", "geometric", "composite")
PROBLEMS = ("example41", "example42", "custom")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    def __init__(self, problems: list[str]) -> None:
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


# {{{ configuration


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    mesh: str = "uniform"
    M: int = 4
    N: int = 4
    q: float | None = None
    split: float | None = None
    M_geo: int = 0
    c: float = 0.0
    d: float = 0.0
    alpha: float | str = 1.5
    tau: float = 0.0
    lam: float = 0.0
    x_L: float = -1.0
    x_R: float = 1.0
    u_L: float = 0.0
    u_R: float = 0.0
    problem: str = "example41"
    f: str | None = None
    u0: str = "sin(pi*x)"
    epsilon: float = 1.0
    dt: float = 1.0e-3
    t_final: float = 1.0
    snapshots: tuple[float, ...] = ()
    penalize_first_step: bool = False
    penalize_explicit: bool = False
    sweep_var: str = "p"
    sweep: tuple[int, ...] = ()
    taus: tuple[float, ...] = ()
    delta: float | None = None
    L: int | None = None
    output: str = "mdscm-output"

    def order_field(self) -> OrderField:
        if isinstance(self.alpha, str):
            return OrderField.from_expression(self.alpha)
        return OrderField.constant(self.alpha)

    def mesh_spec(self, M: int | None = None) -> MeshSpec:
        return MeshSpec(
            kind=self.mesh,
            M=self.M if M is None else M,
            N=self.N,
            q=self.q,
            params=JacobiParams(self.c, self.d),
            split=self.split,
            M_geo=self.M_geo,
        )

    def assembly_kwargs(self) -> dict[str, Any]:
        return {"delta": self.delta, "L": self.L}


FIELD_TYPES = {
    "mesh": str, "M": int, "N": int, "q": float, "split": float, "M_geo": int,
    "c": float, "d": float, "alpha": "order", "tau": float, "lam": float,
    "x_L": float, "x_R": float, "u_L": float, "u_R": float, "problem": str,
    "f": str, "u0": str, "epsilon": float, "dt": float, "t_final": float,
    "snapshots": [float], "penalize_first_step": bool, "penalize_explicit": bool,
    "sweep_var": str, "sweep": [int], "taus": [float], "delta": float, "L": int,
    "output": str,
}  # fmt: skip

NULLABLE = {"q", "split", "f", "delta", "L"}


def _coerce(key: str, value: Any, problems: list[str]) -> Any:
    kind = FIELD_TYPES[key]
    if value is None:
        if key in NULLABLE:
            return None
        problems.append(f"{key}: must not be null")
        return None

    def scalar(typ, v):
        if typ is bool:
            if isinstance(v, bool):
                return v
            if isinstance(v, str) and v.lower() in ("true", "false", "1", "0"):
                return v.lower() in ("true", "1")
            raise ValueError(f"expected a boolean, got {v!r}")
        if typ is int:
            if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
                raise ValueError(f"expected an integer, got {v!r}")
            return int(v)
        if typ is float:
            if isinstance(v, bool):
                raise ValueError(f"expected a number, got {v!r}")
            out = float(v)
            if not math.isfinite(out):
                raise ValueError(f"expected a finite number, got {v!r}")
            return out
        if not isinstance(v, str):
            raise ValueError(f"expected a string, got {v!r}")
        return v

    try:
        if kind == "order":
            if isinstance(value, str):
                try:
                    return float(value)
                except ValueError:
                    return value
            return scalar(float, value)
        if isinstance(kind, list):
            if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
                raise ValueError(f"expected a list, got {value!r}")
            return tuple(scalar(kind[0], v) for v in value)
        return scalar(kind, value)
    except (TypeError, ValueError) as exc:
        problems.append(f"{key}: {exc}")
        return None


def _validate(cfg: ExperimentConfig) -> list[str]:
    problems = []
    sub = cfg.subcommand

    if cfg.mesh not in MESH_KINDS:
        problems.append(f"mesh: unknown kind {cfg.mesh!r}, expected one of {MESH_KINDS}")
    if cfg.M < 1:
        problems.append(f"M: need at least one element, got {cfg.M}")
    if cfg.N < 2:
        problems.append(f"N: need N >= 2, got {cfg.N}")
    if cfg.mesh == "graded" and not (cfg.q is not None and cfg.q > 1):
        problems.append(f"q: graded mesh needs q > 1, got {cfg.q}")
    if cfg.mesh in ("geometric", "composite") and not (
        cfg.q is not None and 0 < cfg.q < 1
    ):
        problems.append(f"q: {cfg.mesh} mesh needs 0 < q < 1, got {cfg.q}")
    if cfg.mesh == "composite" and not 0 <= cfg.M_geo < cfg.M:
        problems.append(f"M_geo: need 0 <= M_geo < M, got {cfg.M_geo}")
    if not cfg.x_L < cfg.x_R:
        problems.append(f"x_L, x_R: degenerate interval [{cfg.x_L}, {cfg.x_R}]")
    if cfg.c <= -1 or cfg.d <= -1:
        problems.append(f"c, d: Jacobi parameters must exceed -1, got ({cfg.c}, {cfg.d})")
    if cfg.tau < 0:
        problems.append(f"tau: must be non-negative, got {cfg.tau}")
    if cfg.delta is not None and cfg.delta <= 0:
        problems.append(f"delta: must be positive, got {cfg.delta}")
    if cfg.L is not None and cfg.L < 1:
        problems.append(f"L: must be positive, got {cfg.L}")

    try:
        order = cfg.order_field()
        order(np.linspace(cfg.x_L, cfg.x_R, 201), 0.0)
    except (ExprError, OrderFieldError) as exc:
        problems.append(f"alpha: {exc}")

    if sub in ("helmholtz", "converge"):
        if cfg.problem not in PROBLEMS:
            problems.append(f"problem: unknown {cfg.problem!r}, expected one of {PROBLEMS}")
        if cfg.problem == "custom":
            if cfg.f is None:
                problems.append("f: custom problem needs a right-hand side expression")
            else:
                try:
                    parse_order_expr(cfg.f)
                except ExprError as exc:
                    problems.append(f"f: {exc}")
        elif (cfg.x_L, cfg.x_R) != (-1.0, 1.0):
            problems.append(f"x_L, x_R: {cfg.problem} is posed on [-1, 1]")
        if cfg.problem == "example42" and (cfg.u_L, cfg.u_R) != (0.0, 0.0):
            problems.append("u_L, u_R: example42 has homogeneous boundary data")

    if sub == "burgers":
        if cfg.epsilon <= 0:
            problems.append(f"epsilon: must be positive, got {cfg.epsilon}")
        if cfg.dt <= 0:
            problems.append(f"dt: must be positive, got {cfg.dt}")
        elif cfg.t_final < 0:
            problems.append(f"t_final: must be non-negative, got {cfg.t_final}")
        else:
            n = round(cfg.t_final / cfg.dt)
            if abs(n * cfg.dt - cfg.t_final) > 1e-12 * max(1.0, cfg.t_final):
                problems.append(f"dt: {cfg.dt} does not divide t_final {cfg.t_final}")
            for ts in cfg.snapshots:
                k = round(ts / cfg.dt)
                if abs(k * cfg.dt - ts) > 0.5 * cfg.dt or not 0 <= k <= n:
                    problems.append(f"snapshots: {ts} is not on the step grid")
        try:
            parse_order_expr(cfg.u0)
        except ExprError as exc:
            problems.append(f"u0: {exc}")

    if sub == "converge":
        if cfg.sweep_var not in ("p", "h"):
            problems.append(f"sweep_var: expected 'p' or 'h', got {cfg.sweep_var!r}")
        if not cfg.sweep:
            problems.append("sweep: empty sweep list")
        elif cfg.sweep_var == "p" and min(cfg.sweep) < 2:
            problems.append(f"sweep: degrees must be >= 2, got {list(cfg.sweep)}")
        elif cfg.sweep_var == "h" and min(cfg.sweep) < 1:
            problems.append(f"sweep: element counts must be >= 1, got {list(cfg.sweep)}")

    if sub == "cond" and cfg.sweep and min(cfg.sweep) < 1:
        problems.append(f"sweep: element counts must be >= 1, got {list(cfg.sweep)}")
    if any(t < 0 for t in cfg.taus):
        problems.append(f"taus: must be non-negative, got {list(cfg.taus)}")

    return problems


def build_config(subcommand: str, *sources: dict[str, Any]) -> ExperimentConfig:
    """Merge *sources* (later wins) into a validated configuration."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError([f"subcommand: unknown {subcommand!r}"])

    problems: list[str] = []
    values: dict[str, Any] = {}
    for src in sources:
        for key, value in src.items():
            if key == "subcommand":
                continue
            if key not in FIELD_TYPES:
                problems.append(f"{key}: unknown key")
                continue
            coerced = _coerce(key, value, problems)
            if coerced is not None or value is None:
                values[key] = coerced

    if problems:
        raise ConfigError(problems)

    cfg = ExperimentConfig(subcommand=subcommand, **values)
    problems = _validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


# }}}


# {{{ presets

PRESETS: dict[str, tuple[str, str, dict[str, Any]]] = {
    # name: (subcommand, citation, settings)
    "ex41-const": (
        "helmholtz",
        "Example 4.1, Fig. 8: u = sin(pi x), constant order",
        {"problem": "example41", "alpha": 1.5, "M": 4, "N": 16, "tau": 1000.0},
    ),
    "ex41-variable": (
        "helmholtz",
        "Example 4.1, Fig. 9: u = sin(pi x), alpha(x) = 1.1 + (x+1)/2.5",
        {"problem": "example41", "alpha": "1.1 + (x+1)/2.5", "M": 4, "N": 16,
         "tau": 1000.0},
    ),
    "ex42": (
        "helmholtz",
        "Example 4.2, Fig. 11: u = (1-x)(1+x)^(alpha-1), geometric mesh",
        {"problem": "example42", "alpha": 1.5, "mesh": "geometric", "q": 0.5,
         "M": 16, "N": 4, "tau": 1000.0},
    ),
    "fig8-p": (
        "converge",
        "Fig. 8 left: p-refinement for Example 4.1 on M = 4 uniform elements",
        {"problem": "example41", "alpha": 1.5, "M": 4, "sweep_var": "p",
         "sweep": [4, 8, 12, 16, 20], "tau": 1000.0},
    ),
    "fig8-h": (
        "converge",
        "Fig. 8 right: h-refinement for Example 4.1 with N = 4",
        {"problem": "example41", "alpha": 1.5, "N": 4, "sweep_var": "h",
         "sweep": [4, 8, 16, 32], "tau": 1000.0},
    ),
    "fig3-left": (
        "eigen",
        "Fig. 3 left: spectrum of D, alpha = 1.01, M = 8, no penalty",
        {"alpha": 1.01, "M": 8, "N": 4, "tau": 0.0},
    ),
    "fig3-right": (
        "eigen",
        "Fig. 3 right: spectrum of D, alpha = 1.99, M = 8, no penalty",
        {"alpha": 1.99, "M": 8, "N": 4, "tau": 0.0},
    ),
    "fig4-left": (
        "eigen",
        "Fig. 4 left: spectrum of D, alpha = 1.01, N = 3, no penalty",
        {"alpha": 1.01, "M": 16, "N": 3, "tau": 0.0},
    ),
    "fig4-right": (
        "eigen",
        "Fig. 4 right: spectrum of D, alpha = 1.99, N = 3, no penalty",
        {"alpha": 1.99, "M": 16, "N": 3, "tau": 0.0},
    ),
    "fig5-left": (
        "eigen",
        "Fig. 5 left: spectrum of D + R, alpha = 1.01, tau = 1, M = 8",
        {"alpha": 1.01, "M": 8, "N": 4, "tau": 1.0},
    ),
    "fig5-right": (
        "eigen",
        "Fig. 5 right: spectrum of D + R, alpha = 1.99, tau = 100, M = 8",
        {"alpha": 1.99, "M": 8, "N": 4, "tau": 100.0},
    ),
    "fig6-left": (
        "eigen",
        "Fig. 6 left: spectrum of D + R, alpha = 1.01, tau = 10, N = 3",
        {"alpha": 1.01, "M": 16, "N": 3, "tau": 10.0},
    ),
    "fig6-right": (
        "eigen",
        "Fig. 6 right: spectrum of D + R, alpha = 1.99, tau = 10, N = 3",
        {"alpha": 1.99, "M": 16, "N": 3, "tau": 10.0},
    ),
    "fig7": (
        "cond",
        "Fig. 7: condition number of the Helmholtz matrix against M, "
        "alpha = 1.5, N = 4",
        {"alpha": 1.5, "N": 4, "sweep": [8, 16, 32], "taus": [0.0, 1000.0]},
    ),
    "ex43-case1": (
        "burgers",
        "Example 4.3 Case 1, Fig. 12 (M reduced from 600 to 100)",
        {"alpha": 1.5, "M": 100, "N": 3, "tau": 1000.0, "dt": 1e-3, "t_final": 1.0},
    ),
    "ex43-case2": (
        "burgers",
        "Example 4.3 Case 2, Fig. 15: increasing order",
        {"alpha": "1 + (5+4*x)/10", "M": 100, "N": 3, "tau": 1e5, "dt": 1e-3,
         "t_final": 1.0},
    ),
    "ex43-case3": (
        "burgers",
        "Example 4.3 Case 3, Fig. 15: decreasing order",
        {"alpha": "1 + (5-4*x)/10", "M": 100, "N": 3, "tau": 1e5, "dt": 1e-3,
         "t_final": 1.0},
    ),
    "ex43-case4": (
        "burgers",
        "Example 4.3 Case 4, Fig. 15: travelling nonsmooth order",
        {"alpha": "4/5*abs(sin(10*pi*(x-t))) + 1.1", "M": 100, "N": 3, "tau": 1e5,
         "dt": 1e-3, "t_final": 1.0},
    ),
    "ex43-case5": (
        "burgers",
        "Example 4.3 Case 5, Fig. 15: nonsmooth order growing in time",
        {"alpha": "4*abs(x*t)/5 + 1.1", "M": 100, "N": 3, "tau": 1e5, "dt": 1e-3,
         "t_final": 1.0},
    ),
}  # fmt: skip


# }}}


# {{{ runners


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _helmholtz_problem(cfg: ExperimentConfig, order: OrderField, tau: float):
    if cfg.problem == "example41":
        exact = lambda x: np.sin(np.pi * x)  # noqa: E731
        f = example41_rhs(order, cfg.lam)
        u_L, u_R = 0.0, 0.0
    elif cfg.problem == "example42":
        exact = example42_exact(order)
        f = example42_rhs(order, cfg.lam)
        u_L, u_R = 0.0, 0.0
    else:
        expr = parse_order_expr(cfg.f)
        exact = None
        f = lambda x: expr.evaluate(x)  # noqa: E731
        u_L, u_R = cfg.u_L, cfg.u_R

    problem = HelmholtzProblem(
        order=order, f=f, lam=cfg.lam, u_L=u_L, u_R=u_R, tau=tau,
        interval=(cfg.x_L, cfg.x_R),
    )  # fmt: skip
    return problem, exact


def run_helmholtz(cfg: ExperimentConfig, out: Path) -> str:
    order = cfg.order_field()
    problem, exact = _helmholtz_problem(cfg, order, cfg.tau)
    mesh = cfg.mesh_spec().build(cfg.x_L, cfg.x_R)
    report = solve_helmholtz(problem, mesh, **cfg.assembly_kwargs())
    _write(out, "solution.csv", report.to_csv())

    summary = f"helmholtz: unknowns={mesh.n_unknowns}"
    if exact is not None:
        summary += f" linf_error={linf_error(report, exact):.6e}"
    return summary + f" residual={report.diagnostics['residual']:.3e}"


def run_burgers(cfg: ExperimentConfig, out: Path) -> str:
    expr = parse_order_expr(cfg.u0)
    problem = BurgersProblem(
        order=cfg.order_field(),
        u0=lambda x: expr.evaluate(x),
        epsilon=cfg.epsilon,
        dt=cfg.dt,
        t_final=cfg.t_final,
        tau=cfg.tau,
        penalize_first_step=cfg.penalize_first_step,
        penalize_explicit=cfg.penalize_explicit,
    )
    mesh = cfg.mesh_spec().build(cfg.x_L, cfg.x_R)
    report = solve_burgers(problem, mesh, snapshot_times=cfg.snapshots)
    for t in sorted(report.snapshots):
        _write(out, f"snapshot_t{t:.6g}.csv", report.to_csv(t))
    return (
        f"burgers: unknowns={mesh.n_unknowns} steps={problem.nsteps} "
        f"max_abs_u={np.max(np.abs(report.u)):.6e}"
    )


def _system_matrix(cfg: ExperimentConfig, M: int, tau: float, kind: str) -> np.ndarray:
    mesh = cfg.mesh_spec(M).build(cfg.x_L, cfg.x_R)
    D = assemble_mdfdm(mesh, cfg.order_field(), **cfg.assembly_kwargs())
    if kind == "spectrum":
        return D.matrix + assemble_penalty(mesh, tau)
    return helmholtz_matrix(mesh, D, cfg.lam, tau)


def run_eigen(cfg: ExperimentConfig, out: Path) -> str:
    A = _system_matrix(cfg, cfg.M, cfg.tau, "spectrum")
    rep = eigenvalues(A, tau=cfg.tau, alpha=cfg.alpha, M=cfg.M, N=cfg.N, mesh=cfg.mesh)
    _write(out, "spectrum.csv", rep.to_csv())
    return f"eigen: n={len(rep)} max_re={rep.max_real:.6e}"


def run_cond(cfg: ExperimentConfig, out: Path) -> str:
    Ms = cfg.sweep or (cfg.M,)
    taus = cfg.taus or (cfg.tau,)
    lines = ["M,tau,cond"]
    last = {}
    for M in Ms:
        for tau in taus:
            k = condition_number_l2(_system_matrix(cfg, M, tau, "helmholtz"))
            lines.append(f"{M},{tau:.17g},{k:.17g}")
            last[tau] = k
    _write(out, "cond.csv", "\n".join(lines) + "\n")
    parts = " ".join(f"cond(tau={tau:g})={k:.6e}" for tau, k in last.items())
    return f"cond: M={Ms[-1]} {parts}"


def run_converge(cfg: ExperimentConfig, out: Path) -> str:
    order = cfg.order_field()
    template, exact = _helmholtz_problem(cfg, order, cfg.tau)
    if exact is None:
        raise ConfigError(["problem: convergence studies need an exact solution"])
    rows = convergence_study(
        template, exact, {cfg.sweep_var: cfg.sweep}, cfg.mesh_spec(),
        taus=cfg.taus or None,
    )  # fmt: skip
    _write(out, "convergence.csv", convergence_to_csv(rows))
    failed = sum(not r.ok for r in rows)
    return (
        f"converge: rows={len(rows)} failed={failed} "
        f"final_error={rows[-1].error:.6e}"
    )


RUNNERS = {
    "helmholtz": run_helmholtz,
    "burgers": run_burgers,
    "eigen": run_eigen,
    "cond": run_cond,
    "converge": run_converge,
}


def run(config: ExperimentConfig, stdout=None) -> int:
    """Execute *config*, write its CSV files and print a one-line summary."""
    stdout = sys.stdout if stdout is None else stdout
    try:
        summary = RUNNERS[config.subcommand](config, Path(config.output))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 -- reported through the exit status
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(summary, file=stdout)
    return EXIT_OK


# }}}


# {{{ argument parsing


def _flag_type(key: str):
    kind = FIELD_TYPES[key]
    if kind == "order" or kind is str:
        return str
    if kind is bool:
        return str
    return kind[0] if isinstance(kind, list) else kind


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m mdscm",
        description="Multi-domain spectral collocation experiments.",
    )
    parser.add_argument("--list-presets", action="store_true", help="list presets and exit")
    sub = parser.add_subparsers(dest="subcommand")

    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON file with a flat object of settings")
        p.add_argument("--preset", help="named experiment, see --list-presets")
        for key, kind in FIELD_TYPES.items():
            kwargs: dict[str, Any] = {"dest": key, "default": argparse.SUPPRESS}
            if isinstance(kind, list):
                kwargs["nargs"] = "*"
            p.add_argument(f"--{key.replace('_', '-')}", type=_flag_type(key), **kwargs)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = vars(parser.parse_args(argv))

    if args.pop("list_presets", False):
        for name, (subcommand, cite, _) in PRESETS.items():
            print(f"{name:14s} {subcommand:10s} {cite}")
        return EXIT_OK

    subcommand = args.pop("subcommand", None)
    if subcommand is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG

    sources: list[dict[str, Any]] = []
    problems = []
    preset = args.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            problems.append(f"preset: unknown {preset!r}")
        elif PRESETS[preset][0] != subcommand:
            problems.append(f"preset: {preset!r} belongs to {PRESETS[preset][0]!r}")
        else:
            sources.append(PRESETS[preset][2])

    config_path = args.pop("config", None)
    if config_path is not None:
        try:
            data = json.loads(config_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            problems.append(f"config: cannot read {config_path}: {exc}")
        else:
            if isinstance(data, dict):
                sources.append(data)
            else:
                problems.append("config: top level must be a JSON object")

    if os.environ.get(OUTPUT_ENV):
        sources.append({"output": os.environ[OUTPUT_ENV]})
    sources.append(args)

    try:
        cfg = build_config(subcommand, *sources)
    except ConfigError as exc:
        problems.extend(exc.problems)
    if problems:
        print(f"error: {ConfigError(problems)}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


# }}}
