"""Command-line entry point: ``sphere-ot <command> [flags]``.

Commands: cost, selfcheck, verify, convexity, linearize, oracle-compare,
entropy. Every command writes CSV tables and a text summary into ``--out``.
Exit status is 0 when every check passes, 1 when one fails and 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import verify as V
from .measures import TestFunction
from .specfun import CostFunction, comparison_factors, s_fn
from .sphere import SCHEMES, GridError, build_grid
from .zonal import ProfileError

COMMANDS = ("cost", "selfcheck", "verify", "convexity", "linearize", "oracle-compare", "entropy")
FAMILIES = ("all", "uniform", "half-cap", "zonal-exp")
DEFAULT_STEP = {"cost": 0.1, "convexity": 1e-3}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Settings of one run. ``lam`` and ``step`` of ``None`` mean the command default."""

    command: str = "verify"
    n: int = 2
    grid_n: tuple = (800,)
    scheme: str = "fibonacci"
    seed: int = 0
    family: str = "all"
    kappa: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)
    eps_ladder: tuple = (0.02, 0.04, 0.08)
    lam: float | None = None
    step: float | None = None
    n_list: tuple = (2, 5, 10, 50, 200)
    oracle_k: int = 100_000
    workers: int = 1
    out: str = "results"

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_dump(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
        return cls().updated(values)

    def updated(self, raw: dict) -> RunConfig:
        """Return a copy with string values parsed into the field types."""
        known = {f.name: f for f in fields(self)}
        parsed = {}
        for key, value in raw.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            default = getattr(RunConfig(), key)
            try:
                parsed[key] = _load(value, key, default)
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {value!r} ({e})") from None
        cfg = dataclasses.replace(self, **parsed)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {', '.join(FAMILIES)}")
        if not self.grid_n or min(self.grid_n) < 2:
            raise ConfigError("grid_n must list sizes >= 2")
        if self.step is not None and not self.step > 0:
            raise ConfigError("step must be positive")
        if min(self.eps_ladder) <= 0:
            raise ConfigError("eps_ladder must be positive")

    @property
    def hash(self) -> str:
        """Digest of every setting except the output directory."""
        text = "".join(ln + "\n" for ln in self.to_text().splitlines() if not ln.startswith("out ="))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _dump(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ",".join(_dump(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _load(text: str, key: str, default):
    if key in ("lam", "step"):
        return None if text == "auto" else float(text)
    if isinstance(default, tuple):
        cast = int if key in ("grid_n", "n_list") else float
        items = [s.strip() for s in text.split(",") if s.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(cast(s) for s in items)
    if isinstance(default, int):
        return int(text)
    return text


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for flag, help_ in [("--n", "sphere dimension"), ("--grid-n", "grid sizes, comma separated"),
                        ("--scheme", "grid scheme"), ("--seed", "random seed"),
                        ("--family", "density family: " + ", ".join(FAMILIES)),
                        ("--kappa", "zonal-exp concentrations, comma separated"),
                        ("--eps-ladder", "linearization step sizes, comma separated"),
                        ("--lambda", "tilt factor (default n/(n-1))"),
                        ("--step", "table or scan step"), ("--n-list", "dimensions for entropy"),
                        ("--oracle-k", "oracle angle nodes"), ("--workers", "parallel sweep workers"),
                        ("--out", "output directory"), ("--config", "config file (key = value)")]:
        common.add_argument(flag, default=None, help=help_,
                            dest="lam" if flag == "--lambda" else None)
    parser = argparse.ArgumentParser(prog="sphere-ot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def build_config(argv) -> RunConfig:
    args = _parser().parse_args(argv)
    cfg = RunConfig()
    if args.config:
        try:
            cfg = RunConfig.from_text(Path(args.config).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "command")}
    flags["command"] = args.command
    return cfg.updated(flags)


class _Writer:
    def __init__(self, cfg: RunConfig):
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.header = f"config={cfg.hash} seed={cfg.seed} command={cfg.command}"

    def write(self, name: str, text: str) -> None:
        (self.dir / name).write_text(f"# {self.header}\n{text}", encoding="utf-8")

    def report(self, name: str, rep: V.VerificationReport) -> None:
        self.write(f"{name}.csv", rep.to_csv())
        self.write(f"{name}.txt", rep.summary() + "\n")


def _cases(cfg: RunConfig):
    cases = []
    if cfg.family in ("all", "half-cap"):
        cases.append(("half-cap", {}))
    if cfg.family in ("all", "zonal-exp"):
        cases += [("zonal-exp", {"kappa": k}) for k in cfg.kappa]
    if cfg.family == "uniform":
        cases.append(("uniform", {}))
    return cases


def _cost_table(cfg: RunConfig) -> str:
    n, step = cfg.n, cfg.step or DEFAULT_STEP["cost"]
    k_max = int(math.floor((math.pi - step) / step + 1e-9))
    d = np.arange(k_max + 1) * step
    c = CostFunction(n)(d)
    lines = ["d,S_n,v,w,mu,c_n"]
    # d = 0 carries the limits v = 1, w = n - 1, mu = 1
    inner = d > 0
    cf = comparison_factors(n, d[inner])
    v, w, mu = np.ones_like(d), np.full_like(d, n - 1.0), np.ones_like(d)
    v[inner], w[inner], mu[inner] = cf.v, cf.w, cf.mu
    s = s_fn(n, d)
    for row in zip(d, s, v, w, mu, c):
        lines.append(",".join(V.format_float(float(x)) for x in row))
    lines.append(",".join(V.format_float(x) for x in (math.pi, float(s_fn(n, math.pi)), 0.0, -math.inf,
                                              math.inf, math.inf)))
    return "\n".join(lines) + "\n"


def _execute(cfg: RunConfig, out: _Writer) -> list:
    n = cfg.n
    if cfg.command == "cost":
        out.write("cost.csv", _cost_table(cfg))
        return []
    if cfg.command == "selfcheck":
        rep = V.selfcheck(n)
        out.report("selfcheck", rep)
        return [rep]
    if cfg.command == "convexity":
        rep = V.convexity_scan(n, cfg.step or DEFAULT_STEP["convexity"]).report()
        out.report("convexity", rep)
        return [rep]
    if cfg.command == "oracle-compare":
        rep = V.oracle_compare(n, cfg.grid_n, _cases(cfg), cfg.oracle_k, cfg.scheme, cfg.seed)
        out.report("oracle_compare", rep)
        return [rep]

    reports = []
    for N in cfg.grid_n:
        grid = build_grid(n, N, cfg.scheme, cfg.seed)
        tag = f"N{grid.size}"
        if cfg.command == "verify":
            dens = V.densities_for(grid, _cases(cfg))
            pairs = [("inequality_sweep", V.inequality_sweep(grid, dens, n, cfg.workers)),
                     ("classical_comparison", V.classical_comparison(grid, dens, n, cfg.workers))]
        elif cfg.command == "linearize":
            g = TestFunction.coordinate(n, n + 1)
            pairs = [("linearization", V.linearization_experiment(grid, g, n, cfg.eps_ladder, cfg.lam)),
                     ("inf_convolution_expansion", V.inf_convolution_expansion(grid, g, n, cfg.eps_ladder))]
        else:
            pairs = [(f"entropy_{i}_{fam}", V.entropy_comparison(f, cfg.n_list))
                     for i, ((fam, _), f) in enumerate(zip(_cases(cfg), V.densities_for(grid, _cases(cfg))))]
        for name, rep in pairs:
            out.report(f"{name}_{tag}", rep)
            reports.append(rep)
    return reports


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = build_config(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    except ConfigError as e:
        print(f"sphere-ot: {e}", file=sys.stderr)
        return 2
    try:
        out = _Writer(cfg)
        out.write("config.txt", cfg.to_text())
        reports = _execute(cfg, out)
    except (GridError, ProfileError) as e:
        print(f"sphere-ot: {e}", file=sys.stderr)
        return 2
    ok = all(r.passed for r in reports)
    for r in reports:
        print(r.summary())
    return 0 if ok else 1


def main() -> None:
    sys.exit(run())
