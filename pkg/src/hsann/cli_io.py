"""Command-line front end, run configuration and on-disk formats.

Config files are ``key = value`` lines with ``#`` comments.  Checkpoints are
plain text::

    HSANN v1
    params n=2 gamma=... mu=... R=... k_max=...
    k l value
    ...

with every float written in 17-significant-digit scientific notation so that
reading and rewriting a checkpoint reproduces it byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from hsann import __version__
from hsann import harmonics as hm
from hsann.errors import CheckpointError, ConfigError, HSANNError
from hsann.harmonics import ModeIndex, SurfaceCoeffs
from hsann.params import ProblemParams

log = logging.getLogger(__name__)

FLOAT_FMT = "%.16e"
CHECKPOINT_TAG = "HSANN v1"
TRAJECTORY_COLUMNS = ("t", "volume", "centroid_x", "centroid_y", "c_x", "c_y",
                      "field_residual", "E_k0", "E_k1", "E_high")


def fmt(x: float) -> str:
    return FLOAT_FMT % x


@dataclass
class RunConfig:
    n: int = 2
    gamma: float = 1.0
    mu: float = 0.5
    R: float = 1.0
    k_max: int = 32
    n_theta: int = 256
    dt: float | None = None
    t_max: float | None = None
    newton_tol: float = 1e-10
    stat_tol: float = 1e-9
    step_tol: float = 1e-8
    over_collocation: float = 2.0
    init: list = field(default_factory=list)  # (k, l, amplitude) triples
    checkpoint: str | None = None
    seed: int | None = None
    random_amplitude: float = 0.0
    output: str = "hsann_out"

    @property
    def K(self) -> float:
        return self.mu / self.gamma * self.R

    def params(self) -> ProblemParams:
        return ProblemParams(n=self.n, gamma=self.gamma, mu=self.mu, R=self.R, k_max=self.k_max,
                             n_theta=self.n_theta, newton_tol=self.newton_tol, stat_tol=self.stat_tol,
                             step_tol=self.step_tol, over_collocation=self.over_collocation)

    def initial_state(self) -> SurfaceCoeffs:
        """Checkpoint (if given) plus listed modes plus a seeded random k >= 2 perturbation."""
        if self.checkpoint:
            arr = read_checkpoint(self.checkpoint)[0].truncate(self.k_max).coeffs.copy()
        else:
            arr = np.zeros(hm.n_coeffs(self.k_max))
        for k, l, amp in self.init:
            if k > self.k_max:
                raise ConfigError(f"init mode ({k}, {l}) exceeds k_max={self.k_max}")
            arr[ModeIndex(k, l).index] += amp
        if self.seed is not None and self.random_amplitude > 0:
            rng = np.random.default_rng(self.seed)
            deg = hm.mode_degrees(self.k_max)
            # amplitudes falling off like k^-2 keep the curve smooth
            noise = rng.standard_normal(arr.size) / np.maximum(deg, 1) ** 2
            noise[deg < 2] = 0.0
            arr += self.random_amplitude * noise
        return SurfaceCoeffs(self.k_max, arr)

    def to_json(self) -> dict:
        d = asdict(self)
        d["init"] = [list(t) for t in self.init]
        return d


_INT_KEYS = {"n", "k_max", "n_theta", "seed"}
_OPTIONAL_FLOAT = {"dt", "t_max"}
_STR_KEYS = {"checkpoint", "output"}
_KEYS = {f.name for f in fields(RunConfig)}


def _parse_init(text: str) -> list:
    """``"2 1 1e-3; 3 2 -5e-4"`` to ``[(2, 1, 1e-3), (3, 2, -5e-4)]``."""
    out = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise ValueError("init entries are 'k l amplitude' separated by ';'")
        k, l, a = int(parts[0]), int(parts[1]), float(parts[2])
        ModeIndex(k, l)
        out.append((k, l, a))
    return out


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` text; errors name the offending key and line."""
    values: dict = {}
    where: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _STR_KEYS:
                values[key] = val
            elif key == "init":
                values[key] = _parse_init(val)
            elif key in _OPTIONAL_FLOAT and val.lower() in ("", "none", "default"):
                values[key] = None
            else:
                values[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
        where[key] = lineno
    cfg = RunConfig(**values)
    _validate(cfg, where)
    return cfg


def _validate(cfg: RunConfig, where: dict):
    def fail(key, msg):
        loc = f"line {where[key]}: " if key in where else ""
        raise ConfigError(f"{loc}{msg}")

    if cfg.n < 2:
        fail("n", "n must be >= 2")
    if not cfg.gamma > 0:
        fail("gamma", "gamma must be > 0")
    if not cfg.mu > 0:
        fail("mu", "mu must be > 0")
    if not cfg.mu < cfg.gamma:
        fail("mu" if "mu" in where else "gamma", "mu must be < gamma")
    if not cfg.R > 0:
        fail("R", "R must be > 0")
    if cfg.k_max < 2:
        fail("k_max", "k_max must be >= 2")
    if cfg.n_theta < 4 * (cfg.k_max + 1):
        fail("n_theta" if "n_theta" in where else "k_max", "n_theta must be >= 4*(k_max+1)")
    for key in ("newton_tol", "stat_tol", "step_tol", "over_collocation", "dt", "t_max"):
        value = getattr(cfg, key)
        if value is not None and not value > 0:
            fail(key, f"{key} must be > 0")
    if cfg.random_amplitude < 0:
        fail("random_amplitude", "random_amplitude must be >= 0")


# ---------------------------------------------------------------- checkpoints


def format_checkpoint(rho: SurfaceCoeffs, params: ProblemParams) -> str:
    lines = [CHECKPOINT_TAG,
             f"params n={params.n} gamma={fmt(params.gamma)} mu={fmt(params.mu)} R={fmt(params.R)} k_max={rho.k_max}"]
    for m, v in rho:
        lines.append(f"{m.k} {m.l} {fmt(v)}")
    return "\n".join(lines) + "\n"


def write_checkpoint(path, rho: SurfaceCoeffs, params: ProblemParams) -> Path:
    path = Path(path)
    path.write_text(format_checkpoint(rho, params), encoding="utf-8")
    return path


def parse_checkpoint(text: str) -> tuple[SurfaceCoeffs, dict]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_TAG:
        raise CheckpointError(f"line 1: expected {CHECKPOINT_TAG!r}")
    if len(lines) < 2 or not lines[1].startswith("params "):
        raise CheckpointError("line 2: expected the params line")
    meta = {}
    for item in lines[1].split()[1:]:
        if "=" not in item:
            raise CheckpointError(f"line 2: malformed entry {item!r}")
        key, val = item.split("=", 1)
        try:
            meta[key] = int(val) if key in ("n", "k_max") else float(val)
        except ValueError:
            raise CheckpointError(f"line 2: bad value for {key!r}") from None
    if "k_max" not in meta:
        raise CheckpointError("line 2: missing k_max")
    arr = np.zeros(hm.n_coeffs(meta["k_max"]))
    seen = set()
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if len(parts) != 3:
                raise ValueError("expected 'k l value'")
            m = ModeIndex(int(parts[0]), int(parts[1]))
            if m.k > meta["k_max"]:
                raise ValueError(f"degree {m.k} exceeds k_max")
            value = float(parts[2])
        except ValueError as exc:
            raise CheckpointError(f"line {lineno}: {exc}") from None
        if m in seen:
            raise CheckpointError(f"line {lineno}: duplicate mode ({m.k}, {m.l})")
        seen.add(m)
        arr[m.index] = value
    return SurfaceCoeffs(meta["k_max"], arr), meta


def read_checkpoint(path) -> tuple[SurfaceCoeffs, dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    return parse_checkpoint(text)


# ---------------------------------------------------------------- trajectories


def coefficient_header(k_max: int) -> list[str]:
    return ["t"] + [f"k{m.k}_l{m.l}" for m, _ in SurfaceCoeffs.zeros(k_max)]


def write_trajectory(traj, directory) -> dict:
    """Write ``trajectory.csv`` and ``coefficients.csv``; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tpath = directory / "trajectory.csv"
    with tpath.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for i, t in enumerate(traj.times):
            w.writerow([fmt(t)] + [fmt(traj.diagnostics[c][i]) for c in TRAJECTORY_COLUMNS[1:]])
    cpath = directory / "coefficients.csv"
    with cpath.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(coefficient_header(traj.params.k_max))
        for t, row in zip(traj.times, traj.states):
            w.writerow([fmt(t)] + [fmt(v) for v in row])
    return {"trajectory": tpath, "coefficients": cpath}


PLOT_STUB = '''"""Plot the energy decay of a run (needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "trajectory.csv"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
for key in ("E_high", "field_residual"):
    plt.semilogy(t, [max(float(r[key]), 1e-300) for r in rows], label=key)
plt.xlabel("t")
plt.legend()
plt.savefig("decay.png", dpi=120)
'''


def versions() -> dict:
    return {"hsann": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(directory, config: RunConfig, termination: str, wall_time: float, extra=None) -> Path:
    path = Path(directory) / "manifest.json"
    data = {"config": config.to_json(), "versions": versions(), "wall_time_s": wall_time,
            "termination": termination}
    if extra:
        data.update(extra)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------- CLI


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--R", type=float)
    p.add_argument("--kmax", type=int, dest="k_max")
    p.add_argument("--ntheta", type=int, dest="n_theta")
    p.add_argument("--init", help="modes as 'k l amplitude; ...'")
    p.add_argument("--out", help="output file or directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hsann", description="Annular Hele-Shaw flow with two free surfaces.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sp = sub.add_parser("spectrum", help="multiplier table as CSV")
    _common(sp)
    sp = sub.add_parser("inner", help="solve the inner problem for the initial curve")
    _common(sp)
    sp = sub.add_parser("simulate", help="run the flow and write trajectory files")
    _common(sp)
    sp.add_argument("--t-max", type=float, dest="t_max")
    sp.add_argument("--sweep", nargs="+", metavar="CONFIG", help="run several config files concurrently")
    sp.add_argument("--workers", type=int, default=None)
    sp = sub.add_parser("invariance", help="translation and dilation checks")
    _common(sp)
    sp.add_argument("--z", type=float, nargs=2, default=(0.1, 0.0))
    sp.add_argument("--lam", type=float, default=2.0)
    sp.add_argument("--T", type=float, default=None)
    sp = sub.add_parser("limit", help="predicted limit circles")
    _common(sp)
    sp = sub.add_parser("stable-manifold", help="shoot for initial data converging to a target circle")
    _common(sp)
    sp.add_argument("--center", type=float, nargs=2, default=(0.0, 0.0))
    sp.add_argument("--radius", type=float, default=None)
    sp = sub.add_parser("toy", help="planar and heat toy models")
    sp.add_argument("model", choices=("planar", "heat"))
    sp.add_argument("--x0", type=float, default=0.0)
    sp.add_argument("--y0", type=float, default=0.0)
    sp.add_argument("--t", type=float, default=0.0)
    sp.add_argument("--M", type=int, default=64)
    sp.add_argument("--T", type=float, default=5.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--profile", choices=("linear", "sin", "one-plus-sin", "zero"), default="linear")
    sp.add_argument("--out", help="output directory")
    return parser


def load_config(args) -> RunConfig:
    text = ""
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    lines = [text]
    for key in ("n", "gamma", "mu", "R", "k_max", "n_theta", "t_max", "init"):
        value = getattr(args, key, None)
        if value is not None:
            lines.append(f"{key} = {value}")
    # a k_max given on the command line brings a matching grid unless one is set explicitly
    k_max = getattr(args, "k_max", None)
    if k_max is not None and getattr(args, "n_theta", None) is None and not _sets_key(text, "n_theta"):
        lines.append(f"n_theta = {max(256, 8 * (k_max + 1))}")
    return parse_config("\n".join(lines))


def _sets_key(text: str, key: str) -> bool:
    return any(line.split("#", 1)[0].split("=", 1)[0].strip() == key for line in text.splitlines())


def _emit_text(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_spectrum(args) -> int:
    from hsann.spectrum import multiplier_table

    cfg = load_config(args)
    table = multiplier_table(None, cfg.k_max, n=cfg.n, gamma=cfg.gamma, mu=cfg.mu, R=cfg.R)
    buf = io.StringIO()
    rows = list(table.rows())
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    _emit_text(buf.getvalue(), args.out)
    return 0


def cmd_inner(args) -> int:
    from hsann.inner_solver import solve_inner

    cfg = load_config(args)
    params = cfg.params()
    sol = solve_inner(cfg.initial_state(), params)
    data = {
        "eta": [[m.k, m.l, v] for m, v in sol.eta],
        "c": sol.c.tolist(),
        "residual_norm": sol.residual_norm,
        "newton_iters": sol.newton_iters,
        "u": {"K_u": sol.u.K_u, "alpha0": sol.u.alpha0, "beta0": sol.u.beta0,
              "coeffs": sol.u.coeffs.tolist(), "r_out": sol.u.r_out, "r_in": sol.u.r_in,
              "boundary_residual": sol.u.boundary_residual, "condition": sol.u.condition},
    }
    _emit_text(json.dumps(data, indent=2) + "\n", args.out)
    return 0


def run_simulation(cfg: RunConfig, out_dir) -> str:
    """Simulate one configuration into ``out_dir``; returns the termination reason."""
    from hsann.evolution import simulate

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    params = cfg.params()
    traj = simulate(cfg.initial_state(), cfg.t_max, params, dt0=cfg.dt)
    write_trajectory(traj, out_dir)
    if len(traj):
        write_checkpoint(out_dir / "final.hsann", traj.state(), params)
    (out_dir / "plot_trajectory.py").write_text(PLOT_STUB, encoding="utf-8")
    write_manifest(out_dir, cfg, traj.termination, time.perf_counter() - start,
                   {"snapshots": len(traj), "t_final": float(traj.times[-1]) if len(traj) else 0.0})
    return traj.termination


def _sweep_one(path: str, out_root: str) -> tuple[str, str]:
    cfg = parse_config(Path(path).read_text(encoding="utf-8"))
    return path, run_simulation(cfg, Path(out_root) / Path(path).stem)


def cmd_simulate(args) -> int:
    if args.sweep:
        out_root = args.out or "hsann_sweep"
        for path in args.sweep:
            parse_config(Path(path).read_text(encoding="utf-8"))  # fail fast on bad configs
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_one, args.sweep, [out_root] * len(args.sweep)))
        status = 0
        for path, term in results:
            print(f"{path}: {term}")
            if term.startswith("error:"):
                status = 2
        return status
    cfg = load_config(args)
    out = args.out or cfg.output
    term = run_simulation(cfg, out)
    print(f"termination: {term}")
    if term.startswith("error:"):
        print(term, file=sys.stderr)
        return 2
    return 0


def _sphere(s) -> dict:
    return {"center": np.asarray(s.center).tolist(), "radius": float(s.radius)}


def cmd_invariance(args) -> int:
    from hsann.phase_diagram import invariance_suite, spectral_gap

    cfg = load_config(args)
    params = cfg.params()
    T = args.T if args.T is not None else 3.0 / spectral_gap(params)
    rep = invariance_suite(cfg.initial_state(), args.z, args.lam, T, params)
    data = {"translation_error": rep.translation_error, "dilation_error": rep.dilation_error,
            "z": list(rep.z), "lam": rep.lam, "T": rep.T, "translation_tol": rep.translation_tol,
            "dilation_tol": rep.dilation_tol, "passed": rep.passed}
    _emit_text(json.dumps(data, indent=2) + "\n", args.out)
    return 0


def cmd_limit(args) -> int:
    from hsann.phase_diagram import predict_limit

    cfg = load_config(args)
    pred = predict_limit(cfg.initial_state(), cfg.params(), cfg.t_max)
    data = {"outer": _sphere(pred.outer), "inner": _sphere(pred.inner), "fitted_rate": pred.fitted_rate,
            "fit_residual": pred.fit_residual}
    if pred.terminal_outer is not None:
        data["terminal_outer"] = _sphere(pred.terminal_outer)
    if pred.terminal_inner is not None:
        data["terminal_inner"] = _sphere(pred.terminal_inner)
    _emit_text(json.dumps(data, indent=2) + "\n", args.out)
    return 0


def cmd_stable_manifold(args) -> int:
    from hsann.geometry import SphereData
    from hsann.phase_diagram import stable_manifold_point

    cfg = load_config(args)
    params = cfg.params()
    rho = cfg.initial_state().coeffs.copy()
    rho[:3] = 0.0
    target = SphereData(args.center, args.radius if args.radius is not None else params.R)
    point = stable_manifold_point(SurfaceCoeffs(params.k_max, rho), target, params)
    text = format_checkpoint(point, params)
    _emit_text(text, args.out)
    return 0


def cmd_toy(args) -> int:
    from hsann import toy_models as toy

    if args.model == "planar":
        x, y = toy.planar_flow(args.x0, args.y0, args.t)
        print(f"({x:.17g}, {y:.17g})")
        return 0
    x = np.linspace(0.0, 1.0, args.M + 1)
    u0 = {"linear": x, "sin": np.sin(2 * np.pi * x), "one-plus-sin": 1 + np.sin(2 * np.pi * x),
          "zero": 0 * x}[args.profile]
    state = toy.heat_neumann(u0, args.T, args.M, args.dt)
    report = toy.heat_stable_manifold_check(u0, args.T, args.dt)
    out = Path(args.out or "hsann_toy")
    out.mkdir(parents=True, exist_ok=True)
    with (out / "heat.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u0", "uT"])
        for row in zip(x, u0, state.values):
            w.writerow([fmt(v) for v in row])
    summary = {k: (v if not isinstance(v, float) or math.isfinite(v) else None) for k, v in asdict(report).items()}
    (out / "heat_report.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"mean {report.mean:.17g}  limit error {report.limit_error:.3e}  rate {report.decay_rate:.6g}")
    return 0


COMMANDS = {"spectrum": cmd_spectrum, "inner": cmd_inner, "simulate": cmd_simulate,
            "invariance": cmd_invariance, "limit": cmd_limit, "stable-manifold": cmd_stable_manifold,
            "toy": cmd_toy}


def run_cli(argv=None) -> int:
    """Entry point returning the exit code: 0 success, 1 usage/input error, 2 numerical failure."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc.tag}: {exc}", file=sys.stderr)
        return 1
    except HSANNError as exc:
        print(f"error: {exc.tag}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())
