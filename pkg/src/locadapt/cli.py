"""Command-line runner for single runs and LA-vs-HM comparisons.

Exit codes: 0 success, 2 bad configuration, 3 I/O failure, 4 broken internal
invariant.  Every output file is written to a temporary name first and only
renamed into place once all of them were produced.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bench import (RNG_ALGORITHM, LAConfig, StreamSpec, TargetFunction, gen_stream,
                    regret_vs_clean, rounds_csv, run_hm, run_la)
from .core import DomainError, LossKind
from .net import (Mode, RadiusSchedule, budget_violations, covering_audit, export_tree)
from .pruning import best_pruning, dimension_bound, lipschitz_bound, loss_bound, stats

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INVARIANT = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class InvariantError(Exception):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> parser for config-file values; flag names are the keys with "--"
KEYS = {
    "mode": str,
    "depth": int,
    "horizon": int,
    "seed": int,
    "loss": str,
    "lipschitz": _float_list,
    "dims": _int_list,
    "dim": int,
    "tau": str,
    "cover-constant": float,
    "target": str,
    "stream": str,
    "noise": float,
    "baseline": _bool,
    "out": str,
    "jobs": int,
}


@dataclass(frozen=True)
class RunConfig:
    mode: Mode
    depth: int
    horizon: int
    seed: int
    loss: LossKind
    lipschitz: tuple[float, ...]
    dims: tuple[int, ...]
    dim: int
    tau: str
    cover_constant: float
    target: str
    stream: str
    noise: float
    baseline: bool
    out: str
    jobs: int = 1

    @property
    def global_lipschitz(self) -> float:
        return self.lipschitz[-1]

    def schedule(self) -> RadiusSchedule:
        if self.mode is Mode.LIPSCHITZ:
            return RadiusSchedule.lipschitz(self.lipschitz, self.dim)
        if self.mode is Mode.DIMENSION:
            return RadiusSchedule.dimension(self.dims, self.global_lipschitz)
        return RadiusSchedule.local_loss(self.tau, self.depth, self.dim, self.global_lipschitz)

    def la_config(self) -> LAConfig:
        C = self.cover_constant if self.mode is Mode.DIMENSION else None
        return LAConfig(self.schedule(), self.loss, C)

    def target_function(self) -> TargetFunction:
        if self.mode is Mode.LIPSCHITZ:
            low, high = self.lipschitz[0], self.lipschitz[-1]
        else:
            # same geometric spacing as the default lipschitz grid
            high = self.global_lipschitz
            low = high / 2 ** (self.depth - 1)
        return TargetFunction.preset(self.target, low, high)

    def stream_spec(self) -> StreamSpec:
        return StreamSpec(self.horizon, self.dim, self.seed, self.stream, self.noise,
                          classification=self.loss is LossKind.ABSOLUTE)

    def echo(self) -> list[tuple[str, str]]:
        rows = [("mode", self.mode.value), ("depth", str(self.depth)),
                ("horizon", str(self.horizon)), ("seed", str(self.seed)),
                ("loss", self.loss.value),
                ("lipschitz", ",".join(repr(v) for v in self.lipschitz)), ("dim", str(self.dim))]
        if self.mode is Mode.DIMENSION:
            rows += [("dims", ",".join(map(str, self.dims))),
                     ("cover-constant", repr(self.cover_constant))]
        if self.mode is Mode.LOSS:
            rows.append(("tau", self.tau))
        rows += [("target", self.target), ("stream", self.stream), ("noise", repr(self.noise)),
                 ("baseline", "true" if self.baseline else "false"), ("out", self.out)]
        return rows


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` comments; only the ``[config]`` section
    (or a file without sections) is read, so a summary file can be fed back."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err.strerror}") from None
    values, section = {}, "config"
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if section != "config":
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("_", "-")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        if key not in KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locadapt", argument_default=argparse.SUPPRESS,
                                description="Run the locally adaptive learner on a synthetic stream.")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--depth", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--loss", choices=["square", "absolute"])
    p.add_argument("--lipschitz", type=_float_list, metavar="a,b,...",
                   help="per-level grid in lipschitz mode; a single global L otherwise")
    p.add_argument("--dims", type=_int_list, metavar="a,b,...")
    p.add_argument("--dim", type=int, help="ambient dimension of the instances")
    p.add_argument("--tau", choices=["pow", "linear"])
    p.add_argument("--cover-constant", type=float, dest="cover-constant")
    p.add_argument("--target", choices=["mostly-flat", "uniformly-rough", "constant"])
    p.add_argument("--stream", metavar="uniform|manifold:m")
    p.add_argument("--noise", type=float)
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    p.add_argument("--config", metavar="PATH")
    return p


def resolve(values: dict) -> RunConfig:
    """Fill defaults and check consistency; raises ConfigError."""
    try:
        mode = Mode(values.get("mode", "lipschitz"))
    except ValueError:
        raise ConfigError(f"unknown mode {values['mode']!r}") from None
    dims = tuple(values.get("dims", ()))
    if mode is Mode.DIMENSION:
        if not dims:
            raise ConfigError("dimension mode needs --dims")
        depth = int(values.get("depth", len(dims)))
    else:
        depth = int(values.get("depth", 5))
    if depth < 1:
        raise ConfigError("depth must be positive")

    default_loss = "absolute" if mode is Mode.LOSS else "square"
    try:
        loss = LossKind.parse(values.get("loss", default_loss))
    except (ValueError, DomainError) as err:
        raise ConfigError(str(err)) from None

    if "lipschitz" in values:
        grid = tuple(values["lipschitz"])
    elif mode is Mode.LIPSCHITZ:
        grid = tuple(float(2 ** k) for k in range(1, depth + 1))
    else:
        grid = (1.0,)
    if mode is not Mode.LIPSCHITZ and len(grid) != 1:
        raise ConfigError(f"{mode.value} mode takes a single global --lipschitz value")

    dim = int(values.get("dim", dims[0] if mode is Mode.DIMENSION and dims else 1))
    cfg = RunConfig(
        mode=mode, depth=depth, horizon=int(values.get("horizon", 10_000)),
        seed=int(values.get("seed", 0)), loss=loss, lipschitz=grid, dims=dims, dim=dim,
        tau=values.get("tau", "pow"), cover_constant=float(values.get("cover-constant", 1.0)),
        target=values.get("target", "mostly-flat"), stream=values.get("stream", "uniform"),
        noise=float(values.get("noise", 0.0)), baseline=_bool(values.get("baseline", False)),
        out=values.get("out", "run"), jobs=int(values.get("jobs", 1)))
    check(cfg)
    return cfg


def check(cfg: RunConfig) -> None:
    if cfg.horizon < 1 or cfg.jobs < 1 or cfg.dim < 1 or cfg.seed < 0:
        raise ConfigError("horizon, jobs, dim must be positive and seed nonnegative")
    if cfg.cover_constant <= 0 or not math.isfinite(cfg.cover_constant):
        raise ConfigError("cover constant must be positive")
    if cfg.mode is Mode.DIMENSION and cfg.dims and cfg.dims[0] != cfg.dim:
        raise ConfigError(f"first --dims entry ({cfg.dims[0]}) must equal --dim ({cfg.dim})")
    if cfg.mode is Mode.LIPSCHITZ and len(cfg.lipschitz) != cfg.depth:
        raise ConfigError(f"lipschitz grid has {len(cfg.lipschitz)} entries, depth is {cfg.depth}")
    if cfg.mode is Mode.DIMENSION and len(cfg.dims) != cfg.depth:
        raise ConfigError(f"dimension grid has {len(cfg.dims)} entries, depth is {cfg.depth}")
    if not cfg.out:
        raise ConfigError("empty output prefix")
    try:
        cfg.la_config()
        cfg.target_function()
        cfg.stream_spec().validate()
    except DomainError as err:
        raise ConfigError(str(err)) from None


def parse_config(argv=None) -> RunConfig:
    """Merge the optional config file with flags (flags win) into a RunConfig."""
    ns = vars(build_parser().parse_args(argv))
    values = {}
    if "config" in ns:
        raw = read_config_file(ns.pop("config"))
        for key, text in raw.items():
            try:
                values[key] = KEYS[key](text)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {text!r}") from None
    values.update(ns)
    return resolve(values)


# ---------------------------------------------------------------------------
# running


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(x.item() if hasattr(x, "item") else x) for x in v)
    return str(v)


def _check_invariants(cfg: RunConfig, log) -> None:
    try:
        log.tree.check_structure()
    except AssertionError as err:
        raise InvariantError(f"tree structure: {err}") from None
    schedule = log.config.schedule
    if cfg.mode is Mode.DIMENSION:
        bad = budget_violations(log.new_nodes, schedule, log.config.C)
        if bad:
            t, k = bad[0]
            raise InvariantError(f"level budget exceeded at round {t}, level {k}")
    else:
        report = covering_audit(log.tree, log, schedule)
        if not report.covering_ok:
            t, k = report.covering_failures[0]
            raise InvariantError(f"covering audit failed at round {t}, level {k}")
        if not report.packing_ok:
            raise InvariantError(f"packing audit failed at node {report.packing_failures[0]}")


def _bound(cfg: RunConfig, st, schedule, T):
    if cfg.mode is Mode.LIPSCHITZ:
        return lipschitz_bound(st, schedule, T)
    if cfg.mode is Mode.DIMENSION:
        return dimension_bound(st, schedule, T, cfg.cover_constant)
    return loss_bound(st, schedule, T)


def render(cfg: RunConfig) -> dict[str, str]:
    """Run the configured experiment and return ``{suffix: file contents}``."""
    f = cfg.target_function()
    stream = gen_stream(cfg.stream_spec(), f)
    log = run_la(stream, cfg.la_config())
    _check_invariants(cfg, log)
    schedule = log.config.schedule

    pruning, _ = best_pruning(log.tree, log)
    st = stats(log.tree, pruning, log)
    bound = _bound(cfg, st, schedule, log.T)
    regret = regret_vs_clean(log)

    results = [
        ("rng", RNG_ALGORITHM),
        ("T", log.T),
        ("cum_loss_la", float(log.loss.sum())),
        ("cum_regret_la", float(regret[-1])),
        ("M_T", log.M_T),
        ("level_counts", log.tree.level_counts[1:]),
        ("best_pruning_size", st.size),
        ("best_pruning_level_counts", st.leaf_counts),
        ("best_pruning_level_visits", st.visits),
        ("best_pruning_loss", st.total_loss),
        ("bound_tree", bound.tree),
        ("bound_estimation", bound.estimation),
        ("bound_approximation", bound.approximation),
        ("bound_cross", bound.cross),
        ("bound_total", bound.total),
    ]
    files = {
        "rounds.csv": rounds_csv(log),
        "tree.txt": export_tree(log.tree),
        "pruning.txt": pruning.export(),
        "regret.dat": "".join(f"{t} {r:.17g}\n" for t, r in enumerate(regret, 1)),
        "depth.dat": "".join(f"{x:.17g} {k}\n" for x, k in
                             sorted(zip(log.x[:, 0].tolist(), log.top_level.tolist()))),
    }
    if cfg.baseline:
        hm = run_hm(stream, cfg.global_lipschitz, cfg.dim, cfg.loss)
        hm_regret = regret_vs_clean(hm)
        files["hm.rounds.csv"] = rounds_csv(hm)
        files["compare.csv"] = "t,cum_regret_la,cum_regret_hm\n" + "".join(
            f"{t},{a:.17g},{b:.17g}\n" for t, (a, b) in enumerate(zip(regret, hm_regret), 1))
        results += [("cum_loss_hm", float(hm.loss.sum())), ("cum_regret_hm", float(hm_regret[-1])),
                    ("M_T_hm", hm.M_T)]

    summary = ["[config]"] + [f"{k} = {v}" for k, v in cfg.echo()]
    summary += ["", "[results]"] + [f"{k} = {_fmt(v)}" for k, v in results]
    files["summary.txt"] = "\n".join(summary) + "\n"
    return files


def write_outputs(prefix: str, files: dict[str, str]) -> list[str]:
    """Write every file to a temp name, then rename all; nothing is left behind on error."""
    directory = os.path.dirname(os.path.abspath(prefix))
    staged = []
    try:
        for suffix, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=directory, prefix=".locadapt-", suffix=".tmp")
            staged.append((tmp, f"{prefix}.{suffix}"))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        for tmp, final in staged:
            os.replace(tmp, final)
    except OSError:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise
    return [final for _, final in staged]


def run(cfg: RunConfig) -> int:
    """Run one configuration (fanning out seeds when ``jobs > 1``); returns an exit code."""
    if cfg.jobs == 1:
        return _run_one(cfg)
    jobs = [replace(cfg, seed=cfg.seed + j, out=f"{cfg.out}-s{cfg.seed + j}", jobs=1)
            for j in range(cfg.jobs)]
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        codes = list(pool.map(_run_one, jobs))
    return max(codes)


def _run_one(cfg: RunConfig) -> int:
    try:
        files = render(cfg)
    except InvariantError as err:
        print(f"locadapt: invariant breach: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    try:
        write_outputs(cfg.out, files)
    except OSError as err:
        print(f"locadapt: cannot write outputs for {cfg.out}: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as err:
        # argparse reports usage errors itself and exits with 2
        return int(err.code or 0)
    except ConfigError as err:
        print(f"locadapt: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
