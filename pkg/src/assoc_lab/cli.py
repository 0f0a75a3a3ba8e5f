"""Command-line front end.

Subcommands:
  generate   write an ensemble in the line-oriented text format
  stability  estimate the fixed-point rate for a single parameter cell
  sweep      run a (dims x gamma x alpha) grid and emit CSV or JSON
  selftest   run the oracle-equivalence and dominance checks

Configs are flat ``key = value`` files with ``#`` comments; command-line
flags override file keys; unknown keys are a hard error. Exit codes:
0 success, 2 config/usage error, 3 runtime error (including an
overflow, an enumeration-budget refusal, or a selftest failure).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import AssocLabError, ConfigError
from .experiments import DEFAULT_CAPACITY_CAP, SweepRecord, iter_sweep
from .fields import (
    DEFAULT_BUDGET,
    FixedOrder,
    LogarithmicOrder,
    ModelKind,
    field_amari,
    field_gb,
    field_gb_upper_bound,
    field_oracle,
    field_willshaw,
)
from .patterns import (
    BlockLayout,
    default_sparsity,
    gen_bernoulli,
    gen_fixed_weight,
    gen_gb,
    ensemble_to_text,
)

THREADS_ENV = "ASSOC_LAB_THREADS"

CSV_COLUMNS = [
    "model", "N", "l", "c", "n_resolved", "kappa", "gamma", "alpha", "M",
    "trials", "stable_count", "rate", "ci_low", "ci_high", "zero_patterns",
    "seed", "status", "wall_ms",
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


# -- config handling -----------------------------------------------------------

_FLOAT_LIST = "float_list"
_INT_LIST = "int_list"

# key -> (parser kind, default); None default means "required for the command"
_CONFIG_KEYS: dict[str, tuple[str, object]] = {
    "model": ("str", None),
    "N": (_INT_LIST, None),
    "l": (_INT_LIST, None),
    "c": (_INT_LIST, None),
    "order": ("int", None),
    "kappa": ("float", None),
    "gamma": (_FLOAT_LIST, None),
    "alpha": (_FLOAT_LIST, None),
    "trials": ("int", None),
    "seed": ("int", 0),
    "patterns": ("str", "bernoulli"),
    "delta": ("float", 0.5),
    "threads": ("int", None),
    "format": ("str", "csv"),
    "out": ("str", "-"),
    "reproducible": ("bool", False),
    "capacity_cap": ("int", DEFAULT_CAPACITY_CAP),
    "budget": ("int", DEFAULT_BUDGET),
    "progress": ("bool", False),
}

# execution-only keys: never echoed, so outputs stay byte-identical across
# worker counts and destinations
_NO_ECHO = {"threads", "out", "format", "progress"}


def _parse_value(key: str, raw: str):
    kind = _CONFIG_KEYS[key][0]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == _INT_LIST:
            return [int(tok) for tok in raw.split(",") if tok.strip() != ""]
        if kind == _FLOAT_LIST:
            return [float(tok) for tok in raw.split(",") if tok.strip() != ""]
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for key {key!r}: {raw!r}") from exc


def _read_config_file(path: str) -> dict:
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate config key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


@dataclass
class RunConfig:
    """Fully resolved experiment configuration for stability/sweep runs."""

    kind: ModelKind
    order: object
    dims_grid: list
    gammas: list[float]
    alphas: list[float]
    trials: int
    seed: int
    patterns: str
    delta: float
    threads: int
    out_format: str
    out: str
    reproducible: bool
    capacity_cap: int
    budget: int
    progress: bool
    echo: dict

    @property
    def dim_key(self) -> str:
        return "l,c" if self.kind is ModelKind.GB else "N"


def _resolve_config(values: dict) -> RunConfig:
    def need(key: str):
        if key not in values or values[key] is None:
            raise ConfigError(f"missing required config key {key!r}")
        return values[key]

    model = str(need("model")).lower()
    try:
        kind = ModelKind(model)
    except ValueError:
        raise ConfigError(f"model must be amari|willshaw|gb, got {model!r}") from None

    has_order = values.get("order") is not None
    has_kappa = values.get("kappa") is not None
    if has_order == has_kappa:
        raise ConfigError("exactly one of 'order' (fixed) or 'kappa' (logarithmic) is required")
    order = FixedOrder(int(values["order"])) if has_order else LogarithmicOrder(float(values["kappa"]))

    if kind is ModelKind.GB:
        ls = need("l")
        cs = need("c")
        if values.get("N") is not None:
            raise ConfigError("GB runs take 'l' and 'c', not 'N'")
        if len(ls) != len(cs):
            raise ConfigError("'l' and 'c' grids must have equal length")
        dims_grid: list = [(int(a), int(b)) for a, b in zip(ls, cs)]
    else:
        if values.get("l") is not None or values.get("c") is not None:
            raise ConfigError(f"{model} runs take 'N', not 'l'/'c'")
        dims_grid = [int(v) for v in need("N")]

    gammas = [float(g) for g in need("gamma")]
    alphas = [float(a) for a in need("alpha")]
    trials = int(need("trials"))
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    seed = int(values.get("seed", 0))
    if not 0 <= seed < (1 << 64):
        raise ConfigError("seed must fit in 64 unsigned bits")
    patterns = str(values.get("patterns", "bernoulli"))
    if patterns not in ("bernoulli", "fixed_weight"):
        raise ConfigError(f"patterns must be bernoulli|fixed_weight, got {patterns!r}")
    delta = float(values.get("delta", 0.5))
    out_format = str(values.get("format", "csv"))
    if out_format not in ("csv", "json"):
        raise ConfigError(f"format must be csv|json, got {out_format!r}")

    threads = values.get("threads")
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    threads = int(threads)
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")

    echo: dict = {"model": model, "trials": trials, "seed": seed,
                  "patterns": patterns, "delta": delta,
                  "gamma": gammas, "alpha": alphas,
                  "capacity_cap": int(values.get("capacity_cap", DEFAULT_CAPACITY_CAP)),
                  "budget": int(values.get("budget", DEFAULT_BUDGET)),
                  "reproducible": bool(values.get("reproducible", False))}
    if has_order:
        echo["order"] = order.n
    else:
        echo["kappa"] = order.kappa
    if kind is ModelKind.GB:
        echo["l"] = [d[0] for d in dims_grid]
        echo["c"] = [d[1] for d in dims_grid]
    else:
        echo["N"] = dims_grid

    return RunConfig(
        kind=kind, order=order, dims_grid=dims_grid, gammas=gammas,
        alphas=alphas, trials=trials, seed=seed, patterns=patterns,
        delta=delta, threads=threads, out_format=out_format,
        out=str(values.get("out", "-")), reproducible=echo["reproducible"],
        capacity_cap=echo["capacity_cap"], budget=echo["budget"],
        progress=bool(values.get("progress", False)), echo=echo,
    )


def _echo_lines(echo: dict) -> list[str]:
    out = []
    for key in sorted(echo):
        val = echo[key]
        if isinstance(val, list):
            text = ",".join(_fmt(v) for v in val)
        elif isinstance(val, bool):
            text = "true" if val else "false"
        else:
            text = _fmt(val)
        out.append(f"{key}={text}")
    return out


# -- output rendering ------------------------------------------------------------


def _record_cells(rec: SweepRecord, reproducible: bool) -> dict:
    est = rec.estimate
    cells = {
        "model": rec.model,
        "N": rec.N,
        "l": rec.l,
        "c": rec.c,
        "n_resolved": rec.n_resolved,
        "kappa": rec.kappa,
        "gamma": rec.gamma,
        "alpha": rec.alpha,
        "M": rec.M,
        "trials": rec.trials,
        "stable_count": est.successes if est else None,
        "rate": est.rate if est else None,
        "ci_low": est.ci_low if est else None,
        "ci_high": est.ci_high if est else None,
        "zero_patterns": rec.zero_patterns,
        "seed": rec.seed,
        "status": rec.status if rec.status == "ok" else
                  "skipped:" + (rec.reason or "").split(":")[0],
        "wall_ms": None if reproducible else rec.wall_ms,
    }
    return cells


def _csv_row(rec: SweepRecord, reproducible: bool) -> str:
    cells = _record_cells(rec, reproducible)
    cols = [c for c in CSV_COLUMNS if not (reproducible and c == "wall_ms")]
    return ",".join(_fmt(cells[c]) for c in cols)


def _csv_header(reproducible: bool) -> str:
    cols = [c for c in CSV_COLUMNS if not (reproducible and c == "wall_ms")]
    return ",".join(cols)


def _json_record(rec: SweepRecord, reproducible: bool) -> dict:
    obj = _record_cells(rec, reproducible)
    if reproducible:
        obj.pop("wall_ms", None)
    if rec.status != "ok":
        obj["reason"] = rec.reason
    return obj


class _Output:
    """Write-through text sink: stdout or a file, flushed per record."""

    def __init__(self, path: str):
        self.path = path
        self._fh: IO[str] | None = None

    def __enter__(self) -> IO[str]:
        if self.path == "-":
            self._fh = None
            return sys.stdout
        self._fh = open(self.path, "w", encoding="ascii", newline="\n")
        return self._fh

    def __exit__(self, *exc) -> None:
        if self._fh is not None:
            self._fh.close()


def _emit_records(cfg: RunConfig, records: Iterable[SweepRecord]) -> int:
    skipped = ok = 0
    with _Output(cfg.out) as fh:
        if cfg.out_format == "csv":
            for line in _echo_lines(cfg.echo):
                fh.write(f"# {line}\n")
            fh.write(_csv_header(cfg.reproducible) + "\n")
            fh.flush()
            for rec in records:
                fh.write(_csv_row(rec, cfg.reproducible) + "\n")
                fh.flush()
                ok, skipped = ok + (rec.status == "ok"), skipped + (rec.status != "ok")
                if cfg.progress:
                    print(f"[cell] {rec.model} dims={rec.N} gamma={rec.gamma} "
                          f"alpha={rec.alpha} status={rec.status}", file=sys.stderr)
        else:
            objs = []
            for rec in records:
                objs.append(_json_record(rec, cfg.reproducible))
                ok, skipped = ok + (rec.status == "ok"), skipped + (rec.status != "ok")
                if cfg.progress:
                    print(f"[cell] {rec.model} dims={rec.N} gamma={rec.gamma} "
                          f"alpha={rec.alpha} status={rec.status}", file=sys.stderr)
            payload = {"config": {k: cfg.echo[k] for k in sorted(cfg.echo)},
                       "records": objs}
            fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"cells: {ok + skipped}, ok: {ok}, skipped: {skipped}", file=sys.stderr)
    return 0


# -- subcommands -------------------------------------------------------------------


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.m < 1:
        raise ConfigError(f"--m must be >= 1, got {args.m}")
    if args.mode == "bernoulli":
        if args.n is None:
            raise ConfigError("--mode bernoulli requires --n")
        p = args.p if args.p is not None else default_sparsity(args.n)
        ensemble = gen_bernoulli(args.n, p, args.m, args.seed)
    elif args.mode == "fixed":
        if args.n is None or args.c_active is None:
            raise ConfigError("--mode fixed requires --n and --c-active")
        ensemble = gen_fixed_weight(args.n, args.c_active, args.m, args.seed)
    else:
        if args.l is None or args.c is None:
            raise ConfigError("--mode gb requires --l and --c")
        ensemble = gen_gb(BlockLayout(args.l, args.c), args.m, args.seed)
    text = ensemble_to_text(ensemble)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="ascii", newline="\n") as f:
            f.write(text)
    return 0


def _gather_config(args: argparse.Namespace) -> RunConfig:
    values = _read_config_file(args.config) if args.config else {}
    for key in _CONFIG_KEYS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            values[key] = _parse_value(key, flag) if isinstance(flag, str) else flag
    return _resolve_config(values)


def _run_grid(cfg: RunConfig, singleton: bool) -> int:
    if singleton:
        sizes = (len(cfg.dims_grid), len(cfg.gammas), len(cfg.alphas))
        if sizes != (1, 1, 1):
            raise ConfigError(
                f"stability takes single values for {cfg.dim_key}, gamma, alpha "
                f"(got grid sizes {sizes}); use sweep for grids"
            )
    records = iter_sweep(
        cfg.kind, cfg.order, cfg.dims_grid, cfg.gammas, cfg.alphas, cfg.trials,
        cfg.seed, delta=cfg.delta, pattern_mode=cfg.patterns,
        threads=cfg.threads, cap=cfg.capacity_cap, budget=cfg.budget)
    return _emit_records(cfg, records)


def _cmd_stability(args: argparse.Namespace) -> int:
    return _run_grid(_gather_config(args), singleton=True)


def _cmd_sweep(args: argparse.Namespace) -> int:
    return _run_grid(_gather_config(args), singleton=False)


# -- selftest ---------------------------------------------------------------------


def _selftest_instances(seed: int):
    rng = np.random.default_rng(seed)

    def bern(count):
        for _ in range(count):
            n_dim = int(rng.integers(4, 13))
            n = int(rng.integers(2, 4))
            m = int(rng.integers(1, 9))
            p = float(rng.choice([0.2, 0.5]))
            ens = gen_bernoulli(n_dim, p, m, int(rng.integers(1 << 62)))
            probe = (ens.pattern(0) if rng.random() < 0.5
                     else gen_bernoulli(n_dim, p, 1, int(rng.integers(1 << 62))).pattern(0))
            yield ens, probe, n

    def gb(count):
        for _ in range(count):
            n = int(rng.integers(2, 4))
            l = int(rng.integers(max(2, n), 7))
            c = int(rng.integers(2, 4))
            m = int(rng.integers(1, 9))
            lay = BlockLayout(l, c)
            ens = gen_gb(lay, m, int(rng.integers(1 << 62)))
            probe = (ens.pattern(0) if rng.random() < 0.5
                     else gen_gb(lay, 1, int(rng.integers(1 << 62))).pattern(0))
            yield ens, probe, n

    return bern, gb


def run_selftest(out: IO[str], instances: int = 60, seed: int = 20260810) -> bool:
    """Cross-check the fast evaluators against the literal oracle and the
    dominance bounds on random small instances; print one line per check."""
    import math as _math

    bern, gb = _selftest_instances(seed)
    all_ok = True

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal all_ok
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'} {name}{' ' + detail if detail else ''}",
              file=out)

    ok = True
    for ens, probe, n in bern(instances):
        if field_amari(ens, probe, n).as_list() != \
                field_oracle(ens, probe, n, ModelKind.AMARI).as_list():
            ok = False
            break
    check("oracle-equivalence amari", ok, f"({instances} instances)")

    ok = True
    for ens, probe, n in bern(instances):
        if field_willshaw(ens, probe, n).as_list() != \
                field_oracle(ens, probe, n, ModelKind.WILLSHAW).as_list():
            ok = False
            break
    check("oracle-equivalence willshaw", ok, f"({instances} instances)")

    ok = True
    for ens, probe, n in gb(instances):
        fast = [v * _math.factorial(n - 1) for v in field_gb(ens, probe, n).as_list()]
        if fast != field_oracle(ens, probe, n, ModelKind.GB).as_list():
            ok = False
            break
    check("oracle-equivalence gb", ok, f"({instances} instances)")

    ok = True
    for ens, probe, n in bern(instances):
        am = field_amari(ens, probe, n).as_list()
        wi = field_willshaw(ens, probe, n).as_list()
        if any(w > a for w, a in zip(wi, am)):
            ok = False
            break
    check("dominance willshaw<=amari", ok, f"({instances} instances)")

    ok = True
    for ens, probe, n in gb(instances):
        if probe.weight != ens.gb_layout().l:
            continue
        vals = field_gb(ens, probe, n).as_list()
        if any(vals[i] > field_gb_upper_bound(ens, probe, n, i)
               for i in range(ens.dim)):
            ok = False
            break
    check("dominance gb<=upper-bound", ok, f"({instances} instances)")
    return all_ok


def _cmd_selftest(args: argparse.Namespace) -> int:
    ok = run_selftest(sys.stdout, instances=args.instances)
    print("selftest: " + ("all checks passed" if ok else "FAILURES detected"))
    return 0 if ok else 3


# -- entry point --------------------------------------------------------------------


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--model", type=str, help="amari | willshaw | gb")
    sub.add_argument("--N", type=str, help="dimension grid, comma separated")
    sub.add_argument("--l", type=str, help="GB block-count grid")
    sub.add_argument("--c", type=str, help="GB block-size grid (zipped with --l)")
    sub.add_argument("--order", type=str, help="fixed interaction order n >= 2")
    sub.add_argument("--kappa", type=str, help="logarithmic order coefficient")
    sub.add_argument("--gamma", type=str, help="threshold parameter grid")
    sub.add_argument("--alpha", type=str, help="load parameter grid")
    sub.add_argument("--trials", type=str, help="Monte Carlo trials per cell")
    sub.add_argument("--seed", type=str, help="master seed (64-bit)")
    sub.add_argument("--patterns", type=str, help="bernoulli | fixed_weight")
    sub.add_argument("--delta", type=str, help="sparsity-event parameter")
    sub.add_argument("--threads", type=str,
                     help=f"worker threads (default ${THREADS_ENV} or 1)")
    sub.add_argument("--format", type=str, help="csv | json")
    sub.add_argument("--out", type=str, help="output path, '-' for stdout")
    sub.add_argument("--reproducible", action="store_const", const=True,
                     default=None, help="omit wall-clock fields from output")
    sub.add_argument("--capacity-cap", dest="capacity_cap", type=str,
                     help="hard cap on M")
    sub.add_argument("--budget", type=str, help="subset enumeration budget")
    sub.add_argument("--progress", action="store_const", const=True,
                     default=None, help="per-cell progress on stderr")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assoc-lab",
        description="Sparse associative memory simulation lab",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="write a pattern ensemble file")
    gen.add_argument("--mode", required=True, choices=["bernoulli", "fixed", "gb"])
    gen.add_argument("--n", type=int, help="dimension N (bernoulli/fixed)")
    gen.add_argument("--p", type=float, help="activation probability (default ln N / N)")
    gen.add_argument("--c-active", dest="c_active", type=int,
                     help="active count per pattern (fixed mode)")
    gen.add_argument("--l", type=int, help="block count (gb mode)")
    gen.add_argument("--c", type=int, help="block size (gb mode)")
    gen.add_argument("--m", type=int, required=True, help="number of patterns")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=str, default="-")
    gen.set_defaults(func=_cmd_generate)

    stab = subs.add_parser("stability", help="single-cell stability estimate")
    _add_config_flags(stab)
    stab.set_defaults(func=_cmd_stability)

    swp = subs.add_parser("sweep", help="grid sweep to CSV/JSON")
    _add_config_flags(swp)
    swp.set_defaults(func=_cmd_sweep)

    st = subs.add_parser("selftest", help="oracle-equivalence spot checks")
    st.add_argument("--instances", type=int, default=60)
    st.set_defaults(func=_cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AssocLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
