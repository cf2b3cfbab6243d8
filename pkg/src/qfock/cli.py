"""``qfock`` command line: experiment configuration, dispatch and artifacts.

Exit codes: 0 success, 1 operational or configuration error, 2 when some
report row carries a false verdict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import qsym
from .qsym import QFockError

EXPERIMENTS = ("gram", "ao-witness", "crossover", "phi-flow", "trace-collapse", "cq")

CONFIG_KEYS = {
    "experiment", "q", "d", "N", "k", "m", "delta", "i", "tol", "tail_tol",
    "n", "r", "mode", "out", "format", "seed", "threads",
}

# per-experiment defaults for fields whose natural value depends on the experiment
_EXPERIMENT_DEFAULTS = {
    "gram": {"k": (1, 2, 3, 4)},
    "ao-witness": {"N": 6, "k": (1, 2, 3)},
    "phi-flow": {"N": 4, "mode": "dense", "m": (2, 4, 8, 16)},
    "trace-collapse": {"d": 1, "m": (4,), "n": 2},
}

_MAX_SPARSE_DIM = 2_000_000

_COMMON = ("format", "out")
RELEVANT_KEYS = {
    "gram": ("d", "k") + _COMMON,
    "ao-witness": ("d", "N", "k", "delta", "i", "tol", "mode", "threads") + _COMMON,
    "crossover": ("d", "delta") + _COMMON,
    "phi-flow": ("N", "m", "n", "mode") + _COMMON,
    "trace-collapse": ("d", "N", "m", "n", "r", "seed") + _COMMON,
    "cq": ("tail_tol",) + _COMMON,
}


class ConfigError(QFockError, ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    q: float
    d: int = 2
    N: Optional[int] = None
    k_range: tuple = (1, 2, 3)
    m_range: tuple = (2, 4, 8, 16)
    delta: float = 0.01
    i_list: tuple = (1,)
    tol: float = 1e-12
    tail_tol: float = 1e-12
    n: int = 1
    r_max: int = 5
    mode: str = "matrix-free"
    out: Optional[str] = None
    format: str = "json"
    seed: int = 0
    threads: int = 1
    defaulted: tuple = field(default=(), compare=False)


_KEY_TO_FIELD = {"k": "k_range", "m": "m_range", "i": "i_list", "r": "r_max"}


def parse_range(text: str) -> tuple:
    """``a..b`` (inclusive), ``a,b,c`` or a single integer."""
    text = str(text).strip()
    if ".." in text:
        a, b = text.split("..", 1)
        a, b = int(a), int(b)
        if b < a:
            raise ValueError(f"empty range {text!r}")
        return tuple(range(a, b + 1))
    items = [s for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError(f"empty list {text!r}")
    return tuple(int(s) for s in items)


def _convert(key: str, value):
    try:
        if key in ("q", "delta", "tol", "tail_tol"):
            return float(value)
        if key in ("d", "N", "n", "r", "seed", "threads"):
            return int(value)
        if key in ("k", "m", "i"):
            return parse_range(value) if isinstance(value, str) else tuple(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key}: {value!r} ({exc})") from None


def read_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def parse_config(argv=None, text: Optional[str] = None) -> ExperimentConfig:
    """Build a validated config from flags, an optional config file, or ``text``.

    Precedence: flags > config file (``--config`` or ``text``) > defaults.
    """
    args = _parser().parse_args(argv if argv is not None else [])
    values = {}
    if text is not None:
        values.update(read_config_text(text))
    if getattr(args, "config", None):
        values.update(read_config_text(Path(args.config).read_text()))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _convert(key, v)
    if getattr(args, "experiment", None):
        values["experiment"] = args.experiment
    return build_config(values)


def build_config(values: dict) -> ExperimentConfig:
    values = dict(values)
    unknown = set(values) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r}")
    exp = values.get("experiment")
    if exp is None:
        raise ConfigError("missing required field: experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
    if "q" not in values:
        raise ConfigError("missing required field: q")
    defaulted = []
    for key, v in _EXPERIMENT_DEFAULTS.get(exp, {}).items():
        if key not in values:
            values[key] = v
            defaulted.append(key)
    if exp == "trace-collapse" and "N" not in values:
        values["N"] = values.get("n", 1) + 2
        defaulted.append("N")
    kwargs = {}
    for key, v in values.items():
        kwargs[_KEY_TO_FIELD.get(key, key)] = v
    names = {f.name for f in fields(ExperimentConfig)}
    for f in fields(ExperimentConfig):
        if f.name not in kwargs and f.name not in ("defaulted", "experiment", "q"):
            inv = {v: k for k, v in _KEY_TO_FIELD.items()}
            defaulted.append(inv.get(f.name, f.name))
    assert set(kwargs) <= names
    cfg = ExperimentConfig(**kwargs, defaulted=tuple(sorted(set(defaulted))))
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if not -1.0 < cfg.q < 1.0 or math.isnan(cfg.q):
        raise ConfigError(f"q out of range: need |q| < 1, got q={cfg.q}")
    if cfg.d < 1:
        raise ConfigError(f"d out of range: need d >= 1, got d={cfg.d}")
    if cfg.N is not None and cfg.N < 1:
        raise ConfigError(f"N out of range: need N >= 1, got N={cfg.N}")
    for name, seq, lo in (("k", cfg.k_range, 0), ("m", cfg.m_range, 1), ("i", cfg.i_list, 1)):
        if not seq:
            raise ConfigError(f"{name} range is empty")
        if min(seq) < lo:
            raise ConfigError(f"{name} out of range: values must be >= {lo}, got {seq}")
    if cfg.delta < 0:
        raise ConfigError(f"delta out of range: need delta >= 0, got {cfg.delta}")
    if cfg.tol <= 0 or cfg.tail_tol <= 0:
        raise ConfigError("tol out of range: tolerances must be positive")
    if cfg.n < 0 or cfg.r_max < 0:
        raise ConfigError("n and r must be non-negative")
    if cfg.mode not in ("dense", "matrix-free"):
        raise ConfigError(f"mode must be 'dense' or 'matrix-free', got {cfg.mode!r}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be 'csv' or 'json', got {cfg.format!r}")
    if cfg.threads < 1:
        raise ConfigError(f"threads out of range: need threads >= 1, got {cfg.threads}")
    cap = qsym.DEFAULT_DENSE_CAP
    exp = cfg.experiment
    if exp == "gram" and cfg.d ** max(cfg.k_range) > cap:
        raise ConfigError(f"k out of range: d^k = {cfg.d ** max(cfg.k_range)} exceeds dense cap {cap}")
    if exp == "ao-witness":
        kmax = max(cfg.k_range)
        if cfg.N < kmax:
            raise ConfigError(f"N out of range: tensor norms need N >= max k = {kmax}")
        if cfg.d**kmax > cap:
            raise ConfigError(f"k out of range: d^k = {cfg.d**kmax} exceeds dense cap {cap}")
        n_r = max(cfg.N, 2 * kmax + 1)
        if (cfg.d + max(cfg.i_list)) ** n_r > _MAX_SPARSE_DIM:
            raise ConfigError(f"N out of range: restricted-side level dimension too large at N={n_r}")
    if exp == "crossover" and cfg.q == 0:
        pass
    if exp == "phi-flow":
        if min(cfg.m_range) < 2:
            raise ConfigError("m out of range: phi-flow needs m >= 2")
        if cfg.N < cfg.n + 3:
            raise ConfigError(f"N out of range: phi-flow needs N >= n + 3 = {cfg.n + 3}")
        if max(cfg.m_range) ** cfg.N > _MAX_SPARSE_DIM:
            raise ConfigError(f"N out of range: max(m)^N = {max(cfg.m_range) ** cfg.N} too large")
    if exp == "trace-collapse":
        m = cfg.m_range[0]
        N = cfg.N if cfg.N is not None else cfg.n + 2
        if N < cfg.n + 2:
            raise ConfigError(f"N out of range: trace-collapse needs N >= n + 2 = {cfg.n + 2}")
        if max(m, cfg.d) ** N > _MAX_SPARSE_DIM:
            raise ConfigError("N out of range: space too large")


# -- artifacts ------------------------------------------------------------


def _num(x):
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    x = float(x)
    return None if not math.isfinite(x) else x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _num(obj)


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "" if not math.isfinite(v) else format(v, ".17g")
    return str(v)


def _short(v) -> str:
    return repr(v) if isinstance(v, float) and math.isfinite(v) else _cell(v)


def render_json(artifact: dict) -> str:
    return json.dumps(_clean(artifact), indent=2) + "\n"


def render_csv(artifact: dict) -> str:
    rows = artifact.get("rows", [])
    buf = io.StringIO()
    if artifact.get("partial"):
        buf.write("# partial\n")
    if rows:
        cols = list(rows[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(_num(r[c])) for c in cols])
    return buf.getvalue()


# -- experiments ----------------------------------------------------------


def _run_gram(cfg, rows):
    for k in cfg.k_range:
        g = qsym.pq_factored(k, cfg.d, cfg.q)
        lo, hi = qsym.gram_extrema(g)
        try:
            dense = qsym.pq_dense(k, cfg.d, cfg.q)
            resid = float(abs(dense.matrix - g.matrix).max())
        except qsym.BudgetExceeded:
            resid = float("nan")
        rows.append({"k": k, "dim": g.dim, "min_eig": lo, "max_eig": hi, "dense_residual": resid})
    return {"params": {"q": cfg.q, "d": cfg.d}, "rows": rows}


def _run_ao(cfg, rows):
    from .witness import ao_witness_report

    reports = []

    def on_row(r):
        reports.append(r)
        rows.append(r.row())

    ao_witness_report(
        cfg.q, cfg.d, cfg.k_range, cfg.N, cfg.delta, cfg.i_list,
        mode=cfg.mode, tol=cfg.tol, threads=cfg.threads, on_row=on_row,
    )
    art = {
        "params": {"q": cfg.q, "d": cfg.d, "delta": cfg.delta, "N": cfg.N},
        "rows": rows,
        "crossover_k": reports[0].crossover_k if reports else None,
    }
    if cfg.q < 0:
        art["flags"] = ["q < 0: C_q evaluated as printed, prod (1 - q^i)^(-1)"]
    return art


def _run_crossover(cfg, rows):
    from .witness import crossover_k, crossover_predicate

    k = crossover_k(cfg.q, cfg.d, cfg.delta)
    rows.append({
        "k_star": k,
        "predicate_at_k_star": crossover_predicate(cfg.q, cfg.d, cfg.delta, k),
        "predicate_before": crossover_predicate(cfg.q, cfg.d, cfg.delta, k - 1) if k > 1 else False,
    })
    return {"params": {"q": cfg.q, "d": cfg.d, "delta": cfg.delta}, "rows": rows}


def _run_phi(cfg, rows):
    from .witness import phi_flow

    res = phi_flow(cfg.q, cfg.m_range, N=cfg.N, n=cfg.n, mode=cfg.mode)
    rows.extend(res["rows"])
    return {
        "params": {"q": cfg.q, "N": cfg.N, "n": cfg.n, "D": res["D"], "window": res["window"]},
        "rows": rows,
        "slope": res["slope"],
        "vacuum_slope": res["vacuum_slope"],
    }


def _run_trace(cfg, rows):
    from .witness import trace_collapse

    res = trace_collapse(cfg.q, n=cfg.n, d=cfg.d, m=cfg.m_range[0], N=cfg.N, r_max=cfg.r_max, seed=cfg.seed)
    rows.extend(res["rows"])
    return {
        "params": {"q": cfg.q, "n": cfg.n, "d": cfg.d, "N": res["N"], "seed": cfg.seed},
        "rows": rows,
        "phi_step": res["phi_step"],
    }


def _run_cq(cfg, rows):
    from .witness import cq

    rows.append({"q": cfg.q, "tail_tol": cfg.tail_tol, "cq": cq(cfg.q, cfg.tail_tol)})
    return {"params": {"q": cfg.q}, "rows": rows}


_RUNNERS = {
    "gram": _run_gram,
    "ao-witness": _run_ao,
    "crossover": _run_crossover,
    "phi-flow": _run_phi,
    "trace-collapse": _run_trace,
    "cq": _run_cq,
}


def verdicts_failed(artifact: dict) -> bool:
    for r in artifact.get("rows", []):
        for key in ("ok_lower", "ok_upper", "ok"):
            if r.get(key) is False:
                return True
    step = artifact.get("phi_step")
    if isinstance(step, dict) and step.get("ok") is False:
        return True
    return False


def _summary(cfg: ExperimentConfig, artifact: dict) -> str:
    lines = [f"# qfock {cfg.experiment}"]
    if cfg.defaulted:
        shown: list = []
        for key in cfg.defaulted:
            if key not in RELEVANT_KEYS[cfg.experiment]:
                continue
            v = getattr(cfg, _KEY_TO_FIELD.get(key, key))
            shown.append(f"{key}={v}")
        if shown:
            lines.append("# defaults: " + ", ".join(shown))
    rows = artifact.get("rows", [])
    if rows:
        cols = list(rows[0].keys())
        cells = [[_short(_num(r[c])) for c in cols] for r in rows]
        widths = [max(len(c), *(len(row[j]) for row in cells)) for j, c in enumerate(cols)]
        lines.append("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
        for row in cells:
            lines.append("  ".join(v.rjust(w) for v, w in zip(row, widths)))
    for key, v in artifact.items():
        if key not in ("rows", "params"):
            lines.append(f"{key}: {json.dumps(_clean(v))}")
    return "\n".join(lines) + "\n"


def _emit(cfg: ExperimentConfig, artifact: dict, stdout) -> None:
    text = render_json(artifact) if cfg.format == "json" else render_csv(artifact)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        stdout.write(text)


def run(cfg: ExperimentConfig, stdout=None) -> int:
    """Execute an experiment; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    rows: list = []
    try:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=1):
            artifact = _RUNNERS[cfg.experiment](cfg, rows)
    except (QFockError, ValueError, MemoryError, KeyboardInterrupt) as exc:
        partial = {"params": {"q": cfg.q}, "rows": rows, "partial": True, "error": str(exc)}
        if rows:
            _emit(cfg, partial, stdout)
        print(f"qfock {cfg.experiment}: error: {exc}", file=sys.stderr)
        return 1
    stdout.write(_summary(cfg, artifact))
    _emit(cfg, artifact, stdout)
    return 2 if verdicts_failed(artifact) else 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qfock", description="Numerical experiments on truncated q-Fock spaces.")
    sub = p.add_subparsers(dest="experiment")
    for name in EXPERIMENTS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key = value file; flags override it")
        s.add_argument("--q", type=str)
        s.add_argument("--d", type=str)
        s.add_argument("--N", type=str)
        s.add_argument("--k", type=str, help="a..b or a,b,c")
        s.add_argument("--m", type=str, help="comma list, e.g. 2,4,8,16")
        s.add_argument("--delta", type=str)
        s.add_argument("--i", type=str, help="subspace indices, comma list")
        s.add_argument("--tol", type=str)
        s.add_argument("--tail-tol", dest="tail_tol", type=str)
        s.add_argument("--n", type=str, help="Wick degree for phi-flow / trace-collapse")
        s.add_argument("--r", type=str, help="iterations for trace-collapse")
        s.add_argument("--mode", choices=("dense", "matrix-free"))
        s.add_argument("--out")
        s.add_argument("--format", choices=("csv", "json"))
        s.add_argument("--seed", type=str)
        s.add_argument("--threads", type=str)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"qfock: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"qfock: cannot read config: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
