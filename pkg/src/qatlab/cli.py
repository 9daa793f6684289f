"""Command-line driver. Every command writes CSV preceded by ``# key = value`` lines.

Configuration precedence: built-in defaults, then ``--config`` file, then flags.
Exit status: 0 success, 1 failed verification, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import math
import sys
from contextlib import contextmanager
from typing import Callable

import numpy as np

from . import bench as bench_mod
from . import fourier, stats, train as train_mod, verify as verify_mod
from .quantizer import QuantConfig, compute_scale, dequantize, quantize
from .surrogates import DEFAULT_AMPLITUDE, DEFAULT_ORDER, DSQ, RDFS, STE, parse_spec
from .surrogates import g_dsq, g_rdfs, DsqLayout
from .tensor import Rng, Tensor

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _optional_bits(v: str):
    if str(v).lower() in ("none", "off", "fp"):
        return None
    return int(v)


# flag name -> parser; config files use the same names (dashes or underscores)
KEY_TYPES: dict[str, Callable] = {
    "bits": _optional_bits,
    "amplitude": float,
    "order": int,
    "alpha": float,
    "surrogate": str,
    "samples": int,
    "seed": int,
    "steps": int,
    "lr": float,
    "out": str,
    "scale": str,
    "input": str,
    "random": int,
    "n": int,
    "repeats": int,
    "theorem": str,
    "l": float,
    "u": float,
    "batch_size": int,
    "dataset": str,
    "log_every": int,
    "degree": int,
    "lo": float,
    "hi": float,
    "points": int,
}

_SURROGATE_KEYS = {"surrogate": "rdfs", "amplitude": DEFAULT_AMPLITUDE, "order": DEFAULT_ORDER, "alpha": 0.2}

DEFAULTS: dict[str, dict] = {
    "quantize": {"bits": 3, "scale": "1.0", "input": None, "random": None, "seed": 0, "out": None},
    "surrogate-eval": {**_SURROGATE_KEYS, "bits": 3, "lo": -2.0, "hi": 2.0, "points": 41, "out": None},
    "fourier": {"degree": 5, "out": None},
    "verify": {"theorem": "fourier", "samples": 10**6, "seed": 0, "out": None},
    "stats": {**_SURROGATE_KEYS, "bits": 3, "l": -1.0, "u": 1.0, "samples": 10**6, "seed": 0, "out": None},
    "train": {**_SURROGATE_KEYS, "bits": 3, "steps": 500, "lr": 0.05, "seed": 0, "batch_size": 32,
              "dataset": "linear_synth", "log_every": 1, "out": None},
    "bench": {"n": 10**6, "repeats": 20, "seed": 0, "amplitude": DEFAULT_AMPLITUDE, "order": DEFAULT_ORDER,
              "alpha": 0.2, "out": None},
}


def read_config(path: str) -> dict[str, object]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEY_TYPES:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = KEY_TYPES[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def resolve(command: str, args: argparse.Namespace) -> dict[str, object]:
    cfg = dict(DEFAULTS[command])
    if args.config:
        for k, v in read_config(args.config).items():
            if k in cfg:
                cfg[k] = v
    for k in cfg:
        if hasattr(args, k):
            cfg[k] = getattr(args, k)
    return cfg


def header(command: str, cfg: dict) -> list[str]:
    lines = [f"# command = {command}"]
    lines += [f"# {k} = {'none' if v is None else v}" for k, v in cfg.items() if k != "out"]
    return lines


@contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
        return
    try:
        fh = open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from exc
    with fh:
        yield fh


def _emit(command: str, cfg: dict, csv_header: str, rows: list[str]) -> None:
    with _output(cfg.get("out")) as fh:
        fh.write("\n".join(header(command, cfg) + [csv_header] + rows) + "\n")


def _spec(cfg: dict):
    return parse_spec(cfg["surrogate"], amplitude=cfg["amplitude"], order=cfg["order"], alpha=cfg["alpha"])


def cmd_quantize(cfg: dict) -> int:
    if cfg["input"] is not None:
        try:
            with open(cfg["input"], encoding="utf-8") as fh:
                tokens = fh.read().split()
        except OSError as exc:
            raise UsageError(f"cannot read input {cfg['input']}: {exc.strerror}") from exc
        try:
            values = [float(t) for t in tokens]
        except ValueError as exc:
            raise UsageError(f"non-numeric input: {exc}") from exc
    else:
        count = cfg["random"] if cfg["random"] is not None else 16
        values = list(Rng(cfg["seed"]).generator().standard_normal(count) * 4.0)
        tokens = [repr(float(v)) for v in values]
    if not values:
        raise UsageError("no input values")
    if cfg["bits"] is None:
        raise UsageError("quantize needs an integer --bits")
    template = QuantConfig(bits=cfg["bits"])
    if str(cfg["scale"]).lower() == "auto":
        qc = template.with_scale(compute_scale(Tensor(values), template))
    else:
        qc = template.with_scale(float(cfg["scale"]))
    rows = []
    for tok, v in zip(tokens, values):
        level = quantize(v, qc)
        rows.append(f"{tok},{level},{dequantize(level, qc)!r}")
    _emit("quantize", cfg, "x,x_q_int,x_dequant", rows)
    print(f"quantized {len(rows)} values at {cfg['bits']} bits, scale {qc.scale!r}", file=sys.stderr)
    return EXIT_OK


def cmd_surrogate_eval(cfg: dict) -> int:
    spec = _spec(cfg)
    x = np.linspace(cfg["lo"], cfg["hi"], cfg["points"])
    xq = np.rint(x)
    if isinstance(spec, STE):
        g = np.ones_like(x)
    elif isinstance(spec, RDFS):
        g = np.asarray(g_rdfs(x, xq, spec.amplitude, spec.order))
    else:
        g = np.asarray(g_dsq(x, spec.alpha, DsqLayout(cfg["lo"], cfg["hi"], cfg["bits"])))
    rows = [f"{a!r},{b!r},{c!r}" for a, b, c in zip(x.tolist(), xq.tolist(), np.atleast_1d(g).tolist())]
    _emit("surrogate-eval", cfg, "x,x_q,g", rows)
    return EXIT_OK


def cmd_fourier(cfg: dict) -> int:
    n = cfg["degree"]
    coeffs = fourier.fourier_coefficients(fourier.zigzag, n)
    rows = []
    for k in range(1, n + 1):
        err = fourier.l2_error(fourier.zigzag, coeffs.truncated(k))
        rows.append(f"{k},{coeffs.a[k - 1]!r},{coeffs.b[k - 1]!r},{fourier.zigzag_sine_coefficient(k)!r},{err!r}")
    _emit("fourier", cfg, "k,a_k,b_k,b_k_closed,l2_error_partial_sum", rows)
    return EXIT_OK


def cmd_verify(cfg: dict) -> int:
    if cfg["theorem"] not in ("fourier", "stats"):
        raise UsageError(f"--theorem must be fourier or stats, got {cfg['theorem']!r}")
    checks = verify_mod.run(cfg["theorem"], samples=cfg["samples"], seed=cfg["seed"])
    _emit("verify", cfg, verify_mod.CSV_HEADER, [c.csv_row() for c in checks])
    failed = [c.name for c in checks if not c.ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""), file=sys.stderr)
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def cmd_stats(cfg: dict) -> int:
    spec = _spec(cfg)
    report = stats.monte_carlo_stats(spec, cfg["l"], cfg["u"], cfg["samples"], cfg["seed"], bits=cfg["bits"])
    _emit("stats", cfg, stats.StatsReport.CSV_HEADER, [report.csv_row()])
    print(f"{spec.label}: closed mean {report.expectation_closed:.6f}, MC mean "
          f"{report.expectation_mc:.6f} +- {report.mc_stderr_mean:.1e}", file=sys.stderr)
    return EXIT_OK


def cmd_train(cfg: dict) -> int:
    tc = train_mod.TrainConfig(
        bits=cfg["bits"], surrogate=_spec(cfg), steps=cfg["steps"], batch_size=cfg["batch_size"],
        lr=cfg["lr"], seed=cfg["seed"], dataset=cfg["dataset"], log_every=cfg["log_every"],
    )
    model, rows = train_mod.train_model(tc)
    _emit("train", cfg, train_mod.TrainLogRow.CSV_HEADER, [r.csv_row() for r in rows])
    failures = sum(r.failed for r in rows)
    final = train_mod.evaluate(model, tc) if not failures else math.nan
    print(f"trained {len(rows)} logged steps; final full-data loss {final:.6g}; failures {failures}",
          file=sys.stderr)
    return EXIT_OK


def cmd_bench(cfg: dict) -> int:
    specs = [STE(), RDFS(cfg["amplitude"], cfg["order"]), DSQ(cfg["alpha"])]
    results = [bench_mod.bench_surrogate(s, cfg["n"], cfg["repeats"], cfg["seed"]) for s in specs]
    _emit("bench", cfg, bench_mod.CSV_HEADER, [r.csv_row() for r in results])
    for r in results:
        print(f"{r.label}: median {r.median_ns / 1e6:.3f} ms, workspace {r.workspace_bytes} B", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "quantize": cmd_quantize,
    "surrogate-eval": cmd_surrogate_eval,
    "fourier": cmd_fourier,
    "verify": cmd_verify,
    "stats": cmd_stats,
    "train": cmd_train,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qatlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="flat key = value file")
        for key in DEFAULTS[name]:
            flag = "--" + key.replace("_", "-")
            kw = {"default": argparse.SUPPRESS, "type": KEY_TYPES[key]}
            if key == "surrogate":
                kw["choices"] = ["ste", "rdfs", "dsq"]
            if key == "theorem":
                kw["choices"] = ["fourier", "stats"]
            if key == "dataset":
                kw["choices"] = list(train_mod.DATASETS)
            sp.add_argument(flag, dest=key, **kw)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args.command, args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"qatlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError) as exc:
        print(f"qatlab {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
