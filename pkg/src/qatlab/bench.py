"""Latency of the elementwise surrogate backward pass.

Single-threaded, optionally pinned to one core. Workspace is the number of
scratch bytes the kernel allocates, derived from the shape alone.
"""
from __future__ import annotations

import os
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import torch

from . import _kernels
from .quantizer import max_abs_config
from .surrogates import SurrogateSpec, surrogate_backward
from .tensor import Rng, Tensor

WARMUP = 3
MIN_ELEMS = 10**4
MIN_REPEATS = 5
CSV_HEADER = "label,n_elems,repeats,median_ns,p10_ns,p90_ns,workspace_bytes,host_descriptor"


@dataclass(frozen=True)
class BenchResult:
    label: str
    n_elems: int
    repeats: int
    median_ns: float
    p10_ns: float
    p90_ns: float
    workspace_bytes: int
    host_descriptor: str
    pinned: bool
    samples_ns: tuple[int, ...] = ()

    def csv_row(self) -> str:
        return (
            f"{self.label},{self.n_elems},{self.repeats},{self.median_ns:.0f},"
            f"{self.p10_ns:.0f},{self.p90_ns:.0f},{self.workspace_bytes},{self.host_descriptor}"
        )


def host_descriptor(pinned: bool) -> str:
    # commas would break the CSV column
    cpu = platform.processor() or platform.machine()
    desc = f"{platform.system()} {platform.machine()} {cpu} torch-{torch.__version__} pinned={int(pinned)}"
    return desc.replace(",", " ")


@contextmanager
def single_core():
    """Pin to one CPU and one torch thread; yields whether pinning succeeded."""
    threads = torch.get_num_threads()
    affinity = None
    pinned = False
    if hasattr(os, "sched_getaffinity"):
        try:
            affinity = os.sched_getaffinity(0)
            os.sched_setaffinity(0, {min(affinity)})
            pinned = True
        except OSError:
            pinned = False
    torch.set_num_threads(1)
    try:
        yield pinned
    finally:
        torch.set_num_threads(threads)
        if pinned:
            os.sched_setaffinity(0, affinity)


def bench_surrogate(spec: SurrogateSpec, n_elems: int = 10**6, repeats: int = 20, seed: int = 0) -> BenchResult:
    if n_elems < MIN_ELEMS:
        raise ValueError(f"n_elems must be >= {MIN_ELEMS}")
    if repeats < MIN_REPEATS:
        raise ValueError(f"repeats must be >= {MIN_REPEATS}")
    gen = Rng(seed).generator()
    x = Tensor._wrap(gen.standard_normal(n_elems))
    up = Tensor._wrap(gen.standard_normal(n_elems))
    cfg = max_abs_config(x, 3)
    samples = []
    with single_core() as pinned:
        for _ in range(WARMUP):
            surrogate_backward(up, x, cfg, spec)
        for _ in range(repeats):
            t0 = time.perf_counter_ns()
            surrogate_backward(up, x, cfg, spec)
            samples.append(time.perf_counter_ns() - t0)
    p10, med, p90 = np.percentile(samples, [10, 50, 90])
    return BenchResult(
        label=spec.label,
        n_elems=n_elems,
        repeats=repeats,
        median_ns=float(med),
        p10_ns=float(p10),
        p90_ns=float(p90),
        workspace_bytes=_kernels.workspace_bytes(spec, n_elems),
        host_descriptor=host_descriptor(pinned),
        pinned=pinned,
        samples_ns=tuple(samples),
    )
