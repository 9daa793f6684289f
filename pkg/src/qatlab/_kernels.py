"""Elementwise backward kernels on torch CPU tensors.

Each kernel works in place on one or more float64 scratch buffers sized like
the input, so the benchmark measures arithmetic rather than allocation
patterns. numpy arrays are shared with torch without copying.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
import torch

from .errors import SingularDenominatorError
from .fourier import SINGULAR_TOL

ELEM_BYTES = 8


def _view(a: np.ndarray) -> torch.Tensor:
    # Inputs are read-only Tensor views; torch warns but never writes to them.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return torch.from_numpy(np.ascontiguousarray(a, dtype=np.float64))


def workspace_bytes(spec, n: int) -> int:
    """Scratch memory of the kernel for ``n`` elements, output buffer included."""
    label = spec.label
    if label == "ste":
        return ELEM_BYTES * n
    if label == "rdfs":
        return (2 if spec.order == 0 else 4) * ELEM_BYTES * n
    return 2 * ELEM_BYTES * n


def _mask_into(out: torch.Tensor, xs: torch.Tensor, cfg) -> None:
    # out <- (|x/s - mid| <= half) as 0/1, with xs already holding x/s
    lo, hi = cfg.normalized_range
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    torch.sub(xs, mid, out=out)
    out.abs_()
    torch.le(out, half, out=out)


def ste(up: torch.Tensor, x: torch.Tensor, cfg) -> torch.Tensor:
    out = torch.empty_like(x)
    torch.div(x, cfg.scale, out=out)
    _mask_into(out, out, cfg)
    return out.mul_(up)


def rdfs(up: torch.Tensor, x: torch.Tensor, cfg, spec) -> torch.Tensor:
    c = spec.c
    out = torch.empty_like(x)
    s = torch.empty_like(x)
    torch.div(x, cfg.scale, out=out)
    if spec.order == 0:
        torch.round(out, out=s)
        s.add_(out).mul_(math.pi).cos_().mul_(c)
    else:
        phase = torch.empty_like(x)
        term = torch.empty_like(x)
        torch.round(out, out=phase)
        phase.add_(out).mul_(math.pi)
        torch.cos(phase, out=s)
        for m in range(1, spec.order + 1):
            k = 2 * m + 1
            torch.mul(phase, k, out=term)
            term.cos_()
            s.add_(term, alpha=(-1.0) ** m / k)
        s.mul_(c)
    _mask_into(out, out, cfg)
    out.mul_(up)
    # out * (1 - S) / (1 + S)
    out.addcmul_(out, s, value=-1.0)
    s.add_(1.0)
    # With x_q = round(x/s) the phase sits where every partial sum of the
    # series is non-negative, so 1 + S >= 1 unless c may exceed 1.
    if spec.ill_conditioned and torch.any(s.abs() < SINGULAR_TOL):
        raise SingularDenominatorError(f"|1 + S| < {SINGULAR_TOL}")
    return out.div_(s)


def dsq(up: torch.Tensor, x: torch.Tensor, cfg, spec, layout) -> torch.Tensor:
    alpha = spec.alpha
    beta = math.log((2.0 - alpha) / alpha)
    delta = layout.delta
    amp = beta / (2.0 * (1.0 - alpha))
    lo, hi = cfg.normalized_range
    a = max(cfg.scale * lo, layout.l)
    b = min(cfg.scale * hi, layout.u)
    out = torch.empty_like(x)
    e = torch.empty_like(x)
    # in-range mask on x directly: |x - mid| <= half
    torch.sub(x, 0.5 * (a + b), out=out)
    out.abs_()
    torch.le(out, 0.5 * (b - a), out=out)
    out.mul_(up)
    # z = beta * (frac((x - l) / delta) - 1/2). At x = u the fraction wraps to 0
    # instead of 1, which flips the sign of z; sech^2 is even so g is unchanged.
    # Negative fractions only occur below l, where the mask is already zero.
    torch.sub(x, layout.l, out=e)
    e.div_(delta).frac_().sub_(0.5).mul_(beta)
    # sech^2(z) = 4 exp(-2|z|) / (1 + exp(-2|z|))^2
    e.abs_().mul_(-2.0).exp_()
    out.mul_(e)
    e.add_(1.0).square_()
    return out.div_(e).mul_(4.0 * amp)


def backward(upstream: np.ndarray, x: np.ndarray, cfg, spec, layout=None) -> np.ndarray:
    up_t, x_t = _view(upstream), _view(x)
    label = spec.label
    if label == "ste":
        out = ste(up_t, x_t, cfg)
    elif label == "rdfs":
        out = rdfs(up_t, x_t, cfg, spec)
    elif label == "dsq":
        out = dsq(up_t, x_t, cfg, spec, layout)
    else:
        raise ValueError(f"unknown surrogate {label!r}")
    return out.numpy()
