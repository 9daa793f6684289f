"""Quantization-aware training lab: fake quantization and surrogate gradients.

Compares the straight-through estimator, a rotated damped Fourier surrogate
and a tanh soft-quantizer gradient, with closed-form statistics, Fourier
checks, a toy training loop and a latency benchmark.
"""
from .quantizer import QuantConfig, dequantize, fake_quant, max_abs_config, quantize
from .surrogates import DSQ, RDFS, STE, DsqLayout, g_dsq, g_rdfs, g_rdfs_first_order, g_ste, surrogate_backward
from .tensor import Rng, Tensor

__all__ = [
    "QuantConfig", "dequantize", "fake_quant", "max_abs_config", "quantize",
    "DSQ", "RDFS", "STE", "DsqLayout", "g_dsq", "g_rdfs", "g_rdfs_first_order", "g_ste",
    "surrogate_backward", "Rng", "Tensor",
]
__version__ = "0.1.0"
