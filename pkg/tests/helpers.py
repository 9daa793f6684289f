"""Oracles shared by the unit and acceptance tests."""
import numpy as np

from qatlab.train import MlpModel, mse_loss, qat_forward


def loss_at(model: MlpModel, x, y, bits=None) -> float:
    pred, _ = qat_forward(model, x, bits)
    return mse_loss(pred, y)[0]


def central_difference_grad(model: MlpModel, x, y, h: float = 1e-6) -> np.ndarray:
    """Full-precision loss gradient by central differences, flattened like model.flat()."""
    v = model.flat()
    g = np.empty_like(v)
    for i in range(v.size):
        vp, vm = v.copy(), v.copy()
        vp[i] += h
        vm[i] -= h
        g[i] = (loss_at(model.with_flat(vp), x, y) - loss_at(model.with_flat(vm), x, y)) / (2 * h)
    return g


def flatten_grads(grads: dict) -> np.ndarray:
    return np.concatenate([grads[k].ravel() for k in ("w1", "b1", "w2", "b2")])


def relative_close(a, b, rtol: float = 1e-4, floor: float = 1e-10) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return bool(np.all(np.abs(a - b) <= rtol * np.maximum(np.abs(a), np.abs(b)) + floor))


# one "PASS/FAIL" line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report_gate(number: int, title: str, passed: bool, detail: str, elapsed: float, budget: float) -> bool:
    ok = passed and elapsed <= budget
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail} [{elapsed:.2f}s / {budget:g}s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
