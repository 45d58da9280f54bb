"""Central finite-difference gradient verification.

The numerical side only ever runs forward passes.  Piecewise decisions
(leaky-ReLU signs, clamp saturation, L1 signs, attention argmax) are taken
at the unperturbed point and replayed for the perturbed evaluations, so a
step that would cross a kink measures the slope of the piece the analytic
gradient refers to.
"""

import numpy as np

from . import autodiff as ad


def numerical_gradients(loss_fn, tensors, step=1e-6, freeze_branches=True):
    """Central differences of ``loss_fn()`` w.r.t. every element of ``tensors``."""
    rec = ad.BranchRecorder() if freeze_branches else None
    if rec is not None:
        with rec:
            loss_fn()

    def evaluate():
        if rec is None:
            return loss_fn().item()
        with rec:
            rec.replay()
            return loss_fn().item()

    grads = {}
    for name, t in tensors.items():
        flat = t.data.reshape(-1)
        num = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = evaluate()
            flat[i] = orig - step
            minus = evaluate()
            flat[i] = orig
            num[i] = (plus - minus) / (2.0 * step)
        grads[name] = num.reshape(t.shape)
    return grads


def analytic_gradients(loss_fn, tensors):
    for t in tensors.values():
        t.zero_grad()
    loss_fn().backward()
    return {name: (np.zeros(t.shape) if t.grad is None else np.array(t.grad, dtype=np.float64))
            for name, t in tensors.items()}


def relative_error(analytic, numeric):
    """max |a - n| / max(max|a|, max|n|) for one tensor (0 when both vanish)."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / scale)


def check_gradients(loss_fn, tensors, step=1e-6, freeze_branches=True):
    """Per-tensor relative errors between backward and finite differences."""
    a = analytic_gradients(loss_fn, tensors)
    n = numerical_gradients(loss_fn, tensors, step, freeze_branches)
    return {name: relative_error(a[name], n[name]) for name in tensors}
