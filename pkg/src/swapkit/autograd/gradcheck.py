"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np


class GradcheckFailure(AssertionError):
    pass


def gradcheck(build_loss, tensors, eps: float = 1e-6, rtol: float = 1e-5,
              atol: float = 1e-10, entries_per_tensor: int | None = None,
              seed: int = 0) -> float:
    """Compare analytic gradients against central differences.

    build_loss re-runs the forward pass from scratch and returns a scalar
    Tensor; tensors are the leaves whose gradients are checked, in float64
    (float32 cannot resolve the differences at these tolerances). An entry
    passes when |analytic - numeric| <= max(rtol * max(|a|, |n|), atol).
    entries_per_tensor limits the check to a seeded random subset per
    tensor; by default every entry is visited. Returns the largest
    |a - n| / max(|a|, |n|, atol) seen.
    """
    for t in tensors:
        if t.data.dtype != np.float64:
            raise ValueError(
                f"gradcheck needs float64 leaves, got {t.data.dtype}"
                + (f" for {t.name!r}" if t.name else ""))
        t.grad = None

    loss = build_loss()
    if loss.data.shape != ():
        raise ValueError(f"gradcheck loss must be scalar, got shape {loss.data.shape}")
    loss.backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                for t in tensors]

    rng = np.random.default_rng(seed)
    failures = []
    worst = 0.0

    for t, a_grad in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        a_flat = a_grad.reshape(-1)
        if entries_per_tensor is None or entries_per_tensor >= flat.size:
            indices = range(flat.size)
        else:
            indices = rng.choice(flat.size, size=entries_per_tensor, replace=False)
        for i in indices:
            orig = flat[i]
            flat[i] = orig + eps
            lp = build_loss().item()
            flat[i] = orig - eps
            lm = build_loss().item()
            flat[i] = orig
            num = (lp - lm) / (2.0 * eps)
            ana = float(a_flat[i])
            diff = abs(ana - num)
            scale = max(abs(ana), abs(num))
            worst = max(worst, diff / max(scale, atol))
            if diff > max(rtol * scale, atol):
                failures.append((t.name or "tensor", int(i), ana, num))

    if failures:
        lines = [f"  {name}[{i}]: analytic {a:.10g} vs numeric {n:.10g}"
                 for name, i, a, n in failures[:12]]
        more = "" if len(failures) <= 12 else f"\n  ... and {len(failures) - 12} more"
        raise GradcheckFailure(
            f"{len(failures)} gradient entries out of tolerance:\n" + "\n".join(lines) + more)
    return worst
