"""Classic RK4 with step-doubling error control.

Each step is taken once with ``h`` and twice with ``h/2``; the difference
(divided by 15) estimates the local error of the half-step solution.  The
accepted value is the Richardson-extrapolated combination, which is fifth
order accurate locally.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StepSizeUnderflow


@dataclass(frozen=True)
class IntegratorOptions:
    initial_step: float = 0.05
    min_step: float = 1e-12
    local_error: float = 1e-9
    max_steps: int = 1_000_000
    max_step: float = np.inf

    @classmethod
    def from_json(cls, obj: dict | None) -> "IntegratorOptions":
        obj = dict(obj or {})
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown integrator options: {sorted(unknown)}")
        return cls(**obj)

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if not np.isfinite(out["max_step"]):
            out.pop("max_step")
        return out


def _rk4_step(f, t, y, h, k1=None):
    if k1 is None:
        k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_grid,
    opts: IntegratorOptions | None = None,
) -> np.ndarray:
    """Integrate ``dy/dt = f(t, y)`` and return ``y`` at every point of ``t_grid``.

    ``t_grid`` must be strictly increasing; the first entry is the initial time.
    The output has shape ``(len(t_grid),) + y0.shape``.
    """
    opts = opts or IntegratorOptions()
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")

    y = np.array(y0, dtype=complex)
    out = np.empty((t_grid.size,) + y.shape, dtype=complex)
    out[0] = y
    h = min(opts.initial_step, opts.max_step)
    t = float(t_grid[0])
    steps = 0
    for i, t_next in enumerate(t_grid[1:], start=1):
        while t < t_next:
            if steps >= opts.max_steps:
                raise StepSizeUnderflow(f"max_steps={opts.max_steps} exhausted at t={t:.6g}")
            last = h >= t_next - t
            h_try = t_next - t if last else h
            k1 = f(t, y)
            full = _rk4_step(f, t, y, h_try, k1)
            mid = _rk4_step(f, t, y, 0.5 * h_try, k1)
            half = _rk4_step(f, t + 0.5 * h_try, mid, 0.5 * h_try)
            diff = half - full
            err = float(np.max(np.abs(diff))) / 15.0 if diff.size else 0.0
            steps += 1
            if err <= opts.local_error:
                y = half + diff / 15.0
                t = float(t_next) if last else t + h_try
                factor = 2.0 if err == 0 else min(2.0, 0.9 * (opts.local_error / err) ** 0.2)
                grown = min(h_try * factor, opts.max_step)
                # a step clipped to hit the grid must not shrink the controller's step
                h = grown if (not last or grown < h_try) else max(h, grown)
            else:
                h = h_try * max(0.2, 0.9 * (opts.local_error / err) ** 0.2)
                if h < opts.min_step:
                    raise StepSizeUnderflow(f"step {h:.3e} below min_step at t={t:.6g}")
        out[i] = y
    return out
