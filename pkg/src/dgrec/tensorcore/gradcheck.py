"""Finite-difference verification of recorded gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..rng import CounterRNG
from .tensor import Tape, Tensor, backward, no_tape


@dataclass
class ParamReport:
    name: str
    checked: int
    skipped_kinks: int
    max_rel_error: float
    worst_index: tuple = ()


@dataclass
class GradCheckReport:
    tolerance: float
    params: list[ParamReport] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((p.max_rel_error for p in self.params), default=0.0)

    @property
    def ok(self) -> bool:
        return all(p.max_rel_error < self.tolerance for p in self.params)

    def lines(self) -> list[str]:
        out = []
        for p in self.params:
            flag = "ok" if p.max_rel_error < self.tolerance else "FAIL"
            out.append(f"{p.name:<12} checked={p.checked:<4d} kinks={p.skipped_kinks:<3d} "
                       f"max_rel_err={p.max_rel_error:.3e} {flag}")
        return out


def relative_error(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def gradient_check(builder: Callable[[], Tensor], params: list[Tensor], eps: float = 1e-5,
                   tolerance: float = 1e-4, max_coords: int = 64, seed: int = 0,
                   floor: float = 1e-6) -> GradCheckReport:
    """Compare backward() against central differences ``(f(x+e) - f(x-e)) / 2e``.

    ``builder`` must rebuild the scalar loss from the current parameter
    values on every call. Tensors with more than ``max_coords`` entries are
    checked on a seeded random subset of ``max_coords`` coordinates.

    Coordinates where the loss has a kink inside ``[x - e, x + e]`` (a ReLU
    input crossing zero) are not differentiable there; they are detected by
    disagreeing one-sided slopes and reported as skipped.
    """
    with Tape() as tape:
        loss = builder()
    analytic = [g.copy() for g in backward(tape, loss, params)]

    def f() -> float:
        with no_tape():
            return float(builder().data)

    f0 = f()
    report = GradCheckReport(tolerance)
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.size
        if n <= max_coords:
            coords = list(range(n))
        else:
            coords = sorted(CounterRNG(seed, "gradcheck", p.name or "").sample_without_replacement(
                list(range(n)), max_coords))
        worst, worst_at, kinks = 0.0, (), 0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            fp = f()
            flat[c] = orig - eps
            fm = f()
            flat[c] = orig
            numeric = (fp - fm) / (2 * eps)
            a = float(grad.reshape(-1)[c])
            err = relative_error(a, numeric, floor)
            if err >= tolerance:
                right, left = (fp - f0) / eps, (f0 - fm) / eps
                if abs(right - left) > 1e-3 * max(1.0, abs(right), abs(left)):
                    kinks += 1
                    continue
            if err > worst:
                worst, worst_at = err, np.unravel_index(c, p.shape)
        report.params.append(ParamReport(p.name or "?", len(coords) - kinks, kinks, worst,
                                         tuple(int(i) for i in worst_at)))
    return report
