"""
Finite-difference gradient oracle.

Compares the reverse-mode gradient of a scalar computation with central
differences ``(f(x + h e) - f(x - h e)) / 2h`` coordinate by coordinate. Run
it on tensors created under ``float64_mode``: 32-bit differences are too noisy
to resolve a 1e-4 relative tolerance.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from tqdm import tqdm

from .errors import NumericalError, ParameterError, ShapeError
from .rng import Rng
from .tensor import Tensor, no_grad, zero_grad

logger = logging.getLogger(__name__)

DEFAULT_H = 1e-6
DEFAULT_TOL = 1e-4
DEFAULT_ATOL = 1e-8
REL_FLOOR = 1e-8


@dataclass
class GradCheckReport:
    """Outcome of one finite-difference comparison."""

    name: str
    max_rel_error: float = 0.0
    max_abs_error: float = 0.0
    worst_param: str = ""
    worst_index: Tuple[int, ...] = ()
    n_checked: int = 0
    failures: int = 0
    tol: float = DEFAULT_TOL
    atol: float = DEFAULT_ATOL
    per_param: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.name}: {status} max_rel={self.max_rel_error:.3e} "
                f"max_abs={self.max_abs_error:.3e} checked={self.n_checked} "
                f"worst={self.worst_param}{list(self.worst_index)}")


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), REL_FLOOR)


def _evaluate(f: Callable[[], Tensor], where: str) -> float:
    with no_grad():
        value = f()
    if value.size != 1:
        raise ShapeError("grad_check objective", value.shape, ())
    value = value.item()
    if not np.isfinite(value):
        raise NumericalError(f"non-finite objective value {value} at {where}")
    return value


def grad_check(f: Callable[[], Tensor],
               params: Mapping[str, Tensor],
               h: float = DEFAULT_H,
               tol: float = DEFAULT_TOL,
               atol: float = DEFAULT_ATOL,
               max_coords: Optional[int] = None,
               rng: Optional[Rng] = None,
               name: str = "grad_check",
               progress: bool = False) -> GradCheckReport:
    """Compare autodiff and central-difference gradients of ``f``.

    Args:
        f: Zero-argument callable rebuilding the scalar objective from ``params``
        params: Tensors to perturb, keyed by a readable name
        h: Finite-difference step
        tol: Relative tolerance per coordinate
        atol: Absolute difference below which a coordinate passes regardless of ``tol``
        max_coords: If set, check at most this many sampled coordinates per tensor
        rng: Source for coordinate sampling (defaults to seed 0)
        name: Label carried into the report
        progress: Show a progress bar

    Returns:
        GradCheckReport with the maximum relative error over checked coordinates

    Raises:
        ParameterError: If ``h`` is not positive
        NumericalError: If the objective or a difference is not finite; the
            message names the coordinate
    """
    if h <= 0:
        raise ParameterError(f"finite-difference step must be positive, got {h}")
    rng = rng or Rng(0)
    report = GradCheckReport(name=name, tol=tol, atol=atol)

    zero_grad(params.values())
    objective = f()
    if objective.size != 1:
        raise ShapeError("grad_check objective", objective.shape, ())
    if not np.isfinite(objective.item()):
        raise NumericalError(f"{name}: non-finite objective at the base point")
    objective.backward()
    analytic = {key: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for key, p in params.items()}

    for key, p in tqdm(params.items(), desc=name, disable=not progress, leave=False):
        if max_coords is not None and p.size > max_coords:
            coords = np.sort(rng.permutation(p.size)[:max_coords])
        else:
            coords = np.arange(p.size)
        worst_here = 0.0
        for flat in coords:
            index = np.unravel_index(int(flat), p.shape)
            where = f"{key}{list(int(i) for i in index)}"
            original = p.data[index].copy()
            p.data[index] = original + h
            plus = _evaluate(f, where)
            p.data[index] = original - h
            minus = _evaluate(f, where)
            p.data[index] = original
            numeric = (plus - minus) / (2.0 * h)
            exact = float(analytic[key][index])
            if not np.isfinite(exact):
                raise NumericalError(f"{name}: non-finite analytic gradient at {where}")
            rel = relative_error(exact, numeric)
            diff = abs(exact - numeric)
            report.n_checked += 1
            report.max_abs_error = max(report.max_abs_error, diff)
            # differences below atol are finite-difference noise
            if diff < atol:
                continue
            if rel >= tol:
                report.failures += 1
                logger.debug("%s: mismatch at %s analytic=%g numeric=%g", name, where, exact, numeric)
            if rel > report.max_rel_error:
                report.max_rel_error = rel
                report.worst_param = key
                report.worst_index = tuple(int(i) for i in index)
            worst_here = max(worst_here, rel)
        report.per_param[key] = worst_here

    zero_grad(params.values())
    return report
