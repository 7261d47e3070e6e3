"""
Calibrate-then-assert protocol for inequalities with unquantified constants.

A constant is fitted on bank A (max ratio times a safety factor, or the
minimum over a safety factor for lower bounds) and the inequality is then
asserted on an independently generated bank B.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
from pydantic import BaseModel

import config
from hypotheses import describe

logger = logging.getLogger("rich")


class EstimateReport(BaseModel):
    lemma: str
    indices: Dict[str, float]
    n_trials: int
    max_ratio: float
    calibration_constant: float
    calibration_max_ratio: float
    drift: float
    kind: str = "upper"
    passed: bool
    statement: str = ""


def map_bank(fn: Callable, bank: Iterable, threads: Optional[int] = None) -> List:
    """Evaluate ``fn`` on each bank element; results come back in bank order."""
    bank = list(bank)
    workers = max(1, min(threads or config.THREADS, len(bank) or 1))
    if workers == 1:
        return [fn(item) for item in bank]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(fn, item) for item in bank]
        return [future.result() for future in futures]


def _flatten(values) -> np.ndarray:
    if not values:
        return np.zeros(0)
    return np.concatenate([np.atleast_1d(np.asarray(v, dtype=float)).ravel() for v in values])


def relative_drift(a: float, b: float) -> float:
    if a == b:
        return 0.0
    if a == 0 or not math.isfinite(a) or not math.isfinite(b):
        return math.inf
    return abs(a - b) / abs(a)


def calibrate_and_assert(lemma: str, indices: Dict[str, float], ratio_fn: Callable,
                         bank_a: Iterable, bank_b: Iterable, *, preset: Optional[float] = None,
                         safety: Optional[float] = None, max_drift: Optional[float] = None,
                         kind: str = "upper", threads: Optional[int] = None) -> EstimateReport:
    """Fit the constant on ``bank_a`` and check the inequality on ``bank_b``.

    Args:
        ratio_fn: maps a bank element to one ratio or an array of ratios
            (lhs/rhs for upper bounds, measured rate for lower bounds).
        preset: constant from the config calibration table; overrides the fit.
        kind: "upper" (ratio <= C) or "lower" (rate >= c).

    Returns:
        EstimateReport with the bank-B statistic in ``max_ratio``.
    """
    safety = safety or config.CALIBRATION_DEFAULTS['safety']
    max_drift = config.CALIBRATION_DEFAULTS['max_drift'] if max_drift is None else max_drift
    ratios_a = _flatten(map_bank(ratio_fn, bank_a, threads))
    ratios_b = _flatten(map_bank(ratio_fn, bank_b, threads))
    if kind == "upper":
        stat_a = float(ratios_a.max(initial=0.0))
        stat_b = float(ratios_b.max(initial=0.0))
        constant = preset if preset is not None else safety * stat_a
        holds = stat_b <= constant * (1 + 1e-12)
    elif kind == "lower":
        stat_a = float(ratios_a.min(initial=math.inf))
        stat_b = float(ratios_b.min(initial=math.inf))
        constant = preset if preset is not None else stat_a / safety
        holds = stat_b >= constant * (1 - 1e-12)
    else:
        raise ValueError(f"unknown calibration kind {kind!r}")
    drift = relative_drift(stat_a, stat_b)
    report = EstimateReport(lemma=lemma, indices=indices, n_trials=int(ratios_b.size),
                            max_ratio=stat_b, calibration_constant=float(constant),
                            calibration_max_ratio=stat_a, drift=drift, kind=kind, statement=describe(lemma),
                            passed=bool(holds and drift <= max_drift))
    log = logger.info if report.passed else logger.warning
    log(f"{lemma}: bank A {stat_a:.4g}, bank B {stat_b:.4g}, C_cal {constant:.4g}, drift {drift:.1%}")
    return report
