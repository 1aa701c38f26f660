"""Report type shared by every ratio/bound check.

A "bound check" materializes an inequality of the form ``lhs <= C * rhs``
as the statistics of the sampled ratio ``lhs/rhs``: the fitted constant is
the sample maximum, and the check is trusted only if that constant is
stable between two independent sample sets.  A diverging sweep is reported
as an infinite ``max_ratio`` so the pass flag stays equivalent to
"finite and stable".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class BoundCheckReport:
    check_name: str
    params: dict = field(default_factory=dict)
    n_samples: int = 0
    max_ratio: float = float("nan")
    q99_ratio: float = float("nan")
    fitted_constant: float = float("nan")
    stability_factor: float = float("nan")
    passed: bool = False
    fitted_constants: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        consts = {"C": self.fitted_constant}
        consts.update(self.fitted_constants)
        return {
            "check_name": self.check_name,
            "params": self.params,
            "n_samples": self.n_samples,
            "max_ratio": self.max_ratio,
            "q99_ratio": self.q99_ratio,
            "fitted_constants": consts,
            "stability_factor": self.stability_factor,
            "pass": self.passed,
        }


def ratio_report(
    check_name: str,
    ratio_sets: list[np.ndarray],
    params: dict | None = None,
    stability_bound: float = 2.0,
    extra_constants: dict | None = None,
    violations: list | None = None,
) -> BoundCheckReport:
    """Build a report from per-sample-set ratio arrays.

    The fitted constant comes from the pooled samples; stability is the
    spread of the per-set maxima.  Empty pools (e.g. zero vorticity) pass
    with a zero constant.
    """
    pools = [np.asarray(r, dtype=float) for r in ratio_sets]
    pooled = np.concatenate(pools) if pools else np.array([])
    n = int(pooled.size)
    if n == 0 or np.all(pooled == 0.0):
        return BoundCheckReport(
            check_name=check_name,
            params=params or {},
            n_samples=n,
            max_ratio=0.0,
            q99_ratio=0.0,
            fitted_constant=0.0,
            stability_factor=1.0,
            passed=not violations,
            fitted_constants=extra_constants or {},
            violations=violations or [],
        )
    maxima = [float(np.max(s)) if s.size else 0.0 for s in pools]
    max_ratio = float(np.max(pooled))
    positive = [m for m in maxima if m > 0]
    stability = float(max(positive) / min(positive)) if len(positive) >= 2 else 1.0
    passed = bool(
        np.isfinite(max_ratio) and stability <= stability_bound and not (violations or [])
    )
    return BoundCheckReport(
        check_name=check_name,
        params=params or {},
        n_samples=n,
        max_ratio=max_ratio,
        q99_ratio=float(np.quantile(pooled, 0.99)),
        fitted_constant=max_ratio,
        stability_factor=stability,
        passed=passed,
        fitted_constants=extra_constants or {},
        violations=violations or [],
    )
