"""Slope fitting and chain diagnostic tools."""
from __future__ import annotations

from typing import Any, Dict, List, Optional

from ..errors import LabError, describe
from ..experiments.sweeps import fit_slope
from ..mcmc import acf, ess


def slope(xs: List[float], ys: List[float]) -> Dict[str, Any]:
    """Log-log least-squares slope."""
    try:
        fit = fit_slope(xs, ys)
        return {"status": "success", "slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}
    except (LabError, ValueError, TypeError) as e:
        return {"status": "error", "message": describe(e)}


def chain_diagnostics(series: List[float], max_lag: Optional[int] = None) -> Dict[str, Any]:
    """Autocorrelation function and effective sample size of a scalar chain."""
    try:
        lag = min(50, len(series) - 1) if max_lag is None else int(max_lag)
        return {
            "status": "success",
            "n": len(series),
            "acf": acf(series, lag).tolist(),
            "ess": ess(series),
        }
    except (LabError, ValueError, TypeError) as e:
        return {"status": "error", "message": describe(e)}


SLOPE_PARAMS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "xs": {"type": "array", "items": {"type": "number"}, "description": "Positive x values."},
        "ys": {"type": "array", "items": {"type": "number"}, "description": "Positive y values."},
    },
    "required": ["xs", "ys"],
}

DIAGNOSTICS_PARAMS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "series": {"type": "array", "items": {"type": "number"}, "description": "Chain values."},
        "max_lag": {"type": "integer", "description": "Largest lag of the ACF.", "minimum": 1},
    },
    "required": ["series"],
}
