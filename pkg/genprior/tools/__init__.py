"""Lab tool implementations and JSON schemas."""
from __future__ import annotations

from typing import Any, Callable, Dict, List

# Import all tools and their schemas
from .analysis import DIAGNOSTICS_PARAMS_SCHEMA, SLOPE_PARAMS_SCHEMA, chain_diagnostics, slope
from .benchmark import SAMPLE_PARAMS_SCHEMA, TRIM_PARAMS_SCHEMA, sample, trim_bounds
from .darcy_forward import DARCY_PARAMS_SCHEMA, darcy_forward
from .posterior import STABILITY_PARAMS_SCHEMA, posterior_stability
from .pretty_print import (
    pretty_print_darcy_results,
    pretty_print_diagnostics_results,
    pretty_print_sample_results,
    pretty_print_sinkhorn_results,
    pretty_print_slope_results,
    pretty_print_stability_results,
    pretty_print_trim_results,
    pretty_print_wasserstein_results,
)
from .wasserstein import SINKHORN_PARAMS_SCHEMA, WASSERSTEIN_PARAMS_SCHEMA, sinkhorn, wasserstein


def _tool(name: str, description: str, parameters: Dict[str, Any]) -> Dict[str, Any]:
    return {"type": "function", "function": {"name": name, "description": description, "parameters": parameters}}


# Tool registry served by the lab API
TOOLS: List[Dict[str, Any]] = [
    _tool("sample_benchmark", "Draw points from a named 2D benchmark distribution.", SAMPLE_PARAMS_SCHEMA),
    _tool("wasserstein", "Exact Wasserstein-1 or Wasserstein-2 distance between two point clouds.",
          WASSERSTEIN_PARAMS_SCHEMA),
    _tool("sinkhorn_divergence", "Debiased entropic Sinkhorn divergence between two point clouds.",
          SINKHORN_PARAMS_SCHEMA),
    _tool("posterior_stability", "Prior W2, posterior W1 and stability constant for a benchmark prior.",
          STABILITY_PARAMS_SCHEMA),
    _tool("trim_bounds", "Distance between a benchmark sample and its trimmed version against the tail bound.",
          TRIM_PARAMS_SCHEMA),
    _tool("darcy_forward", "Solve the Darcy problem and return pressures at observation points.",
          DARCY_PARAMS_SCHEMA),
    _tool("fit_slope", "Least-squares slope of log(y) against log(x).", SLOPE_PARAMS_SCHEMA),
    _tool("chain_diagnostics", "Autocorrelation and effective sample size of a scalar chain.",
          DIAGNOSTICS_PARAMS_SCHEMA),
]

TOOL_IMPLS: Dict[str, Callable[..., Dict[str, Any]]] = {
    "sample_benchmark": sample,
    "wasserstein": wasserstein,
    "sinkhorn_divergence": sinkhorn,
    "posterior_stability": posterior_stability,
    "trim_bounds": trim_bounds,
    "darcy_forward": darcy_forward,
    "fit_slope": slope,
    "chain_diagnostics": chain_diagnostics,
}

PRETTY_PRINTERS: Dict[str, Callable[[Dict[str, Any]], str]] = {
    "sample_benchmark": pretty_print_sample_results,
    "wasserstein": pretty_print_wasserstein_results,
    "sinkhorn_divergence": pretty_print_sinkhorn_results,
    "posterior_stability": pretty_print_stability_results,
    "trim_bounds": pretty_print_trim_results,
    "darcy_forward": pretty_print_darcy_results,
    "fit_slope": pretty_print_slope_results,
    "chain_diagnostics": pretty_print_diagnostics_results,
}

__all__ = [
    "TOOLS",
    "TOOL_IMPLS",
    "PRETTY_PRINTERS",
    "sample",
    "wasserstein",
    "sinkhorn",
    "posterior_stability",
    "trim_bounds",
    "darcy_forward",
    "slope",
    "chain_diagnostics",
]
