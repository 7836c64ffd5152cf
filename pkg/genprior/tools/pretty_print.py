"""Pretty printing functions for tool results."""
from __future__ import annotations

from typing import Any, Dict


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def pretty_print_wasserstein_results(result: Dict[str, Any]) -> str:
    """Format an exact W_p result for display."""
    if result.get("status") == "error":
        return result.get("message", "Error computing the Wasserstein distance.")
    return (f"W{result['p']} distance between {result['n_a']} and {result['n_b']} points: "
            f"{_fmt(result['distance'])}\n"
            f"Marginal violation: {_fmt(result['marginal_violation'])}")


def pretty_print_sinkhorn_results(result: Dict[str, Any]) -> str:
    if result.get("status") == "error":
        return result.get("message", "Error computing the Sinkhorn divergence.")
    return (f"Sinkhorn divergence (epsilon={_fmt(result['epsilon'])}): {_fmt(result['divergence'])}\n"
            f"Gradient norm: {_fmt(result['gradient_norm'])}")


def pretty_print_sample_results(result: Dict[str, Any]) -> str:
    """Format a benchmark sample: a summary line plus the first few points."""
    if result.get("status") == "error":
        return result.get("message", "Error sampling the benchmark.")
    output = [f"{result['n']} samples from '{result['kind']}' "
              f"(second moment {_fmt(result['second_moment'])})"]
    for x, y in result["points"][:5]:
        output.append(f"  ({x:.4f}, {y:.4f})")
    if result["n"] > 5:
        output.append("  ...")
    return "\n".join(output)


def pretty_print_trim_results(result: Dict[str, Any]) -> str:
    if result.get("status") == "error":
        return result.get("message", "Error checking the trim bound.")
    verdict = "holds" if result["holds"] else "violated"
    return (f"Trim at r={_fmt(result['r'])} ({result['mode']}): "
            f"{_fmt(result['lhs'])} <= {_fmt(result['rhs'])} {verdict}")


def pretty_print_stability_results(result: Dict[str, Any]) -> str:
    """Format a posterior stability report."""
    if result.get("status") == "error":
        return result.get("message", "Error computing the stability report.")
    output = [f"Posterior stability for '{result['kind']}' (sigma={_fmt(result['sigma'])}):\n"]
    for key, label in (("prior_w2", "Prior W2"), ("posterior_w1", "Posterior W1"),
                       ("cstab", "Stability constant"), ("ratio", "W1 / W2 ratio"),
                       ("noise_floor", "Resampling noise floor")):
        output.append(f"{label}: {_fmt(result[key])}")
    output.append(f"Bound holds: {'yes' if result['bound_holds'] else 'no'}")
    return "\n".join(output)


def pretty_print_darcy_results(result: Dict[str, Any]) -> str:
    if result.get("status") == "error":
        return result.get("message", "Error evaluating the Darcy forward map.")
    return (f"Darcy pressure on a {result['m']}x{result['m']} grid at {len(result['values'])} points\n"
            f"Max pressure: {_fmt(result['max_value'])}")


def pretty_print_slope_results(result: Dict[str, Any]) -> str:
    if result.get("status") == "error":
        return result.get("message", "Error fitting the slope.")
    return (f"Slope: {_fmt(result['slope'])}\n"
            f"Intercept: {_fmt(result['intercept'])}\n"
            f"R^2: {_fmt(result['r_squared'])}")


def pretty_print_diagnostics_results(result: Dict[str, Any]) -> str:
    """Format chain diagnostics: ESS and the leading autocorrelations."""
    if result.get("status") == "error":
        return result.get("message", "Error computing chain diagnostics.")
    leading = ", ".join(f"{v:.3f}" for v in result["acf"][:6])
    return (f"Chain of length {result['n']}\n"
            f"ESS: {_fmt(result['ess'])}\n"
            f"ACF (lags 0-5): {leading}")
