"""System information gathering for run manifests.

This module collects the platform, memory and library versions that every
run records next to its results, so a CSV can be traced back to the
machine and stack that produced it.
"""
from __future__ import annotations

import os
import platform
import socket
from importlib import metadata
from typing import Any, Dict

import psutil

TRACKED_PACKAGES = ("numpy", "scipy", "POT", "pandas", "matplotlib", "sympy", "psutil", "flask")


def package_versions() -> Dict[str, str]:
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def get_system_info() -> Dict[str, Any]:
    """Gather platform, memory and package information.

    Returns:
        A JSON-serialisable dictionary.
    """
    memory = psutil.virtual_memory()
    return {
        "os": f"{platform.system()} {platform.release()}",
        "architecture": platform.machine(),
        "processor": platform.processor(),
        "hostname": socket.gethostname(),
        "python_version": platform.python_version(),
        "cpu_count": psutil.cpu_count(logical=True),
        "current_directory": os.getcwd(),
        "memory": {
            "total": memory.total,
            "available": memory.available,
            "percent": memory.percent,
        },
        "packages": package_versions(),
    }


def format_system_info(info: Dict[str, Any]) -> str:
    """Render the dictionary from :func:`get_system_info` for the terminal."""
    memory = info.get("memory", {})
    lines = [
        "SYSTEM INFORMATION:",
        f"- OS: {info.get('os', 'unknown')}",
        f"- Architecture: {info.get('architecture', 'unknown')}",
        f"- Python Version: {info.get('python_version', 'unknown')}",
        f"- CPUs: {info.get('cpu_count', 'unknown')}",
        "",
        "MEMORY:",
        f"- Total: {format_bytes(memory.get('total', 0))}",
        f"- Available: {format_bytes(memory.get('available', 0))} ({memory.get('percent', 0)}% used)",
        "",
        "PACKAGES:",
    ]
    for name, version in info.get("packages", {}).items():
        lines.append(f"- {name}: {version}")
    return "\n".join(lines)


def format_bytes(bytes_value):
    """Format bytes to a human-readable string."""
    for unit in ['B', 'KB', 'MB', 'GB', 'TB']:
        if bytes_value < 1024:
            return f"{bytes_value:.2f} {unit}"
        bytes_value /= 1024
    return f"{bytes_value:.2f} PB"
