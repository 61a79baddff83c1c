"""Python bindings for hsclab."""

import json as _json

from ._core import (
    Grid,
    HsclabError,
    Metric,
    artifact_version,
    c1n_integral,
    capacity,
    conformal_metric,
    curvature,
    flat_metric,
    hsc_point_sup,
    kappa_field,
    potential_metric,
    product_metric,
    solve_path,
    stabilization_threshold,
    validate_scenario,
    _run_scenario,
)

__version__ = artifact_version()


def run_scenario(text, out_dir=None):
    """Run the full pipeline on scenario JSON text.

    Returns a dict with the parsed audit and path reports plus the capacity CSV
    and summary text. With `out_dir`, the four report files are written too.
    """
    r = _run_scenario(text, "" if out_dir is None else str(out_dir))
    return {
        "audit": _json.loads(r["audit"]),
        "path": _json.loads(r["path"]),
        "capacity_csv": r["capacity_csv"],
        "summary": r["summary"],
        "failed": r["failed"],
    }
