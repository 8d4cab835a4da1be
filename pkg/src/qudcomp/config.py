"""Central tolerance record.

All numerical thresholds live in :class:`Tolerances`. Operations take an
optional ``tol`` argument and fall back to :func:`get_tolerances`, which reads
overrides from the ``QUDCOMP_TOL`` environment variable. The variable holds
either a JSON object (``{"csd_tol": 1e-8}``) or comma separated
``key=value`` pairs (``csd_tol=1e-8,norm_tol=1e-9``).
"""

from __future__ import annotations

import dataclasses
import json
import os

ENV_VAR = "QUDCOMP_TOL"


@dataclasses.dataclass(frozen=True)
class Tolerances:
    unitarity_tol: float = 1e-10
    exp_log_tol: float = 1e-9
    branch_tol: float = 1e-8
    structure_tol: float = 1e-12
    csd_tol: float = 1e-9
    lower_tol: float = 1e-8
    dedup_tol: float = 1e-8
    clifford_tol: float = 1e-8
    norm_tol: float = 1e-10
    retarget_tol: float = 1e-8
    # SK refuses to decompose a residual farther than this from the identity.
    balance_threshold: float = 0.7

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)


def _parse_overrides(raw: str) -> dict[str, float]:
    raw = raw.strip()
    if not raw:
        return {}
    if raw.startswith("{"):
        data = json.loads(raw)
    else:
        data = {}
        for item in raw.split(","):
            key, _, value = item.partition("=")
            data[key.strip()] = value.strip()
    known = {f.name for f in dataclasses.fields(Tolerances)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown tolerance keys in {ENV_VAR}: {sorted(unknown)}")
    return {k: float(v) for k, v in data.items()}


def get_tolerances() -> Tolerances:
    """Return the default tolerances with any ``QUDCOMP_TOL`` overrides applied."""
    return Tolerances(**_parse_overrides(os.environ.get(ENV_VAR, "")))


def resolve(tol: Tolerances | None) -> Tolerances:
    return get_tolerances() if tol is None else tol
