"""Closed-form gate and qubit counts for one Trotter step, plus a baseline.

All counts describe a single second-order step compiled for an
error-corrected machine: two basis-rotation layers of adjacent-mode Givens
rotations (forward and inverse), one mode-diagonal two-body layer of ZZ
rotations, and the single-qubit phase layers.  Counts are exact closed
forms in the orbital count n and THC rank m, not asymptotic estimates.

The comparison baseline is a double-factorized decomposition with first
rank ``l`` and a uniform second rank ``xi``: one basis rotation plus one
diagonal block per first-rank term, on 2n qubits.

Continuous rotations are converted to T gates with the standard
repeat-until-success synthesis cost of about ``1.15 log2(1/eps) + 9.2``
T gates per rotation at synthesis precision ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ARCHITECTURES = ("all-to-all", "linear")

# this-work scaling, assuming m grows linearly with n
STEP_SCALING = {
    "qubits": "O(N)",
    "circuit_depth": "O(N)",
    "single_qubit_rotations": "O(N^2)",
}
# double-factorization scaling with l = O(N) first-rank terms
MOTTA_SCALING = {
    "qubits": "O(N)",
    "circuit_depth": "O(N^2)",
    "single_qubit_rotations": "O(N^2 Xi)",
}


@dataclass(frozen=True)
class ResourceReport:
    """Gate and qubit tallies for one time step.

    ``givens_rotations`` counts two-mode Givens gates over the whole step
    (both basis-rotation layers), ``zz_rotations`` counts two-qubit ZZ
    phase gates, and ``single_qubit_rotations`` is the total number of
    continuous rotations to synthesize.  ``swap_gates`` is populated only
    for the linear architecture, ``t_gates`` only when a synthesis
    precision was given.
    """

    qubits: int
    givens_rotations: int
    zz_rotations: int
    circuit_depth: int
    single_qubit_rotations: int
    swap_gates: int | None = None
    t_gates: int | None = None
    architecture: str = "all-to-all"
    spinful: bool = True

    def __post_init__(self) -> None:
        for name in (
            "qubits",
            "givens_rotations",
            "zz_rotations",
            "circuit_depth",
            "single_qubit_rotations",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if (self.architecture == "linear") != (self.swap_gates is not None):
            raise ValueError("swap_gates is set exactly for the linear architecture")

    @property
    def component_rotations(self) -> int:
        """Rotation tally rebuilt from parts: 2 per Givens gate, 1 per ZZ.

        Reported alongside ``single_qubit_rotations`` so that any gap
        between the quoted closed form and the component count stays
        visible instead of being silently reconciled.
        """
        return 2 * self.givens_rotations + self.zz_rotations

    def to_json(self) -> dict:
        payload = {
            "qubits": self.qubits,
            "givens_rotations": self.givens_rotations,
            "zz_rotations": self.zz_rotations,
            "circuit_depth": self.circuit_depth,
            "single_qubit_rotations": self.single_qubit_rotations,
            "component_rotations": self.component_rotations,
            "architecture": self.architecture,
            "spinful": self.spinful,
        }
        if self.swap_gates is not None:
            payload["swap_gates"] = self.swap_gates
        if self.t_gates is not None:
            payload["t_gates"] = self.t_gates
        return payload


@dataclass(frozen=True)
class MottaParams:
    """Ranks of the double-factorized baseline: first rank l, second rank xi."""

    n: int
    l: int
    xi: int

    def __post_init__(self) -> None:
        if min(self.n, self.l, self.xi) < 1:
            raise ValueError("all ranks must be positive")
        if self.xi > self.n:
            raise ValueError("need xi <= n: the second rank cannot exceed the basis size")


def _pairs(k: int) -> int:
    return k * (k - 1) // 2


def t_count(rotations: int, eps_rot: float) -> int:
    """T gates needed to synthesize the given number of rotations.

    Each continuous rotation costs the nearest integer to
    ``1.15 log2(1/eps_rot) + 9.2`` T gates at synthesis precision
    ``eps_rot`` (about 32 at eps_rot = 1e-6).
    """
    if rotations < 0:
        raise ValueError("need rotations >= 0")
    if not 0.0 < eps_rot < 1.0:
        raise ValueError("need 0 < eps_rot < 1")
    per_rotation = round(1.15 * math.log2(1.0 / eps_rot) + 9.2)
    return rotations * per_rotation


def estimate_step(
    n: int,
    m: int,
    spinful: bool = True,
    architecture: str = "all-to-all",
    eps_rot: float | None = None,
) -> ResourceReport:
    """Count the resources of one Trotter step at orbital count n, THC rank m.

    A basis-rotation layer on an m-mode register whose first n columns are
    pinned needs C(m,2) - C(m-n,2) Givens rotations in depth m + n; the
    spinful circuit runs one copy per spin sector in parallel.  The
    diagonal layer applies one ZZ rotation per qubit pair.  The quoted
    spinful rotation total is the closed form 2m^2 + 8mn - 4n^2; the
    spinless total is assembled from the component counts.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if m < n:
        raise ValueError("need m >= n")
    if architecture not in ARCHITECTURES:
        raise ValueError(f"architecture must be one of {ARCHITECTURES}")

    givens_per_layer = _pairs(m) - _pairs(m - n)
    if spinful:
        givens_per_layer *= 2
    givens_total = 2 * givens_per_layer

    qubits = 2 * m if spinful else m
    zz = _pairs(qubits)

    # two rotation layers of depth m + n (parallel over spin sectors),
    # plus the diagonal layer: depth 2m spinful, m spinless
    rotation_depth = 2 * (m + n) if givens_per_layer > 0 else 0
    diagonal_depth = 2 * m if spinful else m
    depth = rotation_depth + diagonal_depth

    if spinful:
        rotations = 2 * m * m + 8 * m * n - 4 * n * n
    else:
        rotations = 2 * givens_total + zz

    swaps = zz if architecture == "linear" else None
    t_gates = t_count(rotations, eps_rot) if eps_rot is not None else None
    return ResourceReport(
        qubits=qubits,
        givens_rotations=givens_total,
        zz_rotations=zz,
        circuit_depth=depth,
        single_qubit_rotations=rotations,
        swap_gates=swaps,
        t_gates=t_gates,
        architecture=architecture,
        spinful=spinful,
    )


def motta_estimate(params: MottaParams, eps_rot: float | None = None) -> ResourceReport:
    """Count one double-factorized step: l blocks of rank xi on 2n qubits.

    Each block needs a basis rotation of 2 C(n,2) - 2 C(n-xi,2) Givens
    gates followed by C(2 xi, 2) ZZ rotations, for about 4 l n xi
    single-qubit rotations in total depth l (n + 3 xi).
    """
    n, l, xi = params.n, params.l, params.xi
    givens_per_block = 2 * _pairs(n) - 2 * _pairs(n - xi)
    zz_per_block = _pairs(2 * xi)
    rotations = 4 * l * n * xi
    t_gates = t_count(rotations, eps_rot) if eps_rot is not None else None
    return ResourceReport(
        qubits=2 * n,
        givens_rotations=l * givens_per_block,
        zz_rotations=l * zz_per_block,
        circuit_depth=l * (n + 3 * xi),
        single_qubit_rotations=rotations,
        t_gates=t_gates,
        architecture="all-to-all",
        spinful=True,
    )


def render_comparison(step: ResourceReport, motta: ResourceReport | None = None) -> str:
    """Render reports as an aligned text table, one estimator per row.

    Cells show the scaling law next to the concrete count.  With a
    baseline present, a final row reports the baseline-to-step ratio per
    column, so values above 1 mean the step circuit is cheaper.
    """
    columns = ["qubits", "circuit_depth", "single_qubit_rotations"]
    headers = ["Qubits", "Circuit depth", "Single-qubit rotations"]
    with_t = step.t_gates is not None
    if with_t:
        columns.append("t_gates")
        headers.append("T gates")

    def cell(scaling: dict, report: ResourceReport, key: str) -> str:
        value = getattr(report, key)
        if value is None:
            return ""
        prefix = f"{scaling[key]}  " if key in scaling else ""
        return f"{prefix}{value:,}"

    def ratio(key: str) -> str:
        a, b = getattr(motta, key), getattr(step, key)
        if a is None or b is None:
            return ""
        return f"{a / b:.2f}x"

    rows = [["", *headers]]
    rows.append(["This work", *(cell(STEP_SCALING, step, c) for c in columns)])
    if motta is not None:
        rows.append(["Double fact.", *(cell(MOTTA_SCALING, motta, c) for c in columns)])
        rows.append(["Ratio", *(ratio(c) for c in columns)])

    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = [
        "  ".join(col.ljust(widths[i]) for i, col in enumerate(row)).rstrip()
        for row in rows
    ]
    return "\n".join(lines)
