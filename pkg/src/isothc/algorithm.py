"""Trotter-step channels built from isometric THC factors, and their errors.

One step of the second-order splitting evolves an extended register (system
modes plus one ancilla mode per extra THC rank) by

    e^{-i h tau/2} . U_int . e^{-i h tau/2} . reset ancillas,

where the interaction unitary rotates into the basis that diagonalizes the
THC core, applies mode-diagonal two-body phases, and rotates back.  The
basic variant uses a single diagonal block; the improved variant splits it
into four quarter-angle blocks interleaved with number-counting phases on
the physical ancilla modes, chosen so the leading leakage amplitudes out of
the ancilla vacuum cancel.

Per-step accuracy decomposes into three pieces: the factorization error
(operator distance between the true and recontracted interactions), the
Trotter splitting error, and the projection error from resetting ancillas.
This module evaluates all three, both as measured trace distances on
concrete states and as analytic bounds with exactly computed norms.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .focksim import (
    FockDensity,
    FockState,
    GivensSequence,
    ModeLayout,
    apply_basis_rotation,
    apply_diagonal_one_body,
    apply_diagonal_two_body,
    basis_state,
    complete_isometry,
    embed_in_ancilla_vacuum,
    exact_evolution,
    givens_decompose,
    phase_on_ancillas,
    reset_ancillas,
    trace_distance,
)
from .focksim import _scatter_index_map
from .hamiltonian import (
    DEFAULT_MODE_CAP,
    ElectronicHamiltonian,
    ManyBodyOperator,
    build_many_body_operator,
)
from .thc import ThcFactorization, approximation_errors, projected_interaction

__all__ = [
    "DEFAULT_PHASES",
    "StepSpec",
    "ErrorBudget",
    "EvolveResult",
    "ThcBound",
    "extended_layout",
    "basis_rotation_sequence",
    "hartree_fock_state",
    "projected_operators",
    "step_channel",
    "evolve",
    "trotter_bound",
    "thc_bound",
    "projection_error_measured",
    "projection_error_bound",
    "error_budget",
    "phase_cancellation_sums",
]

DEFAULT_PHASES = (-np.pi / 2, np.pi, np.pi / 2)
DIAGONAL_TOL = 1e-10
VACUUM_SUPPORT_TOL = 1e-10
# densities above this register size fall back to sequential gate application
FUSED_MODE_CAP = 11


@dataclass(frozen=True)
class StepSpec:
    """Variant and timestep of one Trotter step."""

    tau: float
    variant: str = "basic"
    phases: tuple[float, float, float] = DEFAULT_PHASES
    splitting: str = "second_order"

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.variant not in ("basic", "improved"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.splitting != "second_order":
            raise ValueError("only the second-order h/2 ... h/2 splitting is implemented")
        phases = tuple(float(p) for p in self.phases)
        if self.variant == "improved" and len(phases) != 3:
            raise ValueError("the improved variant takes exactly 3 phases")
        object.__setattr__(self, "phases", phases)


@dataclass(frozen=True)
class ErrorBudget:
    """Per-step error contributions of a THC Trotter step.

    ``eps_thc_rate`` is per unit time; ``eps_tr`` and ``eps_pr`` are per
    step at the budget's timestep.
    """

    eps_thc_rate: float
    eps_tr: float
    eps_pr: float

    def __post_init__(self) -> None:
        for name in ("eps_thc_rate", "eps_tr", "eps_pr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def total(self, t: float, tau: float) -> float:
        n_steps = int(round(t / tau))
        return self.eps_thc_rate * t + n_steps * (self.eps_tr + self.eps_pr)


@dataclass(frozen=True)
class EvolveResult:
    rho_final: FockDensity
    error_vs_exact: float
    n_steps: int
    t_simulated: float


@dataclass(frozen=True)
class ThcBound:
    """Bound on the interaction-operator distance, times evolution time."""

    value: float
    branch: str
    operator_norm: float | None
    frobenius_bound: float


def extended_layout(thc: ThcFactorization, spinful: bool = False) -> ModeLayout:
    """Register layout of the step circuit: one ancilla per extra rank."""
    return ModeLayout(n_system=thc.n, n_ancilla=thc.m - thc.n, spinful=spinful)


def basis_rotation_sequence(thc: ThcFactorization) -> GivensSequence:
    """Givens circuit whose single-particle action extends ``u`` transposed.

    The co-isometry is completed to a full basis rotation; only the action
    on the system-mode block is pinned down, which keeps the rotation count
    at ``M N - N(N+1)/2`` per spin sector.
    """
    return givens_decompose(complete_isometry(thc.u), thc.n)


def _diagonal_entries(hamiltonian: ElectronicHamiltonian) -> np.ndarray:
    h = hamiltonian.h
    off = h - np.diag(np.diag(h))
    if np.max(np.abs(off)) > DIAGONAL_TOL:
        raise ValueError(
            "one-body part is not diagonal; rotate the Hamiltonian to its "
            "h eigenbasis first"
        )
    return np.diag(h).copy()


def hartree_fock_state(
    hamiltonian: ElectronicHamiltonian, n_electrons: int, spinful: bool = False
) -> FockState:
    """Aufbau product state in the (diagonal) one-body eigenbasis."""
    energies = _diagonal_entries(hamiltonian)
    n = hamiltonian.n_orbitals
    layout = ModeLayout(n, 0, spinful=spinful)
    capacity = layout.n_modes
    if not 0 <= n_electrons <= capacity:
        raise ValueError(f"cannot place {n_electrons} electrons in {capacity} spin-modes")
    order = np.argsort(energies, kind="stable")
    occupations = [0] * layout.n_modes
    for k in range(n_electrons):
        if spinful:
            orbital = order[k // 2]
            occupations[orbital + (k % 2) * n] = 1
        else:
            occupations[order[k]] = 1
    return basis_state(layout, occupations)


def projected_operators(
    hamiltonian: ElectronicHamiltonian,
    thc: ThcFactorization,
    spinful: bool = False,
    max_modes: int = DEFAULT_MODE_CAP,
) -> tuple[ManyBodyOperator, ManyBodyOperator]:
    """Dense system-mode operators (h_op, vprime_op) for the split H' = h + V'."""
    n = hamiltonian.n_orbitals
    zero4 = np.zeros((n, n, n, n))
    h_only = ElectronicHamiltonian(n, 0.0, hamiltonian.h, zero4)
    v_only = ElectronicHamiltonian(n, 0.0, np.zeros((n, n)), projected_interaction(thc))
    return (
        build_many_body_operator(h_only, spinful=spinful, max_modes=max_modes),
        build_many_body_operator(v_only, spinful=spinful, max_modes=max_modes),
    )


# ---------------------------------------------------------------------------
# The step circuit
# ---------------------------------------------------------------------------

class _StepEngine:
    """One compiled step: an op list with sequential and dense interpreters."""

    def __init__(
        self,
        thc: ThcFactorization,
        hamiltonian: ElectronicHamiltonian | None,
        spec: StepSpec,
        layout: ModeLayout,
    ) -> None:
        if layout.n_system != thc.n or layout.n_ancilla != thc.m - thc.n:
            raise ValueError(
                f"layout {layout} does not match factorization with "
                f"n = {thc.n}, m = {thc.m}"
            )
        self.layout = layout
        self.spec = spec
        self.vtilde = thc.vtilde
        self.sequence = basis_rotation_sequence(thc)
        self.h_diag: np.ndarray | None = None
        if hamiltonian is not None:
            if hamiltonian.n_orbitals != thc.n:
                raise ValueError("Hamiltonian size does not match the factorization")
            entries = _diagonal_entries(hamiltonian)
            scattered = np.zeros(layout.n_modes)
            for sector in range(layout.n_sectors):
                off = sector * layout.sector_size
                scattered[off : off + layout.n_system] = entries
            self.h_diag = scattered
        self.ops = self._build_ops()
        self._dense: np.ndarray | None = None

    def _interaction_ops(self) -> list[tuple]:
        tau = self.spec.tau
        if self.spec.variant == "basic":
            return [("rot", False), ("vee", tau), ("rot", True)]
        quarter = [("rot", False), ("vee", tau / 4), ("rot", True)]
        phi1, phi2, phi3 = self.spec.phases
        # rightmost factor of V P(phi1) V P(phi2) V P(phi3) V acts first
        return (
            quarter
            + [("anc", phi3)]
            + quarter
            + [("anc", phi2)]
            + quarter
            + [("anc", phi1)]
            + quarter
        )

    def _build_ops(self) -> list[tuple]:
        ops = self._interaction_ops()
        if self.h_diag is not None:
            half = [("one", self.spec.tau / 2)]
            ops = half + ops + half
        return ops

    def _apply_sequential(self, state):
        for op in self.ops:
            kind = op[0]
            if kind == "rot":
                state = apply_basis_rotation(state, self.sequence, inverse=op[1])
            elif kind == "vee":
                state = apply_diagonal_two_body(state, self.vtilde, op[1])
            elif kind == "one":
                state = apply_diagonal_one_body(state, self.h_diag, op[1])
            else:
                state = phase_on_ancillas(state, op[1])
        return state

    def dense_unitary(self) -> np.ndarray:
        if self._dense is None:
            dim = self.layout.dim
            u = np.empty((dim, dim), dtype=complex)
            for j in range(dim):
                column = np.zeros(dim, dtype=complex)
                column[j] = 1.0
                u[:, j] = self._apply_sequential(FockState(self.layout, column)).amplitudes
            self._dense = u
        return self._dense

    def apply_unitary(self, state, method: str = "auto"):
        if method == "auto":
            method = "fused" if self.layout.n_modes <= FUSED_MODE_CAP else "gates"
        if method == "gates":
            return self._apply_sequential(state)
        if method != "fused":
            raise ValueError(f"unknown method {method!r}")
        u = self.dense_unitary()
        if isinstance(state, FockState):
            return FockState(self.layout, u @ state.amplitudes)
        return FockDensity(self.layout, u @ state.matrix @ u.conj().T)

    def step(self, rho: FockDensity, method: str = "auto") -> FockDensity:
        return reset_ancillas(self.apply_unitary(rho, method))


def step_channel(
    rho: FockDensity,
    thc: ThcFactorization,
    hamiltonian: ElectronicHamiltonian,
    spec: StepSpec,
    method: str = "auto",
) -> FockDensity:
    """Apply one Trotter step (unitaries plus ancilla reset) to a density.

    ``rho`` lives on the extended layout and must be supported on the
    ancilla vacuum; ``hamiltonian`` must carry a diagonal one-body part.
    """
    rho.system_density(tol=VACUUM_SUPPORT_TOL)  # validates vacuum support
    engine = _StepEngine(thc, hamiltonian, spec, rho.layout)
    out = engine.step(rho, method)
    if abs(out.trace() - rho.trace()) > 1e-10:
        raise AssertionError("step channel failed to preserve the trace")
    return out


def evolve(
    psi0: FockState,
    thc: ThcFactorization,
    hamiltonian: ElectronicHamiltonian,
    t: float,
    tau: float,
    spec: StepSpec | None = None,
    method: str = "auto",
    step_tolerance: float = 0.5,
    max_modes: int = DEFAULT_MODE_CAP,
) -> EvolveResult:
    """Repeat the step channel for ``round(t / tau)`` steps and compare to e^{-iHt}.

    ``psi0`` is a pure state on the system-only layout; it is embedded in
    the ancilla vacuum internally.  ``tau`` overrides ``spec.tau`` so sweeps
    can share one spec.  The exact reference evolves ``psi0`` under the full
    Hamiltonian for the actually simulated time ``n_steps * tau``, and the
    reported error is the trace distance on the system modes.
    """
    if psi0.layout.n_ancilla != 0:
        raise ValueError("psi0 must live on a system-only layout")
    if psi0.layout.n_system != hamiltonian.n_orbitals:
        raise ValueError("psi0 does not match the Hamiltonian size")
    spec = StepSpec(tau=tau) if spec is None else dataclasses.replace(spec, tau=tau)
    ratio = t / tau
    n_steps = int(round(ratio))
    if abs(ratio - n_steps) > step_tolerance:
        raise ValueError(
            f"t/tau = {ratio:.6g} is more than {step_tolerance} from an integer"
        )
    layout = extended_layout(thc, spinful=psi0.layout.spinful)
    rho = embed_in_ancilla_vacuum(psi0.density(), layout)
    if n_steps == 0:
        return EvolveResult(rho_final=rho, error_vs_exact=0.0, n_steps=0, t_simulated=0.0)

    engine = _StepEngine(thc, hamiltonian, spec, layout)
    for _ in range(n_steps):
        rho = engine.step(rho, method)
    if abs(rho.trace() - 1.0) > 1e-8:
        raise AssertionError("evolution failed to preserve the trace")

    t_simulated = n_steps * tau
    op = build_many_body_operator(
        hamiltonian, spinful=psi0.layout.spinful, max_modes=max_modes
    )
    reference = exact_evolution(op, psi0, t_simulated)
    error = trace_distance(rho.system_density(tol=1e-8), reference)
    return EvolveResult(
        rho_final=rho, error_vs_exact=error, n_steps=n_steps, t_simulated=t_simulated
    )


# ---------------------------------------------------------------------------
# Error bounds and measurements
# ---------------------------------------------------------------------------

def trotter_bound(h_op: ManyBodyOperator, vprime_op: ManyBodyOperator, tau: float) -> float:
    """Second-order splitting bound from the two nested commutator norms.

        tau^3/12 ||[V', [V', h]]|| + tau^3/24 ||[h, [h, V']]||
    """
    if h_op.n_modes != vprime_op.n_modes:
        raise ValueError("operators act on different registers")
    a = h_op.matrix
    b = vprime_op.matrix
    comm_ba = b @ a - a @ b
    nested_b = np.linalg.norm(b @ comm_ba - comm_ba @ b, 2)
    nested_a = np.linalg.norm(a @ comm_ba - comm_ba @ a, 2)
    return float(tau**3 / 12.0 * nested_b + tau**3 / 24.0 * nested_a)


def thc_bound(
    hamiltonian: ElectronicHamiltonian,
    thc: ThcFactorization,
    t: float,
    spinful: bool = False,
    max_modes: int = DEFAULT_MODE_CAP,
) -> ThcBound:
    """Bound ||V_op - V'_op|| t on the factorization's evolution error.

    Uses the exact operator norm of the interaction difference when the
    register fits the builder cap, and the element-wise bound
    ``N^2 ||V||_2 eps_v`` otherwise; the smaller branch wins.
    """
    n = hamiltonian.n_orbitals
    eps_v, _ = approximation_errors(hamiltonian, thc)
    frobenius = float(n**2 * np.linalg.norm(hamiltonian.eri.reshape(-1)) * eps_v)
    n_sim_modes = (2 if spinful else 1) * n
    operator_norm = None
    if n_sim_modes <= max_modes:
        diff = ElectronicHamiltonian(
            n, 0.0, np.zeros((n, n)), hamiltonian.eri - projected_interaction(thc)
        )
        operator_norm = build_many_body_operator(
            diff, spinful=spinful, max_modes=max_modes
        ).norm()
    if operator_norm is not None and operator_norm <= frobenius:
        return ThcBound(operator_norm * t, "operator_norm", operator_norm, frobenius)
    return ThcBound(frobenius * t, "frobenius", operator_norm, frobenius)


def _interaction_engine(
    thc: ThcFactorization,
    tau: float,
    variant: str,
    phases: tuple[float, float, float],
    spinful: bool,
) -> _StepEngine:
    spec = StepSpec(tau=tau, variant=variant, phases=phases)
    return _StepEngine(thc, None, spec, extended_layout(thc, spinful=spinful))


def projection_error_measured(
    thc: ThcFactorization,
    rho: FockState | FockDensity,
    tau: float,
    variant: str = "basic",
    phases: tuple[float, float, float] = DEFAULT_PHASES,
    method: str = "auto",
    max_modes: int = DEFAULT_MODE_CAP,
) -> float:
    """Trace distance between the reset interaction step and the ideal one.

    Evolves ``rho`` (system-only) through the extended interaction unitary,
    traces out the ancillas, and compares against evolution under the
    recontracted interaction V' for time ``tau``.  The one-body part plays
    no role here; this isolates the vacuum-projection error of a step.
    """
    if isinstance(rho, FockState):
        rho = rho.density()
    if rho.layout.n_ancilla != 0:
        raise ValueError("rho must live on a system-only layout")
    if rho.layout.n_system != thc.n:
        raise ValueError("rho does not match the factorization size")
    spinful = rho.layout.spinful
    engine = _interaction_engine(thc, tau, variant, phases, spinful)
    extended = embed_in_ancilla_vacuum(rho, engine.layout)
    traced = reset_ancillas(engine.apply_unitary(extended, method)).system_density(
        tol=np.inf
    )
    n = thc.n
    v_only = ElectronicHamiltonian(n, 0.0, np.zeros((n, n)), projected_interaction(thc))
    vprime_op = build_many_body_operator(v_only, spinful=spinful, max_modes=max_modes)
    ideal = exact_evolution(vprime_op, rho, tau)
    return trace_distance(traced, ideal)


def projection_error_bound(
    thc: ThcFactorization,
    tau: float,
    variant: str = "basic",
    phases: tuple[float, float, float] = DEFAULT_PHASES,
    spinful: bool = False,
    max_modes: int = DEFAULT_MODE_CAP,
) -> float:
    """State-independent projection-error bound with exact operator norms.

        eps_Pr <= || P U P - e^{-iV' tau} P || + 1/2 || P_perp U P ||^2

    with P the ancilla-vacuum projector and U the interaction unitary.
    """
    engine = _interaction_engine(thc, tau, variant, phases, spinful)
    layout = engine.layout
    u = engine.dense_unitary()
    vacuum = _scatter_index_map(layout)
    mask = np.zeros(layout.dim, dtype=bool)
    mask[vacuum] = True
    n = thc.n
    v_only = ElectronicHamiltonian(n, 0.0, np.zeros((n, n)), projected_interaction(thc))
    vprime_op = build_many_body_operator(v_only, spinful=spinful, max_modes=max_modes)
    w, v = vprime_op.eigensystem()
    ideal = (v * np.exp(-1j * w * tau)) @ v.conj().T
    vacuum_block = u[np.ix_(vacuum, vacuum)]
    leak_block = u[np.ix_(np.where(~mask)[0], vacuum)]
    term1 = float(np.linalg.norm(vacuum_block - ideal, 2))
    term2 = 0.5 * float(np.linalg.norm(leak_block, 2)) ** 2
    return term1 + term2


def error_budget(
    hamiltonian: ElectronicHamiltonian,
    thc: ThcFactorization,
    spec: StepSpec,
    rho: FockState | FockDensity | None = None,
    spinful: bool = False,
    max_modes: int = DEFAULT_MODE_CAP,
) -> ErrorBudget:
    """Assemble the three per-step error contributions for one spec.

    With a state given, the projection term is the measured trace distance
    at that state; otherwise the state-independent operator bound is used.
    """
    h_op, vprime_op = projected_operators(hamiltonian, thc, spinful, max_modes)
    eps_tr = trotter_bound(h_op, vprime_op, spec.tau)
    rate = thc_bound(hamiltonian, thc, 1.0, spinful, max_modes).value
    if rho is None:
        eps_pr = projection_error_bound(
            thc, spec.tau, spec.variant, spec.phases, spinful, max_modes
        )
    else:
        eps_pr = projection_error_measured(
            thc, rho, spec.tau, spec.variant, spec.phases, max_modes=max_modes
        )
    return ErrorBudget(eps_thc_rate=rate, eps_tr=eps_tr, eps_pr=eps_pr)


def phase_cancellation_sums(
    phases: tuple[float, float, float] = DEFAULT_PHASES
) -> tuple[complex, complex, complex, complex]:
    """The four exponential sums whose vanishing removes leakage at O(tau).

    The first pair controls single-transfer amplitudes (phases entering
    once and doubled); the second pair the double-transfer amplitudes.  All
    four are zero for the default phases.
    """
    p1, p2, p3 = phases

    def chain(scale: float) -> complex:
        return (
            1.0
            + np.exp(1j * scale * p1)
            + np.exp(1j * scale * (p1 + p2))
            + np.exp(1j * scale * (p1 + p2 + p3))
        )

    def spread(scale: float) -> complex:
        return (
            2.0
            + np.exp(1j * scale * p1)
            + np.exp(1j * scale * p2)
            + np.exp(1j * scale * p3)
            + np.exp(1j * scale * (p1 + p2))
            + np.exp(1j * scale * (p2 + p3))
            + np.exp(1j * scale * (p1 + p2 + p3))
        )

    return (chain(1.0), chain(2.0), spread(1.0), spread(2.0))
