"""Exact simulation primitives on small fermionic Fock spaces.

States live on the full occupation-number basis of ``m`` modes, with mode 0
as the least significant bit of the basis index.  Layouts distinguish
system modes (``a``) from ancilla modes (``b``); in a spinful layout the
up-spin sector occupies modes ``0 .. sector_size-1`` and the down-spin
sector the next ``sector_size`` modes, with a-modes before b-modes inside
each sector.

The only entangling gate is the Givens rotation on adjacent modes
``(p, p+1)``, which avoids Jordan-Wigner strings entirely.  Its action on
the two-mode occupation basis ``(|00>, |10>, |01>, |11>)`` (bit p first) is

        [[1,        0,                    0,         0],
         [0,  cos(theta), -exp(-i phi) sin(theta),   0],
         [0,  exp(i phi) sin(theta),  cos(theta),    0],
         [0,        0,                    0,         1]],

so on the single-particle sector it reduces to the plane rotation
``[[cos, -sin], [sin, cos]]`` (for ``phi = 0``) acting on the amplitude
pair ``(p, p+1)``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import ManyBodyOperator

__all__ = [
    "ModeLayout",
    "FockState",
    "FockDensity",
    "GivensRotation",
    "GivensSequence",
    "basis_state",
    "embed_in_ancilla_vacuum",
    "complete_isometry",
    "givens_decompose",
    "apply_basis_rotation",
    "apply_diagonal_one_body",
    "apply_diagonal_two_body",
    "phase_on_ancillas",
    "reset_ancillas",
    "trace_distance",
    "exact_evolution",
]

MAX_PURE_MODES = 20
MAX_DENSITY_MODES = 14
ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True)
class ModeLayout:
    """How register modes split into system and ancilla modes."""

    n_system: int
    n_ancilla: int
    spinful: bool = False

    def __post_init__(self) -> None:
        if self.n_system < 1 or self.n_ancilla < 0:
            raise ValueError("need n_system >= 1 and n_ancilla >= 0")

    @property
    def sector_size(self) -> int:
        return self.n_system + self.n_ancilla

    @property
    def n_sectors(self) -> int:
        return 2 if self.spinful else 1

    @property
    def n_modes(self) -> int:
        return self.n_sectors * self.sector_size

    @property
    def dim(self) -> int:
        return 1 << self.n_modes

    @property
    def system_modes(self) -> tuple[int, ...]:
        return tuple(
            s * self.sector_size + i
            for s in range(self.n_sectors)
            for i in range(self.n_system)
        )

    @property
    def ancilla_modes(self) -> tuple[int, ...]:
        return tuple(
            s * self.sector_size + i
            for s in range(self.n_sectors)
            for i in range(self.n_system, self.sector_size)
        )

    def system_only(self) -> "ModeLayout":
        return ModeLayout(self.n_system, 0, self.spinful)


def _check_dim(layout: ModeLayout, array: np.ndarray, want_matrix: bool) -> np.ndarray:
    cap = MAX_DENSITY_MODES if want_matrix else MAX_PURE_MODES
    if layout.n_modes > cap:
        raise ValueError(
            f"{layout.n_modes} modes exceeds the simulator cap of {cap} "
            f"for {'density matrices' if want_matrix else 'pure states'}"
        )
    arr = np.asarray(array, dtype=complex)
    want = (layout.dim, layout.dim) if want_matrix else (layout.dim,)
    if arr.shape != want:
        raise ValueError(f"array shape {arr.shape} does not match layout dim {want}")
    return arr


@dataclass
class FockState:
    """Pure state amplitudes over the occupation basis."""

    layout: ModeLayout
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = _check_dim(self.layout, self.amplitudes, want_matrix=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def density(self) -> "FockDensity":
        return FockDensity(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_system": self.layout.n_system,
                "n_ancilla": self.layout.n_ancilla,
                "spinful": self.layout.spinful,
                "real": self.amplitudes.real.tolist(),
                "imag": self.amplitudes.imag.tolist(),
            }
        )


@dataclass
class FockDensity:
    """Density matrix over the occupation basis."""

    layout: ModeLayout
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = _check_dim(self.layout, self.matrix, want_matrix=True)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def system_density(self, tol: float = 1e-9) -> "FockDensity":
        """Restrict a b-vacuum-supported density to its system modes."""
        if self.layout.n_ancilla == 0:
            return FockDensity(self.layout, self.matrix.copy())
        a_key, b_key = _split_keys(self.layout)
        vacuum = np.where(b_key == 0)[0]
        order = vacuum[np.argsort(a_key[vacuum])]
        block = self.matrix[np.ix_(order, order)]
        weight = float(np.abs(self.matrix).sum() - np.abs(block).sum())
        if weight > tol:
            raise ValueError(
                f"density has weight {weight:.3e} outside the ancilla vacuum"
            )
        return FockDensity(self.layout.system_only(), block)


def basis_state(layout: ModeLayout, occupations: str | list[int]) -> FockState:
    """Computational basis state; ``occupations[k]`` is the filling of mode k."""
    occ = [int(c) for c in occupations]
    if len(occ) != layout.n_modes or any(o not in (0, 1) for o in occ):
        raise ValueError(f"need {layout.n_modes} binary occupations, got {occupations!r}")
    index = sum(bit << k for k, bit in enumerate(occ))
    amplitudes = np.zeros(layout.dim, dtype=complex)
    amplitudes[index] = 1.0
    return FockState(layout, amplitudes)


def _scatter_index_map(layout: ModeLayout) -> np.ndarray:
    """Index of each system-only basis state inside the extended register."""
    positions = layout.system_modes
    n_sys_modes = len(positions)
    small = np.arange(1 << n_sys_modes)
    out = np.zeros_like(small)
    for t, pos in enumerate(positions):
        out |= ((small >> t) & 1) << pos
    return out


def embed_in_ancilla_vacuum(
    state: FockState | FockDensity, layout: ModeLayout
) -> FockState | FockDensity:
    """Embed a system-only state into ``layout`` with all ancillas empty."""
    src = state.layout
    if src.n_ancilla != 0 or src.n_system != layout.n_system or src.spinful != layout.spinful:
        raise ValueError("source must be the system-only restriction of the target layout")
    scatter = _scatter_index_map(layout)
    if isinstance(state, FockState):
        amplitudes = np.zeros(layout.dim, dtype=complex)
        amplitudes[scatter] = state.amplitudes
        return FockState(layout, amplitudes)
    matrix = np.zeros((layout.dim, layout.dim), dtype=complex)
    matrix[np.ix_(scatter, scatter)] = state.matrix
    return FockDensity(layout, matrix)


# ---------------------------------------------------------------------------
# Basis-rotation circuits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GivensRotation:
    """One rotation on the adjacent mode pair (p, q = p + 1)."""

    p: int
    q: int
    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        if self.q != self.p + 1:
            raise ValueError("rotations act on adjacent modes only")


@dataclass(frozen=True)
class GivensSequence:
    """An ordered rotation circuit plus residual single-mode phases.

    Applied to a register, the phases act first and the rotations follow in
    list order.  The equivalent single-particle matrix is

        Q = R(r_K) ... R(r_1) diag(exp(i phases)),

    and by construction of :func:`givens_decompose` the first ``n_relevant``
    columns of Q reproduce the transposed target block.
    """

    n_modes: int
    rotations: tuple[GivensRotation, ...]
    diagonal_phases: np.ndarray

    def __post_init__(self) -> None:
        phases = np.asarray(self.diagonal_phases, dtype=float)
        if phases.shape != (self.n_modes,):
            raise ValueError("need one residual phase per mode")
        object.__setattr__(self, "diagonal_phases", phases)
        for r in self.rotations:
            if not 0 <= r.p < r.q < self.n_modes:
                raise ValueError(f"rotation {r} outside of {self.n_modes} modes")

    def __len__(self) -> int:
        return len(self.rotations)

    def single_particle_matrix(self) -> np.ndarray:
        q = np.diag(np.exp(1j * self.diagonal_phases))
        for r in self.rotations:
            c, s = np.cos(r.theta), np.sin(r.theta)
            rot = np.eye(self.n_modes, dtype=complex)
            rot[r.p, r.p] = c
            rot[r.p, r.q] = -np.exp(-1j * r.phi) * s
            rot[r.q, r.p] = np.exp(1j * r.phi) * s
            rot[r.q, r.q] = c
            q = rot @ q
        return q

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_modes": self.n_modes,
                "rotations": [
                    {"p": r.p, "q": r.q, "theta": r.theta, "phi": r.phi}
                    for r in self.rotations
                ],
                "residual_diagonal_phases": self.diagonal_phases.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GivensSequence":
        doc = json.loads(text)
        rotations = tuple(
            GivensRotation(int(r["p"]), int(r["q"]), float(r["theta"]), float(r["phi"]))
            for r in doc["rotations"]
        )
        return cls(
            n_modes=int(doc["n_modes"]),
            rotations=rotations,
            diagonal_phases=np.array(doc["residual_diagonal_phases"], dtype=float),
        )


def complete_isometry(u: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Extend a co-isometry (orthonormal rows) to a full orthogonal matrix.

    The first ``n`` rows of the result are ``u`` unchanged; the remaining
    rows come from Gram-Schmidt over the canonical basis vectors taken in
    index order, which makes the completion deterministic.
    """
    u = np.asarray(u, dtype=float)
    n, m = u.shape
    if n > m:
        raise ValueError(f"u has more rows ({n}) than columns ({m})")
    gram = u @ u.T
    if np.max(np.abs(gram - np.eye(n))) > tol:
        raise ValueError("rows of u are not orthonormal within tolerance")
    rows = [u[i] for i in range(n)]
    for k in range(m):
        if len(rows) == m:
            break
        r = np.zeros(m)
        r[k] = 1.0
        for _ in range(2):  # two Gram-Schmidt passes for numerical orthogonality
            for row in rows:
                r = r - (row @ r) * row
        nrm = np.linalg.norm(r)
        if nrm > 1e-7:
            rows.append(r / nrm)
    if len(rows) != m:
        raise ValueError("canonical vectors failed to complete the isometry")
    w = np.array(rows)
    if np.max(np.abs(w @ w.T - np.eye(m))) > ORTHOGONALITY_TOL:
        raise ValueError("completion lost orthogonality beyond tolerance")
    return w


def givens_decompose(w: np.ndarray, n_relevant: int) -> GivensSequence:
    """Decompose a basis rotation into adjacent-mode Givens rotations.

    Only the action on the first ``n_relevant`` rows of ``w`` (the
    system-mode block) is reproduced, which caps the rotation count at
    ``C(m, 2) - C(m - n, 2)`` instead of the full ``C(m, 2)``.  Rotations on
    already-zero entries are skipped, so an identity target yields an empty
    sequence.
    """
    w = np.asarray(w, dtype=float)
    m = w.shape[0]
    n = n_relevant
    if w.shape != (m, m) or not 1 <= n <= m:
        raise ValueError("w must be square with 1 <= n_relevant <= m")
    if np.max(np.abs(w @ w.T - np.eye(m))) > 1e-8:
        raise ValueError("w is not orthogonal within tolerance")

    a = w[:n, :].T.copy()  # m x n
    elimination: list[tuple[int, float]] = []
    for col in range(n):
        for row in range(m - 1, col, -1):
            top, bot = a[row - 1, col], a[row, col]
            if abs(bot) < 1e-14:
                continue
            theta = np.arctan2(-bot, top)
            c, s = np.cos(theta), np.sin(theta)
            block = a[row - 1 : row + 1, :].copy()
            a[row - 1, :] = c * block[0] - s * block[1]
            a[row, :] = s * block[0] + c * block[1]
            elimination.append((row - 1, theta))

    max_count = m * (m - 1) // 2 - (m - n) * (m - n - 1) // 2
    assert len(elimination) <= max_count
    phases = np.zeros(m)
    for j in range(n):
        if a[j, j] < 0:
            phases[j] = np.pi
    rotations = tuple(
        GivensRotation(p, p + 1, -theta) for p, theta in reversed(elimination)
    )
    return GivensSequence(n_modes=m, rotations=rotations, diagonal_phases=phases)


# ---------------------------------------------------------------------------
# Gate application
# ---------------------------------------------------------------------------

def _pair_indices(n_modes: int, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    arr = np.arange(1 << n_modes)
    sel = (((arr >> p) & 1) == 1) & (((arr >> q) & 1) == 0)
    at_p = arr[sel]
    at_q = at_p - (1 << p) + (1 << q)
    return at_p, at_q


def _mix_rows(mat_or_vec: np.ndarray, at_p, at_q, theta: float, phi: float) -> None:
    c, s = np.cos(theta), np.sin(theta)
    xp = mat_or_vec[at_p].copy()
    xq = mat_or_vec[at_q]
    mat_or_vec[at_p] = c * xp - np.exp(-1j * phi) * s * xq
    mat_or_vec[at_q] = np.exp(1j * phi) * s * xp + c * xq


def _mix_cols(mat: np.ndarray, at_p, at_q, theta: float, phi: float) -> None:
    # right-multiplication by the adjoint gate
    c, s = np.cos(theta), np.sin(theta)
    xp = mat[:, at_p].copy()
    xq = mat[:, at_q]
    mat[:, at_p] = c * xp - np.exp(1j * phi) * s * xq
    mat[:, at_q] = np.exp(-1j * phi) * s * xp + c * xq


def _apply_diagonal(state, diag: np.ndarray):
    if isinstance(state, FockState):
        return FockState(state.layout, state.amplitudes * diag)
    matrix = state.matrix * diag[:, None]
    matrix = matrix * diag.conj()[None, :]
    return FockDensity(state.layout, matrix)


def _sector_offsets(layout: ModeLayout, spin_sector: str) -> list[int]:
    if spin_sector not in ("both", "up", "down"):
        raise ValueError(f"unknown spin sector {spin_sector!r}")
    if not layout.spinful:
        if spin_sector != "both":
            raise ValueError("spin sectors require a spinful layout")
        return [0]
    if spin_sector == "up":
        return [0]
    if spin_sector == "down":
        return [layout.sector_size]
    return [0, layout.sector_size]


def apply_basis_rotation(
    state: FockState | FockDensity,
    sequence: GivensSequence,
    inverse: bool = False,
    spin_sector: str = "both",
) -> FockState | FockDensity:
    """Apply a Givens-rotation circuit (or its inverse) to a state.

    For spinful layouts the same sequence acts on the chosen spin sector(s);
    mode indices inside the sequence are sector-relative.
    """
    layout = state.layout
    if sequence.n_modes != layout.sector_size:
        raise ValueError(
            f"sequence on {sequence.n_modes} modes does not fit sector size "
            f"{layout.sector_size}"
        )
    offsets = _sector_offsets(layout, spin_sector)

    phase_per_mode = np.zeros(layout.n_modes)
    for off in offsets:
        for k in range(layout.sector_size):
            phase_per_mode[off + k] = sequence.diagonal_phases[k]
    arr = np.arange(layout.dim)
    exponent = np.zeros(layout.dim)
    for mode, phase in enumerate(phase_per_mode):
        if phase != 0.0:
            exponent = exponent + phase * ((arr >> mode) & 1)
    phase_diag = np.exp(1j * exponent)

    if isinstance(state, FockState):
        out = state.amplitudes.copy()
    else:
        out = state.matrix.copy()

    def apply_gate(p: int, q: int, theta: float, phi: float) -> None:
        at_p, at_q = _pair_indices(layout.n_modes, p, q)
        _mix_rows(out, at_p, at_q, theta, phi)
        if out.ndim == 2:
            _mix_cols(out, at_p, at_q, theta, phi)

    def apply_phases(diag: np.ndarray) -> None:
        nonlocal out
        if out.ndim == 1:
            out = out * diag
        else:
            out = diag[:, None] * out * diag.conj()[None, :]

    if not inverse:
        apply_phases(phase_diag)
        for r in sequence.rotations:
            for off in offsets:
                apply_gate(r.p + off, r.q + off, r.theta, r.phi)
    else:
        for r in reversed(sequence.rotations):
            for off in offsets:
                apply_gate(r.p + off, r.q + off, -r.theta, r.phi)
        apply_phases(phase_diag.conj())

    if isinstance(state, FockState):
        return FockState(layout, out)
    return FockDensity(layout, out)


# ---------------------------------------------------------------------------
# Diagonal evolutions and ancilla operations
# ---------------------------------------------------------------------------

def _orbital_occupations(layout: ModeLayout) -> np.ndarray:
    """Per-basis-state occupation of each orbital slot, summed over spin."""
    arr = np.arange(layout.dim)
    occ = np.zeros((layout.sector_size, layout.dim), dtype=np.int64)
    for alpha in range(layout.sector_size):
        total = (arr >> alpha) & 1
        if layout.spinful:
            total = total + ((arr >> (alpha + layout.sector_size)) & 1)
        occ[alpha] = total
    return occ


def apply_diagonal_one_body(
    state: FockState | FockDensity, h_diag: np.ndarray, tau: float
) -> FockState | FockDensity:
    """Evolve by ``exp(-i tau sum_p h_diag[p] n_p)`` (one entry per mode)."""
    layout = state.layout
    h_diag = np.asarray(h_diag, dtype=float)
    if h_diag.shape != (layout.n_modes,):
        raise ValueError(f"h_diag must have length {layout.n_modes}")
    arr = np.arange(layout.dim)
    energy = np.zeros(layout.dim)
    for mode, value in enumerate(h_diag):
        if value != 0.0:
            energy = energy + value * ((arr >> mode) & 1)
    return _apply_diagonal(state, np.exp(-1j * tau * energy))


def apply_diagonal_two_body(
    state: FockState | FockDensity, vtilde: np.ndarray, tau: float
) -> FockState | FockDensity:
    """Evolve by the mode-diagonal two-body interaction.

    The phase of basis state ``n`` is ``exp(-i tau E(n))`` with

        E(n) = 1/2 sum_{(a,s) != (b,t)} vtilde[a, b] n_{a,s} n_{b,t},

    spin labels ranging over one (spinless) or two (spinful) values.  With
    ``N_a`` the spin-summed occupation of orbital slot ``a`` this is

        E(n) = sum_{a<b} vs[a, b] N_a N_b + 1/2 sum_a vs[a, a] N_a (N_a - 1)

    for the symmetrized ``vs``; diagonal entries of ``vtilde`` therefore
    drop out of the spinless phase, where ``N_a (N_a - 1) = 0``.
    """
    layout = state.layout
    m = layout.sector_size
    vtilde = np.asarray(vtilde, dtype=float)
    if vtilde.shape != (m, m):
        raise ValueError(f"vtilde must be {m} x {m} for this layout")
    vs = 0.5 * (vtilde + vtilde.T)
    occ = _orbital_occupations(layout).astype(float)
    energy = np.zeros(layout.dim)
    for a in range(m):
        for b in range(a + 1, m):
            if vs[a, b] != 0.0:
                energy += vs[a, b] * occ[a] * occ[b]
        energy += 0.5 * vs[a, a] * occ[a] * (occ[a] - 1.0)
    return _apply_diagonal(state, np.exp(-1j * tau * energy))


def phase_on_ancillas(
    state: FockState | FockDensity, phi: float
) -> FockState | FockDensity:
    """Apply ``exp(+i phi N_b)`` where ``N_b`` counts occupied ancillas."""
    layout = state.layout
    arr = np.arange(layout.dim)
    count = np.zeros(layout.dim, dtype=np.int64)
    for mode in layout.ancilla_modes:
        count += (arr >> mode) & 1
    return _apply_diagonal(state, np.exp(1j * phi * count))


def _split_keys(layout: ModeLayout) -> tuple[np.ndarray, np.ndarray]:
    arr = np.arange(layout.dim)
    a_key = np.zeros(layout.dim, dtype=np.int64)
    b_key = np.zeros(layout.dim, dtype=np.int64)
    for t, pos in enumerate(layout.system_modes):
        a_key |= ((arr >> pos) & 1) << t
    for t, pos in enumerate(layout.ancilla_modes):
        b_key |= ((arr >> pos) & 1) << t
    return a_key, b_key


def reset_ancillas(rho: FockDensity, parity_check: bool = True) -> FockDensity:
    """Trace out the ancilla modes and re-prepare them in the vacuum.

    The trace is taken in the occupation basis.  That coincides with the
    fermionic reset channel when the state carries no coherences between
    system strings of different particle-number parity alongside occupied
    ancillas; the evolution circuits conserve total particle number, so
    number-sector inputs never produce such terms.  ``parity_check``
    controls a diagnostic warning for states that violate the assumption.
    """
    layout = rho.layout
    if layout.n_ancilla == 0:
        return FockDensity(layout, rho.matrix.copy())
    n_a = len(layout.system_modes)
    n_b = len(layout.ancilla_modes)
    a_key, b_key = _split_keys(layout)
    order = np.argsort((b_key << n_a) | a_key)
    reordered = rho.matrix[np.ix_(order, order)].reshape(
        1 << n_b, 1 << n_a, 1 << n_b, 1 << n_a
    )
    if parity_check:
        a_parity = np.array([bin(x).count("1") % 2 for x in range(1 << n_a)])
        mismatch = a_parity[:, None] != a_parity[None, :]
        weight = sum(
            float(np.abs(reordered[b, :, b, :][mismatch]).sum())
            for b in range(1, 1 << n_b)
        )
        if weight > 1e-9:
            warnings.warn(
                "resetting ancillas on a state with parity-mixing coherences "
                f"(weight {weight:.3e}); occupation-basis trace may not match "
                "the fermionic channel",
                stacklevel=2,
            )
    traced = np.einsum("bibj->ij", reordered)
    out = np.zeros((layout.dim, layout.dim), dtype=complex)
    vacuum_order = order[: 1 << n_a]
    out[np.ix_(vacuum_order, vacuum_order)] = traced
    return FockDensity(layout, out)


# ---------------------------------------------------------------------------
# Distances and exact references
# ---------------------------------------------------------------------------

def trace_distance(
    rho: FockDensity | FockState, sigma: FockDensity | FockState
) -> float:
    """Trace distance ``1/2 || rho - sigma ||_1`` between two states."""
    if isinstance(rho, FockState):
        rho = rho.density()
    if isinstance(sigma, FockState):
        sigma = sigma.density()
    if rho.matrix.shape != sigma.matrix.shape:
        raise ValueError("states live on different register sizes")
    diff = rho.matrix - sigma.matrix
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def exact_evolution(
    op: ManyBodyOperator, state: FockState | FockDensity, t: float
) -> FockState | FockDensity:
    """Evolve a state by ``exp(-i op t)`` via the cached eigensystem."""
    layout = state.layout
    if op.n_modes != layout.n_modes:
        raise ValueError(
            f"operator on {op.n_modes} modes cannot evolve a {layout.n_modes}-mode state"
        )
    w, v = op.eigensystem()
    phases = np.exp(-1j * w * t)
    if isinstance(state, FockState):
        return FockState(layout, v @ (phases * (v.conj().T @ state.amplitudes)))
    u = (v * phases) @ v.conj().T
    return FockDensity(layout, u @ state.matrix @ u.conj().T)
