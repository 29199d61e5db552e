"""Brute-force reference implementations used only by the test suite.

Everything here works directly on occupation bitstrings with explicit
Jordan-Wigner sign bookkeeping, independently of the package's
Kronecker-product operator construction, so the two routes can check each
other.  Mode 0 is the least significant bit.
"""

from __future__ import annotations

import numpy as np

from isothc.hamiltonian import ElectronicHamiltonian


def apply_annihilate(state: int, mode: int) -> tuple[int, int] | None:
    if not (state >> mode) & 1:
        return None
    sign = -1 if bin(state & ((1 << mode) - 1)).count("1") % 2 else 1
    return sign, state & ~(1 << mode)


def apply_create(state: int, mode: int) -> tuple[int, int] | None:
    if (state >> mode) & 1:
        return None
    sign = -1 if bin(state & ((1 << mode) - 1)).count("1") % 2 else 1
    return sign, state | (1 << mode)


def apply_product(state: int, ops: list[tuple[int, bool]]) -> tuple[int, int] | None:
    """Apply a product of ladder operators written left to right.

    ``ops`` is a list of (mode, is_creation); the rightmost factor acts
    first.  Returns (sign, state) or None when the product annihilates.
    """
    sign = 1
    for mode, dagger in reversed(ops):
        result = apply_create(state, mode) if dagger else apply_annihilate(state, mode)
        if result is None:
            return None
        s, state = result
        sign *= s
    return sign, state


def hamiltonian_terms(H: ElectronicHamiltonian, spinful: bool):
    """Expand the Hamiltonian into (coefficient, ladder-product) terms."""
    n = H.n_orbitals
    spins = (0, 1) if spinful else (0,)
    offset = n if spinful else 0
    terms: list[tuple[float, list[tuple[int, bool]]]] = []
    for i in range(n):
        for j in range(n):
            if H.h[i, j] == 0.0:
                continue
            for s in spins:
                terms.append(
                    (H.h[i, j], [(i + s * offset, True), (j + s * offset, False)])
                )
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    v = H.eri[i, j, k, l]
                    if v == 0.0:
                        continue
                    for s1 in spins:
                        for s2 in spins:
                            terms.append(
                                (
                                    0.5 * v,
                                    [
                                        (i + s1 * offset, True),
                                        (k + s2 * offset, True),
                                        (l + s2 * offset, False),
                                        (j + s1 * offset, False),
                                    ],
                                )
                            )
    return terms


def dense_hamiltonian(H: ElectronicHamiltonian, spinful: bool) -> np.ndarray:
    """Full 2^m x 2^m matrix assembled string by string."""
    n_modes = 2 * H.n_orbitals if spinful else H.n_orbitals
    dim = 1 << n_modes
    terms = hamiltonian_terms(H, spinful)
    mat = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        for coef, ops in terms:
            result = apply_product(col, ops)
            if result is not None:
                sign, row = result
                mat[row, col] += coef * sign
    mat += H.core_energy * np.eye(dim)
    return mat


def sector_indices(n_modes: int, n_particles: int) -> np.ndarray:
    states = np.arange(1 << n_modes)
    weights = np.array([bin(x).count("1") for x in states])
    return states[weights == n_particles]


def full_ci_ground_energy(
    H: ElectronicHamiltonian, n_electrons: int, spinful: bool
) -> float:
    mat = dense_hamiltonian(H, spinful)
    n_modes = 2 * H.n_orbitals if spinful else H.n_orbitals
    sector = sector_indices(n_modes, n_electrons)
    block = mat[np.ix_(sector, sector)]
    return float(np.linalg.eigvalsh(block)[0])


def random_hamiltonian(
    n: int, rng: np.random.Generator, scale: float = 1.0
) -> ElectronicHamiltonian:
    """Random symmetric tensors with the full eight-fold ERI symmetry."""
    a = rng.normal(size=(n, n), scale=scale)
    h = 0.5 * (a + a.T)
    t = rng.normal(size=(n, n, n, n), scale=scale)
    eri = np.zeros_like(t)
    for perm in [
        (0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2),
        (2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0),
    ]:
        eri += t.transpose(perm)
    eri /= 8.0
    return ElectronicHamiltonian(n_orbitals=n, core_energy=0.0, h=h, eri=eri)


def dense_quadratic(n_modes: int, k: np.ndarray) -> np.ndarray:
    """Dense matrix of ``sum_pq k[p, q] a+_p a_q`` built string by string."""
    dim = 1 << n_modes
    mat = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        for p in range(n_modes):
            for q in range(n_modes):
                if k[p, q] == 0.0:
                    continue
                result = apply_product(col, [(p, True), (q, False)])
                if result is not None:
                    sign, row = result
                    mat[row, col] += k[p, q] * sign
    return mat


def dense_mode_diagonal_interaction(
    n_modes: int, pair_coefficients: dict[tuple[int, int], float]
) -> np.ndarray:
    """Dense matrix of ``sum coeff[s, t] n_s n_t`` over mode pairs."""
    dim = 1 << n_modes
    diag = np.zeros(dim)
    for (s, t), coeff in pair_coefficients.items():
        for state in range(dim):
            diag[state] += coeff * ((state >> s) & 1) * ((state >> t) & 1)
    return np.diag(diag.astype(complex))


def contract_thc(u: np.ndarray, vtilde: np.ndarray) -> np.ndarray:
    """Recontract THC factors into the four-index tensor, index by index."""
    n, m = u.shape
    out = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    acc = 0.0
                    for a in range(m):
                        for b in range(m):
                            acc += u[i, a] * u[j, a] * vtilde[a, b] * u[k, b] * u[l, b]
                    out[i, j, k, l] = acc
    return out
