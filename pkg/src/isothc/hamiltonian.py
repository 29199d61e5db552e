"""Electronic-structure Hamiltonians and their many-body matrix representations.

Conventions used throughout the package:

* Two-electron integrals are stored in chemists' notation, ``eri[i, j, k, l]
  = (ij|kl)``, with the full eight-fold permutation symmetry of real
  orbitals.
* The second-quantized Hamiltonian is

      H = sum_ij h[i, j] a+_i a_j
        + 1/2 sum_ijkl eri[i, j, k, l] a+_i a+_k a_l a_j
        + core_energy,

  summed over spin as well when a spinful representation is requested.
* Fermionic modes map to qubits by the Jordan-Wigner convention with mode 0
  as the least significant bit of the basis-state index.  Spinful
  representations place all up-spin modes at 0 .. n-1 and all down-spin
  modes at n .. 2n-1.
"""

from __future__ import annotations

import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ElectronicHamiltonian",
    "ManyBodyOperator",
    "NormSummary",
    "parse_fcidump",
    "write_fcidump",
    "rotate_to_h_eigenbasis",
    "build_many_body_operator",
    "ground_state_energy",
    "norm_summary",
]

SYMMETRY_TOL = 1e-10
DEFAULT_MODE_CAP = 16


def _read_only(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ElectronicHamiltonian:
    """One- and two-body coefficient tensors of a molecular Hamiltonian.

    Instances are immutable; the arrays are defensively copied and marked
    read-only on construction.  ``n_electrons`` and ``ms2`` are optional
    metadata carried along from an FCIDUMP header.
    """

    n_orbitals: int
    core_energy: float
    h: np.ndarray
    eri: np.ndarray
    n_electrons: int | None = None
    ms2: int | None = None

    def __post_init__(self) -> None:
        n = self.n_orbitals
        h = _read_only(self.h)
        eri = _read_only(self.eri)
        if h.shape != (n, n):
            raise ValueError(f"h has shape {h.shape}, expected {(n, n)}")
        if eri.shape != (n, n, n, n):
            raise ValueError(f"eri has shape {eri.shape}, expected {(n,) * 4}")
        if not np.allclose(h, h.T, atol=SYMMETRY_TOL, rtol=0.0):
            raise ValueError("h is not symmetric")
        for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)]:
            if not np.allclose(eri, eri.transpose(perm), atol=SYMMETRY_TOL, rtol=0.0):
                raise ValueError(f"eri violates permutation symmetry {perm}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "eri", eri)

    def to_json(self) -> str:
        """Serialize to the package's JSON interchange format.

        The two-body tensor is stored as the list of entries that are unique
        under the eight-fold symmetry, zero-indexed.
        """
        n = self.n_orbitals
        seen: set[tuple[int, int, int, int]] = set()
        entries = []
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        key = _canonical_eri_index(i, j, k, l)
                        if key in seen:
                            continue
                        seen.add(key)
                        value = float(self.eri[i, j, k, l])
                        if value != 0.0:
                            entries.append([i, j, k, l, value])
        doc = {
            "n_orbitals": n,
            "core_energy": self.core_energy,
            "h": self.h.reshape(-1).tolist(),
            "eri": entries,
            "n_electrons": self.n_electrons,
            "ms2": self.ms2,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ElectronicHamiltonian":
        doc = json.loads(text)
        n = int(doc["n_orbitals"])
        h = np.array(doc["h"], dtype=float).reshape(n, n)
        eri = np.zeros((n, n, n, n))
        for i, j, k, l, value in doc["eri"]:
            for p in _eri_images(int(i), int(j), int(k), int(l)):
                eri[p] = value
        return cls(
            n_orbitals=n,
            core_energy=float(doc["core_energy"]),
            h=h,
            eri=eri,
            n_electrons=doc.get("n_electrons"),
            ms2=doc.get("ms2"),
        )


def _canonical_eri_index(i: int, j: int, k: int, l: int) -> tuple[int, int, int, int]:
    ij = (i, j) if i >= j else (j, i)
    kl = (k, l) if k >= l else (l, k)
    return ij + kl if ij >= kl else kl + ij


def _eri_images(i: int, j: int, k: int, l: int):
    return {
        (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
    }


# ---------------------------------------------------------------------------
# FCIDUMP parsing and writing
# ---------------------------------------------------------------------------

_HEADER_KV = re.compile(r"([A-Za-z0-9_]+)\s*=\s*([^=]*?)(?=(?:,?\s*[A-Za-z0-9_]+\s*=)|$)")


class FcidumpError(ValueError):
    """Raised for malformed FCIDUMP content."""


def parse_fcidump(path_or_text: str | Path | io.TextIOBase) -> ElectronicHamiltonian:
    """Parse an FCIDUMP file into an :class:`ElectronicHamiltonian`.

    Accepts a filesystem path, raw FCIDUMP text, or an open text stream.
    The header namelist is read case-insensitively; ``NORB``, ``NELEC`` and
    ``MS2`` are honored and other keys (``ORBSYM``, ``ISYM``, ...) are
    tolerated and ignored.  Value lines follow the usual layout
    ``value i j k l`` with one-based orbital indices:

    * all four indices zero: core energy,
    * ``k = l = 0``: one-body element ``h[i, j]``,
    * otherwise: two-electron integral ``(ij|kl)`` in chemists' notation,
      expanded to all eight permutation images.

    Duplicate entries that disagree by more than 1e-10 raise
    :class:`FcidumpError` naming the offending line.
    """
    if isinstance(path_or_text, io.TextIOBase):
        text = path_or_text.read()
    else:
        as_path = Path(path_or_text)
        try:
            is_file = as_path.is_file()
        except OSError:
            is_file = False
        if is_file:
            text = as_path.read_text()
        elif isinstance(path_or_text, str) and "&FCI" in path_or_text.upper():
            text = path_or_text
        else:
            raise FcidumpError(f"no such FCIDUMP file: {path_or_text!r}")

    upper = text.upper()
    start = upper.find("&FCI")
    if start < 0:
        raise FcidumpError("missing &FCI header")
    end_match = re.search(r"&END|/", upper[start:])
    if end_match is None:
        raise FcidumpError("unterminated &FCI header")
    header = text[start + 4 : start + end_match.start()]
    body = text[start + end_match.end() :]

    keys: dict[str, str] = {}
    for m in _HEADER_KV.finditer(header):
        keys[m.group(1).upper()] = m.group(2).strip().rstrip(",")
    if "NORB" not in keys:
        raise FcidumpError("header does not define NORB")
    n = int(keys["NORB"].split(",")[0])
    if n < 1:
        raise FcidumpError(f"NORB = {n} out of range")
    n_electrons = int(keys["NELEC"].split(",")[0]) if "NELEC" in keys else None
    ms2 = int(keys["MS2"].split(",")[0]) if "MS2" in keys else None

    h = np.zeros((n, n))
    eri = np.zeros((n, n, n, n))
    core = 0.0
    h_seen: dict[tuple[int, int], float] = {}
    eri_seen: dict[tuple[int, int, int, int], float] = {}

    for lineno, raw in enumerate(body.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise FcidumpError(f"line {lineno}: expected 'value i j k l', got {raw!r}")
        try:
            value = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(p) for p in parts[1:])
        except ValueError as exc:
            raise FcidumpError(f"line {lineno}: {exc}") from exc
        for idx in (i, j, k, l):
            if idx < 0 or idx > n:
                raise FcidumpError(f"line {lineno}: index {idx} out of range [0, {n}]")
        if i == j == k == l == 0:
            core = value
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise FcidumpError(f"line {lineno}: malformed one-body indices")
            key = (max(i, j) - 1, min(i, j) - 1)
            if key in h_seen and abs(h_seen[key] - value) > 1e-10:
                raise FcidumpError(f"line {lineno}: conflicting duplicate for h{key}")
            h_seen[key] = value
            h[i - 1, j - 1] = value
            h[j - 1, i - 1] = value
        else:
            if min(i, j, k, l) == 0:
                raise FcidumpError(f"line {lineno}: malformed two-body indices")
            key = _canonical_eri_index(i - 1, j - 1, k - 1, l - 1)
            if key in eri_seen and abs(eri_seen[key] - value) > 1e-10:
                raise FcidumpError(f"line {lineno}: conflicting duplicate for eri{key}")
            eri_seen[key] = value
            for p in _eri_images(i - 1, j - 1, k - 1, l - 1):
                eri[p] = value

    return ElectronicHamiltonian(
        n_orbitals=n, core_energy=core, h=h, eri=eri,
        n_electrons=n_electrons, ms2=ms2,
    )


def write_fcidump(hamiltonian: ElectronicHamiltonian, path: str | Path | None = None,
                  tol: float = 1e-14) -> str:
    """Render an FCIDUMP document; write it to ``path`` when given."""
    H = hamiltonian
    n = H.n_orbitals
    lines = []
    nelec = H.n_electrons if H.n_electrons is not None else 0
    ms2 = H.ms2 if H.ms2 is not None else 0
    lines.append(f"&FCI NORB={n},NELEC={nelec},MS2={ms2},")
    lines.append("  ORBSYM=" + "1," * n)
    lines.append("  ISYM=1,")
    lines.append("&END")
    fmt = "{:23.16E} {:4d} {:4d} {:4d} {:4d}"
    seen: set[tuple[int, int, int, int]] = set()
    for i in range(n):
        for j in range(i + 1):
            for k in range(i + 1):
                for l in range(k + 1):
                    key = _canonical_eri_index(i, j, k, l)
                    if key in seen:
                        continue
                    seen.add(key)
                    value = H.eri[i, j, k, l]
                    if abs(value) > tol:
                        lines.append(fmt.format(value, i + 1, j + 1, k + 1, l + 1))
    for i in range(n):
        for j in range(i + 1):
            if abs(H.h[i, j]) > tol:
                lines.append(fmt.format(H.h[i, j], i + 1, j + 1, 0, 0))
    lines.append(fmt.format(H.core_energy, 0, 0, 0, 0))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# Basis rotation
# ---------------------------------------------------------------------------

def rotate_to_h_eigenbasis(
    hamiltonian: ElectronicHamiltonian,
) -> tuple[ElectronicHamiltonian, np.ndarray]:
    """Rotate the orbital basis so that the one-body matrix is diagonal.

    Returns the rotated Hamiltonian and the orthogonal basis matrix ``b``
    (columns are eigenvectors of ``h`` in ascending eigenvalue order, signs
    fixed so the largest-magnitude component of each column is positive).
    New tensors are ``h' = b.T @ h @ b`` and the correspondingly transformed
    two-body tensor; the spectrum is unchanged.
    """
    H = hamiltonian
    _, basis = np.linalg.eigh(H.h)
    for col in range(basis.shape[1]):
        pivot = np.argmax(np.abs(basis[:, col]))
        if basis[pivot, col] < 0:
            basis[:, col] *= -1.0
    h_rot = basis.T @ H.h @ basis
    h_rot = 0.5 * (h_rot + h_rot.T)
    np.fill_diagonal(h_rot, np.diag(h_rot))
    eri_rot = np.einsum(
        "pi,qj,rk,sl,pqrs->ijkl", basis, basis, basis, basis, H.eri, optimize=True
    )
    # enforce the exact eight-fold symmetry lost to floating-point noise
    eri_rot = 0.125 * (
        eri_rot
        + eri_rot.transpose(1, 0, 2, 3)
        + eri_rot.transpose(0, 1, 3, 2)
        + eri_rot.transpose(1, 0, 3, 2)
        + eri_rot.transpose(2, 3, 0, 1)
        + eri_rot.transpose(3, 2, 0, 1)
        + eri_rot.transpose(2, 3, 1, 0)
        + eri_rot.transpose(3, 2, 1, 0)
    )
    rotated = ElectronicHamiltonian(
        n_orbitals=H.n_orbitals,
        core_energy=H.core_energy,
        h=h_rot,
        eri=eri_rot,
        n_electrons=H.n_electrons,
        ms2=H.ms2,
    )
    return rotated, basis


# ---------------------------------------------------------------------------
# Many-body matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManyBodyOperator:
    """A Hermitian operator on the full Fock space of ``n_modes`` modes."""

    n_modes: int
    spinful: bool
    matrix: np.ndarray
    _eig: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        dim = 2 ** self.n_modes
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"matrix shape {self.matrix.shape} != {(dim, dim)}")

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and eigenvectors, computed once and cached."""
        if "w" not in self._eig:
            w, v = np.linalg.eigh(self.matrix)
            self._eig["w"] = w
            self._eig["v"] = v
        return self._eig["w"], self._eig["v"]

    def norm(self) -> float:
        """Spectral norm."""
        w, _ = self.eigensystem()
        return float(np.max(np.abs(w)))


def _annihilation_operators(n_modes: int) -> list[sp.csr_matrix]:
    """Jordan-Wigner annihilation matrices, mode 0 = least significant bit."""
    lower = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    pauli_z = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
    identity2 = sp.identity(2, format="csr")
    ops = []
    for mode in range(n_modes):
        op = sp.identity(1, format="csr")
        for k in range(n_modes):
            if k < mode:
                factor = pauli_z
            elif k == mode:
                factor = lower
            else:
                factor = identity2
            # mode k occupies bit k, so it is the k-th factor from the right
            op = sp.kron(factor, op, format="csr")
        ops.append(op)
    return ops


def build_many_body_operator(
    hamiltonian: ElectronicHamiltonian,
    spinful: bool = False,
    max_modes: int = DEFAULT_MODE_CAP,
) -> ManyBodyOperator:
    """Build the dense Fock-space matrix of the Hamiltonian.

    For the spinful case every orbital carries two modes, up spins at
    0 .. n-1 and down spins at n .. 2n-1, and both ``h`` and ``eri`` are
    summed over spin labels.  Raises for more than ``max_modes`` modes;
    dense matrices grow as 4**modes and the cap mostly protects against
    accidental large inputs.
    """
    H = hamiltonian
    n = H.n_orbitals
    n_modes = 2 * n if spinful else n
    if n_modes > max_modes:
        raise ValueError(f"{n_modes} modes exceeds the cap of {max_modes}")
    dim = 2 ** n_modes
    ann = _annihilation_operators(n_modes)
    excitation = {}
    if spinful:
        orbital_modes = [(i, i + n) for i in range(n)]
    else:
        orbital_modes = [(i,) for i in range(n)]
    for p in range(n_modes):
        for q in range(n_modes):
            excitation[p, q] = (ann[p].conj().T @ ann[q]).tocsr()

    total = sp.csr_matrix((dim, dim), dtype=float)
    for i in range(n):
        for j in range(n):
            if H.h[i, j] == 0.0:
                continue
            for si, sj in zip(orbital_modes[i], orbital_modes[j]):
                total = total + H.h[i, j] * excitation[si, sj]

    # 1/2 V_ijkl a+_i a+_k a_l a_j  ==  1/2 V_ijkl (E_ij E_kl - delta_jk E_il)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    v = H.eri[i, j, k, l]
                    if v == 0.0:
                        continue
                    for mi, mj in zip(orbital_modes[i], orbital_modes[j]):
                        for mk, ml in zip(orbital_modes[k], orbital_modes[l]):
                            term = excitation[mi, mj] @ excitation[mk, ml]
                            if mj == mk:
                                term = term - excitation[mi, ml]
                            total = total + 0.5 * v * term

    matrix = total.toarray().astype(complex)
    matrix += H.core_energy * np.eye(dim)
    return ManyBodyOperator(n_modes=n_modes, spinful=spinful, matrix=matrix)


def ground_state_energy(
    hamiltonian: ElectronicHamiltonian,
    n_electrons: int | None = None,
    spinful: bool = False,
    max_modes: int = DEFAULT_MODE_CAP,
) -> float:
    """Lowest eigenvalue in the fixed particle-number sector.

    ``n_electrons`` defaults to the Hamiltonian's metadata; the sector is
    selected by occupation-number Hamming weight.
    """
    if n_electrons is None:
        n_electrons = hamiltonian.n_electrons
    if n_electrons is None:
        raise ValueError("n_electrons not given and not present as metadata")
    op = build_many_body_operator(hamiltonian, spinful=spinful, max_modes=max_modes)
    if not 0 <= n_electrons <= op.n_modes:
        raise ValueError(f"cannot place {n_electrons} electrons in {op.n_modes} modes")
    occupations = np.arange(2 ** op.n_modes)
    weights = np.array([bin(x).count("1") for x in occupations])
    sector = np.where(weights == n_electrons)[0]
    block = op.matrix[np.ix_(sector, sector)]
    return float(np.linalg.eigvalsh(block)[0])


# ---------------------------------------------------------------------------
# Norm summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormSummary:
    """Element-wise l1 norms and optional exact operator norms."""

    l1_h: float
    l1_v: float
    l1_vtilde: float | None = None
    opnorm_h: float | None = None
    opnorm_v: float | None = None


def norm_summary(
    hamiltonian: ElectronicHamiltonian,
    vtilde: np.ndarray | None = None,
    include_operator_norms: bool = False,
    spinful: bool = False,
    max_modes: int = DEFAULT_MODE_CAP,
) -> NormSummary:
    """Summarize the norms that control gate counts and error bounds.

    ``l1_*`` are plain element-wise sums of absolute tensor entries.  When
    ``include_operator_norms`` is set the exact spectral norms of the one-
    and two-body parts (core energy excluded) are computed from their dense
    matrices, which is only feasible for small mode counts.
    """
    H = hamiltonian
    l1_h = float(np.abs(H.h).sum())
    l1_v = float(np.abs(H.eri).sum())
    l1_vtilde = float(np.abs(vtilde).sum()) if vtilde is not None else None
    opnorm_h = opnorm_v = None
    if include_operator_norms:
        zero_h = ElectronicHamiltonian(
            n_orbitals=H.n_orbitals, core_energy=0.0, h=H.h,
            eri=np.zeros_like(H.eri),
        )
        zero_v = ElectronicHamiltonian(
            n_orbitals=H.n_orbitals, core_energy=0.0, h=np.zeros_like(H.h),
            eri=H.eri,
        )
        opnorm_h = build_many_body_operator(zero_h, spinful, max_modes).norm()
        opnorm_v = build_many_body_operator(zero_v, spinful, max_modes).norm()
    return NormSummary(
        l1_h=l1_h, l1_v=l1_v, l1_vtilde=l1_vtilde,
        opnorm_h=opnorm_h, opnorm_v=opnorm_v,
    )
