"""Qubit Hamiltonians as weighted sums of Pauli strings.

This module provides the Pauli-sum representation (construction, JSON
ingestion, duplicate merging), dense Hermitian materialization with a cached
eigendecomposition, spectral shifting, and condition numbers.  It also houses
the two value types shared across the toolkit: :class:`HermitianOperator` and
:class:`StateVector`.

Conventions
-----------
* Qubit 0 is the least-significant bit of the computational-basis index;
  ``|down> = bit 0`` and ``|up> = bit 1``.  A product state written
  ``(s_0, s_1, ..., s_{n-1})`` therefore maps to the basis index
  ``sum_q bit(s_q) * 2**q``.
* Coefficients are real energies; the resulting operator is Hermitian by
  construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import DomainError, ResourceLimitError, ValidationError

__all__ = [
    "PauliAxis",
    "PauliTerm",
    "PauliSum",
    "HermitianOperator",
    "StateVector",
    "build_h2",
    "load_pauli_sum",
    "save_pauli_sum",
    "to_dense",
    "shift",
    "condition_number",
    "terms_commute",
    "H2_MEAN_COUPLING",
    "DEFAULT_QUBIT_CAP",
]

PauliAxis = Literal["X", "Y", "Z"]

_AXES: tuple[PauliAxis, ...] = ("X", "Y", "Z")

_PAULI_MATRICES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128),
}

#: Largest qubit count materialized densely by default (dim 2**14 = 16384).
DEFAULT_QUBIT_CAP = 14

#: Average coupling constant of the built-in H2 Hamiltonian, in units of J.
#: Quoted operating-scale constant used only to report dephasing-rate ratios
#: gamma/coupling; it is not derived from the coefficients.
H2_MEAN_COUPLING = 0.1224


@dataclass(frozen=True)
class PauliTerm:
    """One weighted Pauli string: ``coeff * prod_q sigma_axis(q)``.

    An empty ``factors`` tuple denotes the identity term.  Factors are stored
    sorted by qubit index, so equal terms compare equal.
    """

    coeff: float
    factors: tuple[tuple[int, PauliAxis], ...] = ()

    def __post_init__(self) -> None:
        if not math.isfinite(self.coeff):
            raise ValidationError(f"Pauli coefficient must be finite, got {self.coeff!r}")
        canonical = tuple(sorted((int(q), axis) for q, axis in self.factors))
        qubits = [q for q, _ in canonical]
        if len(set(qubits)) != len(qubits):
            raise ValidationError(f"duplicate qubit index in Pauli term factors {canonical!r}")
        for q, axis in canonical:
            if q < 0:
                raise ValidationError(f"negative qubit index {q} in Pauli term")
            if axis not in _AXES:
                raise ValidationError(f"unknown Pauli axis {axis!r}; expected one of {_AXES}")
        object.__setattr__(self, "factors", canonical)
        object.__setattr__(self, "coeff", float(self.coeff))

    @property
    def is_identity(self) -> bool:
        return not self.factors

    def max_qubit(self) -> int:
        """Largest qubit index touched, or -1 for the identity term."""
        return self.factors[-1][0] if self.factors else -1


def terms_commute(a: PauliTerm, b: PauliTerm) -> bool:
    """Whether two Pauli strings commute as operators.

    Two Pauli strings commute iff the number of qubits on which both act
    with *different* (non-identity) axes is even.
    """
    axes_a = dict(a.factors)
    differing = sum(
        1 for q, axis in b.factors if q in axes_a and axes_a[q] != axis
    )
    return differing % 2 == 0


def _canonical_term_order(term: PauliTerm) -> tuple:
    return (len(term.factors), term.factors)


@dataclass(frozen=True)
class PauliSum:
    """A Hermitian qubit operator: real-weighted sum of Pauli strings."""

    n_qubits: int
    terms: tuple[PauliTerm, ...]
    energy_unit: str = "J"

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValidationError(f"n_qubits must be >= 1, got {self.n_qubits}")
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if term.max_qubit() >= self.n_qubits:
                raise ValidationError(
                    f"term {term.factors!r} touches qubit {term.max_qubit()} "
                    f"but the operator has only {self.n_qubits} qubits"
                )

    @classmethod
    def from_terms(
        cls,
        n_qubits: int,
        terms: Iterable[PauliTerm],
        energy_unit: str = "J",
    ) -> "PauliSum":
        """Build a canonical Pauli sum: duplicates merged, terms sorted.

        Terms with identical factor sets are merged by coefficient addition,
        which preserves the operator.  The canonical order is (factor count,
        factor tuple), which keeps single-qubit terms ahead of longer strings.
        """
        merged: dict[tuple, float] = {}
        for term in terms:
            merged[term.factors] = merged.get(term.factors, 0.0) + term.coeff
        canonical = tuple(
            sorted(
                (PauliTerm(coeff, factors) for factors, coeff in merged.items()),
                key=_canonical_term_order,
            )
        )
        return cls(n_qubits=n_qubits, terms=canonical, energy_unit=energy_unit)


@dataclass(frozen=True)
class StateVector:
    """A normalized complex amplitude vector over a finite basis."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitudes, dtype=np.complex128)
        if amp.ndim != 1 or amp.size == 0:
            raise ValidationError("StateVector requires a nonempty 1-D amplitude array")
        norm = float(np.linalg.norm(amp))
        if abs(norm - 1.0) > 1e-8:
            raise ValidationError(f"StateVector amplitudes have norm {norm:.3e}, expected 1")
        # Renormalize the residual rounding so the unit-norm invariant is tight.
        amp = amp / norm
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def from_amplitudes(cls, raw: Sequence[complex] | np.ndarray) -> "StateVector":
        """Normalize an arbitrary nonzero vector into a StateVector."""
        vec = np.asarray(raw, dtype=np.complex128)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise DomainError("cannot normalize the zero vector into a state")
        return cls(vec / norm)

    @classmethod
    def basis_state(cls, dim: int, index: int) -> "StateVector":
        """The computational-basis state ``|index>`` in a dim-sized space."""
        if not 0 <= index < dim:
            raise DomainError(f"basis index {index} outside [0, {dim})")
        vec = np.zeros(dim, dtype=np.complex128)
        vec[index] = 1.0
        return cls(vec)

    def overlap_with(self, other: "StateVector") -> complex:
        """The inner product <self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix with a cached eigendecomposition.

    The spectral shift is stored symbolically: ``matrix`` and ``eigenvalues``
    add ``shift_applied`` on access, so composing two shifts is exactly
    equivalent to one shift by their sum and the eigenvectors are shared
    between all shifted variants.
    """

    base_matrix: np.ndarray = field(repr=False)
    base_eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    shift_applied: float = 0.0

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "HermitianOperator":
        """Validate Hermiticity, diagonalize, and wrap a dense matrix."""
        m = np.asarray(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {m.shape}")
        scale = float(np.linalg.norm(m))
        defect = float(np.linalg.norm(m - m.conj().T))
        if defect > 1e-12 * max(scale, 1.0):
            raise ValidationError(
                f"matrix is not Hermitian: ||M - M^dag|| = {defect:.3e} "
                f"exceeds 1e-12 * ||M|| = {1e-12 * max(scale, 1.0):.3e}"
            )
        eigenvalues, eigenvectors = np.linalg.eigh(m)
        recon = (eigenvectors * eigenvalues) @ eigenvectors.conj().T
        recon_err = float(np.linalg.norm(recon - m))
        if recon_err > 1e-10 * max(scale, 1.0):
            raise ValidationError(
                f"eigendecomposition failed to reconstruct the matrix "
                f"(error {recon_err:.3e})"
            )
        for arr in (m, eigenvalues, eigenvectors):
            arr.setflags(write=False)
        return cls(
            base_matrix=m,
            base_eigenvalues=eigenvalues,
            eigenvectors=eigenvectors,
            shift_applied=0.0,
        )

    @property
    def dim(self) -> int:
        return self.base_matrix.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        if self.shift_applied == 0.0:
            return self.base_matrix
        return self.base_matrix + self.shift_applied * np.eye(self.dim)

    @property
    def eigenvalues(self) -> np.ndarray:
        if self.shift_applied == 0.0:
            return self.base_eigenvalues
        return self.base_eigenvalues + self.shift_applied

    def shift(self, e0: float) -> "HermitianOperator":
        """Return the operator plus ``e0`` times the identity."""
        return HermitianOperator(
            base_matrix=self.base_matrix,
            base_eigenvalues=self.base_eigenvalues,
            eigenvectors=self.eigenvectors,
            shift_applied=self.shift_applied + float(e0),
        )

    def to_eigenbasis(self, vec: np.ndarray) -> np.ndarray:
        """Amplitudes of ``vec`` over the eigenvector basis."""
        return self.eigenvectors.conj().T @ np.asarray(vec, dtype=np.complex128)

    def from_eigenbasis(self, vec: np.ndarray) -> np.ndarray:
        """Map eigenbasis amplitudes back to the computational basis."""
        return self.eigenvectors @ np.asarray(vec, dtype=np.complex128)

    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    def ground_state(self) -> StateVector:
        return StateVector.from_amplitudes(self.eigenvectors[:, 0])

    def expectation(self, psi: StateVector) -> float:
        """The real expectation value <psi|M|psi>."""
        value = np.vdot(psi.amplitudes, self.matrix @ psi.amplitudes)
        return float(value.real)


# --- construction -----------------------------------------------------------

# Couplings of the built-in molecular-hydrogen Hamiltonian (units of J):
# identity offset, Z fields, ZZ couplings, and the four-body exchange strings.
_H2_XI = (
    -0.098864,  # xi0: identity
    0.171198,   # xi1: Z0, Z1
    0.222786,   # xi2: -Z2, -Z3
    0.168622,   # xi3: Z0 Z1
    0.120545,   # xi4: Z0 Z2, Z1 Z3
    0.165867,   # xi5: Z0 Z3, Z1 Z2
    0.174348,   # xi6: Z2 Z3
    0.045322,   # xi7: four-body XXYY-type strings
)


def build_h2() -> PauliSum:
    """The 4-qubit molecular-hydrogen Hamiltonian with compiled-in couplings.

    Returns the unshifted 15-term operator (identity plus ten Z-type terms
    plus four four-body exchange strings) in units of J.  Its Hartree-Fock
    product state is ``(down, down, up, up)``, i.e. basis index 0b0011 = 3.
    """
    xi = _H2_XI
    z = lambda *qs: tuple((q, "Z") for q in qs)  # noqa: E731 - local shorthand
    terms = [
        PauliTerm(xi[0], ()),
        PauliTerm(xi[1], z(0)),
        PauliTerm(xi[1], z(1)),
        PauliTerm(-xi[2], z(2)),
        PauliTerm(-xi[2], z(3)),
        PauliTerm(xi[3], z(0, 1)),
        PauliTerm(xi[4], z(0, 2)),
        PauliTerm(xi[4], z(1, 3)),
        PauliTerm(xi[5], z(0, 3)),
        PauliTerm(xi[5], z(1, 2)),
        PauliTerm(xi[6], z(2, 3)),
        PauliTerm(-xi[7], ((0, "X"), (1, "X"), (2, "Y"), (3, "Y"))),
        PauliTerm(xi[7], ((0, "X"), (1, "Y"), (2, "Y"), (3, "X"))),
        PauliTerm(xi[7], ((0, "Y"), (1, "X"), (2, "X"), (3, "Y"))),
        PauliTerm(-xi[7], ((0, "Y"), (1, "Y"), (2, "X"), (3, "X"))),
    ]
    return PauliSum.from_terms(4, terms, energy_unit="J")


def h2_hartree_fock_state() -> StateVector:
    """The Hartree-Fock product state of the built-in H2 Hamiltonian."""
    return StateVector.basis_state(16, 0b0011)


# --- JSON ingestion ---------------------------------------------------------


def _reject_constant(token: str) -> float:
    raise ValidationError(f"non-finite number {token!r} is not allowed in Pauli-sum files")


def load_pauli_sum(path: str | Path) -> PauliSum:
    """Read a Pauli sum from a JSON file.

    Expected schema::

        {"n_qubits": int, "energy_unit": str,
         "terms": [{"coeff": float, "paulis": [{"q": int, "axis": "X"|"Y"|"Z"}]}]}

    An empty ``paulis`` list is the identity term.  Terms with identical
    factor sets are merged by coefficient addition.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"), parse_constant=_reject_constant)
    except OSError as exc:
        raise ValidationError(f"cannot read Pauli-sum file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in Pauli-sum file {path}: {exc}") from exc

    if not isinstance(raw, dict):
        raise ValidationError(f"Pauli-sum file {path} must contain a JSON object")
    try:
        n_qubits = raw["n_qubits"]
        term_entries = raw["terms"]
    except KeyError as exc:
        raise ValidationError(f"Pauli-sum file {path} is missing key {exc}") from exc
    if not isinstance(n_qubits, int) or isinstance(n_qubits, bool):
        raise ValidationError(f"n_qubits must be an integer, got {n_qubits!r}")
    energy_unit = raw.get("energy_unit", "J")
    if not isinstance(energy_unit, str):
        raise ValidationError(f"energy_unit must be a string, got {energy_unit!r}")
    if not isinstance(term_entries, list):
        raise ValidationError("terms must be a list")

    terms: list[PauliTerm] = []
    for i, entry in enumerate(term_entries):
        if not isinstance(entry, dict) or "coeff" not in entry or "paulis" not in entry:
            raise ValidationError(f"term #{i} must be an object with 'coeff' and 'paulis'")
        coeff = entry["coeff"]
        if isinstance(coeff, bool) or not isinstance(coeff, (int, float)):
            raise ValidationError(f"term #{i}: coefficient must be a real number, got {coeff!r}")
        factors: list[tuple[int, PauliAxis]] = []
        if not isinstance(entry["paulis"], list):
            raise ValidationError(f"term #{i}: 'paulis' must be a list")
        for factor in entry["paulis"]:
            if not isinstance(factor, dict) or "q" not in factor or "axis" not in factor:
                raise ValidationError(f"term #{i}: each factor needs 'q' and 'axis'")
            q = factor["q"]
            axis = factor["axis"]
            if isinstance(q, bool) or not isinstance(q, int):
                raise ValidationError(f"term #{i}: qubit index must be an integer, got {q!r}")
            if not 0 <= q < n_qubits:
                raise ValidationError(
                    f"term #{i}: qubit index {q} outside [0, {n_qubits}) for this operator"
                )
            if axis not in _AXES:
                raise ValidationError(f"term #{i}: unknown axis {axis!r}")
            factors.append((q, axis))
        terms.append(PauliTerm(float(coeff), tuple(factors)))
    return PauliSum.from_terms(n_qubits, terms, energy_unit=energy_unit)


def save_pauli_sum(path: str | Path, h: PauliSum) -> None:
    """Write a Pauli sum to JSON in the schema read by :func:`load_pauli_sum`."""
    payload = {
        "n_qubits": h.n_qubits,
        "energy_unit": h.energy_unit,
        "terms": [
            {
                "coeff": term.coeff,
                "paulis": [{"q": q, "axis": axis} for q, axis in term.factors],
            }
            for term in h.terms
        ],
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8"
    )


# --- dense materialization --------------------------------------------------


def term_matrix(term: PauliTerm, n_qubits: int) -> np.ndarray:
    """Dense matrix of a single weighted Pauli string on ``n_qubits`` qubits."""
    axes = dict(term.factors)
    out = np.ones((1, 1), dtype=np.complex128)
    for q in range(n_qubits - 1, -1, -1):
        out = np.kron(out, _PAULI_MATRICES[axes.get(q, "I")])
    return term.coeff * out


def to_dense(h: PauliSum, qubit_cap: int = DEFAULT_QUBIT_CAP) -> HermitianOperator:
    """Materialize a Pauli sum as a dense operator with cached spectrum."""
    if h.n_qubits > qubit_cap:
        raise ResourceLimitError(
            f"refusing to materialize {h.n_qubits} qubits densely "
            f"(cap is {qubit_cap}; dimension would be 2**{h.n_qubits})"
        )
    dim = 2**h.n_qubits
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    for term in h.terms:
        matrix += term_matrix(term, h.n_qubits)
    return HermitianOperator.from_matrix(matrix)


def shift(op: HermitianOperator, e0: float) -> HermitianOperator:
    """Return ``op + e0 * identity`` (eigenvectors unchanged)."""
    return op.shift(e0)


def condition_number(op: HermitianOperator) -> float:
    """Ratio of largest to smallest eigenvalue of a positive-definite operator."""
    eigs = op.eigenvalues
    lam_min = float(eigs[0])
    lam_max = float(eigs[-1])
    if lam_min <= 0.0:
        raise DomainError(
            f"condition number requires a strictly positive spectrum "
            f"(min eigenvalue is {lam_min:.6g}); shift the operator first"
        )
    return lam_max / lam_min
