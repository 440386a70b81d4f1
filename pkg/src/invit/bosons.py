"""One-dimensional Bose-Hubbard chains on a truncated Fock basis.

Builds the occupation-number basis (optionally restricted to a fixed total
particle number), the Bose-Hubbard Hamiltonian with nearest-neighbour
tunneling, on-site interaction, chemical potential and a constant spectral
shift, the one-boson-per-site (Mott) product state, and the two-point
correlation operators ``a_{c+r}^dag a_c``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, sqrt
from typing import Literal

import numpy as np

from .errors import DomainError, ResourceLimitError, ValidationError
from .pauli import HermitianOperator, StateVector

__all__ = [
    "FockBasis",
    "BoseHubbardParams",
    "build_fock_basis",
    "build_bose_hubbard",
    "mott_state",
    "correlation_operator",
    "number_operator_total",
    "DEFAULT_FOCK_DIM_CAP",
]

#: Largest Fock-basis dimension enumerated by default.
DEFAULT_FOCK_DIM_CAP = 20000

BoundaryKind = Literal["open", "periodic"]


@dataclass(frozen=True)
class FockBasis:
    """Ordered occupation-number basis for bosons on a chain.

    ``states`` are lexicographically sorted occupation tuples; ``index`` maps
    each tuple back to its ordinal.
    """

    n_sites: int
    n_max_per_site: int
    total_n: int | None
    states: tuple[tuple[int, ...], ...]
    index: dict[tuple[int, ...], int]

    @property
    def dim(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class BoseHubbardParams:
    """Couplings of the Bose-Hubbard chain, all in one energy unit.

    ``J`` is the tunneling rate, ``U`` the on-site interaction, ``mu`` the
    chemical potential, and ``e0`` an overall spectral shift added as
    ``e0 * identity``.
    """

    J: float
    U: float
    mu: float = 0.0
    e0: float = 0.0
    boundary: BoundaryKind = "open"

    def __post_init__(self) -> None:
        if self.U <= 0.0:
            raise ValidationError(f"interaction U must be positive, got {self.U}")
        if self.J < 0.0:
            raise ValidationError(f"tunneling J must be nonnegative, got {self.J}")
        if self.boundary not in ("open", "periodic"):
            raise ValidationError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")


def build_fock_basis(
    n_sites: int,
    n_max: int,
    total_n: int | None = None,
    dim_cap: int = DEFAULT_FOCK_DIM_CAP,
) -> FockBasis:
    """Enumerate the occupation basis for ``n_sites`` with per-site cap ``n_max``.

    With ``total_n`` set, only states summing to that particle number are
    kept; with ``n_max >= total_n`` the dimension is the stars-and-bars count
    C(total_n + n_sites - 1, n_sites - 1).
    """
    if n_sites < 1:
        raise ValidationError(f"n_sites must be >= 1, got {n_sites}")
    if n_max < 1:
        raise ValidationError(f"n_max must be >= 1, got {n_max}")
    if total_n is not None and total_n < 0:
        raise ValidationError(f"total_n must be >= 0, got {total_n}")

    if total_n is None:
        expected = (n_max + 1) ** n_sites
    else:
        expected = comb(total_n + n_sites - 1, n_sites - 1)  # upper bound if n_max < total_n
    if expected > dim_cap:
        raise ResourceLimitError(
            f"Fock basis of up to {expected} states exceeds the cap of {dim_cap}"
        )

    occupations = itertools.product(range(n_max + 1), repeat=n_sites)
    if total_n is None:
        states = tuple(occupations)
    else:
        states = tuple(occ for occ in occupations if sum(occ) == total_n)
    # itertools.product of ascending ranges yields lexicographic order already.
    index = {occ: i for i, occ in enumerate(states)}
    return FockBasis(
        n_sites=n_sites,
        n_max_per_site=n_max,
        total_n=total_n,
        states=states,
        index=index,
    )


def _chain_bonds(n_sites: int, boundary: BoundaryKind) -> list[tuple[int, int]]:
    bonds = [(i, i + 1) for i in range(n_sites - 1)]
    if boundary == "periodic" and n_sites > 2:
        bonds.append((n_sites - 1, 0))
    return bonds


def _hop_matrix(basis: FockBasis, src: int, dst: int) -> np.ndarray:
    """Matrix of ``a_dst^dag a_src`` on the basis (hops over cap truncate to 0)."""
    dim = basis.dim
    out = np.zeros((dim, dim), dtype=np.complex128)
    for col, occ in enumerate(basis.states):
        if src == dst:
            out[col, col] = occ[src]
            continue
        if occ[src] == 0 or occ[dst] >= basis.n_max_per_site:
            continue
        target = list(occ)
        target[src] -= 1
        target[dst] += 1
        row = basis.index.get(tuple(target))
        if row is None:
            continue
        out[row, col] = sqrt(occ[src] * (occ[dst] + 1))
    return out


def build_bose_hubbard(basis: FockBasis, p: BoseHubbardParams) -> HermitianOperator:
    """Dense Bose-Hubbard Hamiltonian on the given basis.

    Implements ``-J sum_<i,j> (a_i^dag a_j + h.c.) + (U/2) sum_i n_i (n_i - 1)
    - mu sum_i n_i + e0 * I`` with nearest-neighbour bonds on the chain
    (open by default, periodic via the params flag).
    """
    if basis.dim == 0:
        raise ValidationError("cannot build a Hamiltonian on an empty basis")
    dim = basis.dim
    matrix = np.zeros((dim, dim), dtype=np.complex128)

    occ_arr = np.array(basis.states, dtype=np.int64)
    diagonal = (
        0.5 * p.U * np.sum(occ_arr * (occ_arr - 1), axis=1)
        - p.mu * np.sum(occ_arr, axis=1)
        + p.e0
    )
    np.fill_diagonal(matrix, diagonal.astype(np.complex128))

    if p.J != 0.0:
        for i, j in _chain_bonds(basis.n_sites, p.boundary):
            hop = _hop_matrix(basis, i, j)  # a_j^dag a_i
            matrix -= p.J * (hop + hop.conj().T)
    return HermitianOperator.from_matrix(matrix)


def mott_state(basis: FockBasis) -> StateVector:
    """Unit vector on the one-boson-per-site occupation ``(1, 1, ..., 1)``."""
    target = (1,) * basis.n_sites
    ordinal = basis.index.get(target)
    if ordinal is None:
        raise DomainError(
            f"the all-ones occupation {target} is not contained in this basis"
        )
    return StateVector.basis_state(basis.dim, ordinal)


def correlation_operator(basis: FockBasis, c: int, r: int) -> np.ndarray:
    """Dense matrix of the correlator ``a_{c+r}^dag a_c``.

    Non-Hermitian for ``r != 0``; for ``r = 0`` this is the number operator
    on site ``c``.
    """
    if not 0 <= c < basis.n_sites:
        raise DomainError(f"site c={c} outside the chain [0, {basis.n_sites})")
    if not 0 <= c + r < basis.n_sites:
        raise DomainError(f"site c+r={c + r} outside the chain [0, {basis.n_sites})")
    return _hop_matrix(basis, src=c, dst=c + r)


def number_operator_total(basis: FockBasis) -> np.ndarray:
    """Dense matrix of the total particle number (diagonal on the Fock basis)."""
    totals = np.array([sum(occ) for occ in basis.states], dtype=np.float64)
    return np.diag(totals.astype(np.complex128))
