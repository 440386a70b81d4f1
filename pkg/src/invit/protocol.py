"""Reference-state overlap measurement protocol.

Recovers the complex overlap ``<psi0| e^{-i H t} |psi0>`` from three state
populations, using a known eigenstate of the Hamiltonian as a phase
reference.  The same three-population algebra extends to cross overlaps
``<psi_a| e^{-i H t} |psi_b>`` between two states that are both orthogonal
to the reference; that generalization is what lets the energy numerator of
the estimator be assembled from measurable quantities.

Conventions: evolution is ``e^{-i H t}`` and inner products conjugate the
bra, so with ``a = 2 p_plus - (p0 + 1)/2`` and ``b = 2 p_i - (p0 + 1)/2``::

    a = Re(O e^{i lambda_R t}),   b = Im(O e^{i lambda_R t})
    Re O = a cos(lambda_R t) + b sin(lambda_R t)
    Im O = b cos(lambda_R t) - a sin(lambda_R t)

The indirect route instead reads ``|Re O| = sqrt(p0 - Im(O)^2)`` and signs
it from the direct estimate; the two agree exactly without noise but
respond differently to decoherence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, ValidationError
from .pauli import HermitianOperator, StateVector
from .propagate import EvolutionBackend, ExactBackend

__all__ = [
    "ProbeSet",
    "ProtocolProbabilities",
    "build_probes",
    "protocol_probabilities",
    "cross_probabilities",
    "infer_direct",
    "infer_indirect",
    "sample_shots",
    "split_image_state",
]

#: Residual tolerance for the reference-eigenstate and orthogonality checks.
_REFERENCE_TOL = 1e-10


@dataclass(frozen=True)
class ProbeSet:
    """Initial state, reference eigenstate, and the two superposition probes.

    ``psi_plus = (psi_r + psi0)/sqrt(2)`` and ``psi_i = (psi_r + i psi0)/sqrt(2)``;
    the reference satisfies ``H psi_r = lambda_r psi_r`` and ``<psi_r|psi0> = 0``.
    """

    psi0: StateVector
    psi_r: StateVector
    lambda_r: float
    psi_plus: StateVector
    psi_i: StateVector


@dataclass(frozen=True)
class ProtocolProbabilities:
    """The three measured populations at one evolution phase ``t``.

    ``p0 = |<psi0|psi0(t)>|^2``, ``pp = |<psi_plus|psi_plus(t)>|^2``,
    ``pi = |<psi_i|psi_plus(t)>|^2``.  Standard errors are zero for exact
    evaluation and populated by finite-shot or trajectory-averaged modes.
    """

    p0: float
    pp: float
    pi: float
    t: float
    p0_err: float = 0.0
    pp_err: float = 0.0
    pi_err: float = 0.0


def _superpose(a: StateVector, b: StateVector, factor: complex) -> StateVector:
    amps = (a.amplitudes + factor * b.amplitudes) / math.sqrt(2.0)
    return StateVector.from_amplitudes(amps)


def build_probes(
    op: HermitianOperator, psi0: StateVector, psi_r: StateVector
) -> ProbeSet:
    """Validate the reference and assemble the two superposition probes.

    The reference must be an eigenstate of ``op`` (so its evolution is a pure
    phase) and orthogonal to ``psi0`` (so the cross terms in the probe
    populations vanish identically).
    """
    if psi0.dim != op.dim or psi_r.dim != op.dim:
        raise ValidationError(
            f"probe state dimensions ({psi0.dim}, {psi_r.dim}) do not match "
            f"operator dimension {op.dim}"
        )
    lambda_r = float(np.real(op.expectation(psi_r)))
    residual = op.matrix @ psi_r.amplitudes - lambda_r * psi_r.amplitudes
    scale = max(float(np.max(np.abs(op.eigenvalues))), 1.0)
    if float(np.linalg.norm(residual)) > _REFERENCE_TOL * scale:
        raise ValidationError(
            "reference state is not an eigenstate of the operator "
            f"(residual {float(np.linalg.norm(residual)):.3e} at scale {scale:.3e})"
        )
    overlap = psi_r.overlap_with(psi0)
    if abs(overlap) > _REFERENCE_TOL:
        raise ValidationError(
            f"reference state is not orthogonal to the initial state "
            f"(|<psi_r|psi0>| = {abs(overlap):.3e})"
        )
    return ProbeSet(
        psi0=psi0,
        psi_r=psi_r,
        lambda_r=lambda_r,
        psi_plus=_superpose(psi_r, psi0, 1.0),
        psi_i=_superpose(psi_r, psi0, 1.0j),
    )


def protocol_probabilities(
    probes: ProbeSet,
    op: HermitianOperator,
    t: float,
    backend: EvolutionBackend | None = None,
) -> ProtocolProbabilities:
    """Evolve the initial state and the plus probe; project on the three bras."""
    if not math.isfinite(t):
        raise DomainError(f"evolution phase must be finite, got {t}")
    if backend is None:
        backend = ExactBackend(op)
    if backend.operator is not op:
        raise ValidationError("backend was built for a different operator instance")
    psi0_t = backend.evolve_raw(t, probes.psi0.amplitudes)
    plus_t = backend.evolve_raw(t, probes.psi_plus.amplitudes)
    p0 = float(np.abs(np.vdot(probes.psi0.amplitudes, psi0_t)) ** 2)
    pp = float(np.abs(np.vdot(probes.psi_plus.amplitudes, plus_t)) ** 2)
    pi = float(np.abs(np.vdot(probes.psi_i.amplitudes, plus_t)) ** 2)
    return ProtocolProbabilities(p0=p0, pp=pp, pi=pi, t=float(t))


def cross_probabilities(
    probes: ProbeSet,
    psi_ket: StateVector,
    op: HermitianOperator,
    t: float,
    backend: EvolutionBackend | None = None,
) -> ProtocolProbabilities:
    """Populations whose inversion yields ``<psi0| e^{-iHt} |psi_ket>``.

    The ket-side probe is ``(psi_r + psi_ket)/sqrt(2)``; the analysis bras are
    the same ``psi0``-based probes as in the self-overlap case, so the
    inference formulas apply unchanged with ``p0 -> |<psi0|U|psi_ket>|^2``.
    Requires ``<psi_r|psi_ket> = 0``.
    """
    if not math.isfinite(t):
        raise DomainError(f"evolution phase must be finite, got {t}")
    if psi_ket.dim != op.dim:
        raise ValidationError(
            f"ket dimension {psi_ket.dim} does not match operator dimension {op.dim}"
        )
    if abs(probes.psi_r.overlap_with(psi_ket)) > _REFERENCE_TOL:
        raise ValidationError(
            "cross-overlap ket is not orthogonal to the reference state"
        )
    if backend is None:
        backend = ExactBackend(op)
    if backend.operator is not op:
        raise ValidationError("backend was built for a different operator instance")
    chi_plus = _superpose(probes.psi_r, psi_ket, 1.0)
    ket_t = backend.evolve_raw(t, psi_ket.amplitudes)
    chi_t = backend.evolve_raw(t, chi_plus.amplitudes)
    p0 = float(np.abs(np.vdot(probes.psi0.amplitudes, ket_t)) ** 2)
    pp = float(np.abs(np.vdot(probes.psi_plus.amplitudes, chi_t)) ** 2)
    pi = float(np.abs(np.vdot(probes.psi_i.amplitudes, chi_t)) ** 2)
    return ProtocolProbabilities(p0=p0, pp=pp, pi=pi, t=float(t))


def infer_direct(p: ProtocolProbabilities, lambda_r: float) -> complex:
    """Invert the three populations into the complex overlap.

    With ``a = 2 pp - (p0+1)/2`` and ``b = 2 pi - (p0+1)/2`` the populations
    encode the overlap rotated by the reference phase, ``a + i b =
    O e^{i lambda_r t}``; undoing the rotation gives ``O``.
    """
    a = 2.0 * p.pp - (p.p0 + 1.0) / 2.0
    b = 2.0 * p.pi - (p.p0 + 1.0) / 2.0
    c = math.cos(lambda_r * p.t)
    s = math.sin(lambda_r * p.t)
    return complex(a * c + b * s, b * c - a * s)


def infer_indirect(
    p: ProtocolProbabilities, im_o: float, sign_hint: float
) -> float:
    """Recover ``Re O`` from the population ``p0`` and a known ``Im O``.

    ``|Re O| = sqrt(p0 - Im(O)^2)``; the sign comes from the caller (in
    practice the sign of the direct estimate).  A radicand more negative
    than three standard errors of ``p0`` is inconsistent data and triggers a
    warning; the value is clamped to zero either way.
    """
    if sign_hint not in (1, -1, 1.0, -1.0):
        raise DomainError(f"sign_hint must be +1 or -1, got {sign_hint}")
    radicand = p.p0 - im_o * im_o
    if radicand < -(3.0 * p.p0_err + 1e-12):
        warnings.warn(
            f"indirect inference radicand {radicand:.3e} is negative beyond "
            f"3 standard errors of p0; clamping to zero",
            stacklevel=2,
        )
    return float(sign_hint) * math.sqrt(max(0.0, radicand))


def sample_shots(
    p: ProtocolProbabilities, n_shots: int, rng: np.random.Generator
) -> ProtocolProbabilities:
    """Replace each population by a binomial sample mean over ``n_shots``.

    Models projective readout statistics on top of exactly computed
    populations; standard errors are the binomial estimates.
    """
    if n_shots < 1:
        raise DomainError(f"n_shots must be >= 1, got {n_shots}")
    sampled = {}
    for name in ("p0", "pp", "pi"):
        prob = min(max(getattr(p, name), 0.0), 1.0)
        est = rng.binomial(n_shots, prob) / n_shots
        sampled[name] = est
        sampled[name + "_err"] = math.sqrt(est * (1.0 - est) / n_shots)
    return replace(p, **sampled)


def split_image_state(
    op: HermitianOperator, psi0: StateVector
) -> tuple[float, float, StateVector | None]:
    """Decompose ``H psi0 = alpha psi0 + beta g`` with ``g`` orthonormal to ``psi0``.

    ``alpha`` is the (real) Rayleigh quotient and ``beta >= 0`` the norm of
    the orthogonal remainder.  Because ``psi0`` is orthogonal to any
    eigenstate reference with ``<psi_r|psi0> = 0``, so is ``g`` whenever
    ``lambda_r <> 0`` is an eigenvalue — concretely ``<psi_r|H psi0> =
    lambda_r <psi_r|psi0> = 0``.  This turns the energy overlap
    ``<psi0|U H|psi0>`` into ``alpha O + beta X`` with both coefficients
    measurable through the protocol.  Returns ``g = None`` when ``psi0`` is
    itself an eigenstate (``beta`` numerically zero).
    """
    image = op.matrix @ psi0.amplitudes
    alpha = float(np.real(np.vdot(psi0.amplitudes, image)))
    remainder = image - alpha * psi0.amplitudes
    beta = float(np.linalg.norm(remainder))
    scale = max(float(np.max(np.abs(op.eigenvalues))), 1.0)
    if beta <= 1e-12 * scale:
        return alpha, 0.0, None
    return alpha, beta, StateVector.from_amplitudes(remainder / beta)
