"""Inverse-iteration energy and observable estimation.

The ideal iteration applies exact inverse powers of the Hamiltonian in its
eigenbasis and serves as the reference curve.  The approximate estimator
consumes a phase ledger (deduplicated phase differences with pair weights)
and a pluggable overlap provider, and forms

    lambda_k = sum_q p_q Re<psi0| e^{-i dphi_q H} H |psi0>
             / sum_q p_q Re<psi0| e^{-i dphi_q H} |psi0>

— the same arithmetic whether the overlaps come from exact inner products,
from the simulated measurement protocol, or from noisy trajectory averages.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .errors import DomainError, EstimateConditionError, ValidationError
from .pauli import HermitianOperator, StateVector
from .propagate import EvolutionBackend, ExactBackend
from .protocol import (
    build_probes,
    cross_probabilities,
    protocol_probabilities,
    sample_shots,
    split_image_state,
)
from .series import PhaseLedger, apply_series

__all__ = [
    "OverlapBatch",
    "OverlapProvider",
    "ExactOverlapProvider",
    "ProtocolOverlapProvider",
    "IterationReport",
    "SpectralGapInfo",
    "ideal_iterate",
    "estimate_energy",
    "estimate_observable",
    "predicted_iterations",
    "inference_tables",
]

#: Default floor below which the estimator denominator is deemed ill-conditioned.
DENOMINATOR_FLOOR = 1e-10

#: Ground-state overlap below which iteration is flagged as unreliable.
_OVERLAP_WARN = 1e-8


@dataclass(frozen=True)
class OverlapBatch:
    """Overlap values at a batch of phase differences.

    ``state_re[i] ~ Re<psi0|e^{-i dphi_i H}|psi0>`` and ``energy_re[i] ~
    Re<psi0|e^{-i dphi_i H} H|psi0>``.  Imaginary parts and standard errors
    are filled when the provider can supply them.
    """

    state_re: np.ndarray
    energy_re: np.ndarray
    state_im: np.ndarray | None = None
    energy_im: np.ndarray | None = None
    state_err: np.ndarray | None = None
    energy_err: np.ndarray | None = None


class OverlapProvider:
    """Interface: evaluate state and energy overlaps at given phase differences."""

    #: True when values are exact inner products (enables residue diagnostics
    #: and observable estimation).
    exact: bool = False

    def evaluate(self, delta_phis: np.ndarray) -> OverlapBatch:
        raise NotImplementedError


@dataclass
class ExactOverlapProvider(OverlapProvider):
    """Overlaps from the spectral decomposition of the operator."""

    op: HermitianOperator
    psi0: StateVector
    exact: bool = field(default=True, init=False)
    _w2: np.ndarray = field(init=False, repr=False)
    _wl: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.psi0.dim != self.op.dim:
            raise ValidationError(
                f"state dimension {self.psi0.dim} != operator dimension {self.op.dim}"
            )
        u = self.op.to_eigenbasis(self.psi0.amplitudes)
        self._w2 = np.abs(u) ** 2
        self._wl = self._w2 * self.op.eigenvalues

    def complex_overlaps(self, delta_phis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Complex state and energy overlaps (exact, vectorized over phases)."""
        phases = np.exp(-1j * np.outer(np.asarray(delta_phis, dtype=np.float64),
                                       self.op.eigenvalues))
        return phases @ self._w2, phases @ self._wl

    def evaluate(self, delta_phis: np.ndarray) -> OverlapBatch:
        state, energy = self.complex_overlaps(delta_phis)
        return OverlapBatch(
            state_re=state.real.copy(),
            energy_re=energy.real.copy(),
            state_im=state.imag.copy(),
            energy_im=energy.imag.copy(),
        )


def inference_tables(
    p0: np.ndarray,
    pp: np.ndarray,
    pi: np.ndarray,
    t: np.ndarray,
    lambda_r: float,
    p0_err: np.ndarray | float = 0.0,
    pp_err: np.ndarray | float = 0.0,
    pi_err: np.ndarray | float = 0.0,
) -> SimpleNamespace:
    """Vectorized direct and indirect inference over arrays of populations.

    Returns real/imaginary direct estimates, the signed indirect estimate,
    and first-order error propagation for each.  The indirect sign is taken
    from the direct real part.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    pp = np.asarray(pp, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    a = 2.0 * pp - (p0 + 1.0) / 2.0
    b = 2.0 * pi - (p0 + 1.0) / 2.0
    c = np.cos(lambda_r * t)
    s = np.sin(lambda_r * t)
    re_dir = a * c + b * s
    im_dir = b * c - a * s

    var_p0 = np.square(np.asarray(p0_err, dtype=np.float64))
    var_a = 4.0 * np.square(np.asarray(pp_err, dtype=np.float64)) + var_p0 / 4.0
    var_b = 4.0 * np.square(np.asarray(pi_err, dtype=np.float64)) + var_p0 / 4.0
    cov_ab = var_p0 / 4.0
    var_re = c * c * var_a + s * s * var_b + 2.0 * c * s * cov_ab
    var_im = s * s * var_a + c * c * var_b - 2.0 * c * s * cov_ab

    radicand = p0 - im_dir * im_dir
    var_rad = var_p0 + 4.0 * im_dir * im_dir * var_im
    bad = radicand < -(3.0 * np.sqrt(var_rad) + 1e-12)
    if np.any(bad):
        warnings.warn(
            f"{int(np.sum(bad))} indirect radicand(s) negative beyond 3 standard "
            f"errors; clamping to zero",
            stacklevel=2,
        )
    clipped = np.clip(radicand, 0.0, None)
    sign = np.where(re_dir >= 0.0, 1.0, -1.0)
    re_ind = sign * np.sqrt(clipped)
    var_ind = var_rad / (4.0 * np.clip(radicand, 1e-12, None))
    return SimpleNamespace(
        re_direct=re_dir,
        im_direct=im_dir,
        re_indirect=re_ind,
        err_direct=np.sqrt(var_re),
        err_im=np.sqrt(var_im),
        err_indirect=np.sqrt(var_ind),
    )


@dataclass
class ProtocolOverlapProvider(OverlapProvider):
    """Overlaps reconstructed from simulated probe-state populations.

    The state overlap comes from the self-overlap triple; the energy overlap
    uses ``H psi0 = alpha psi0 + beta g`` so that ``E = alpha O + beta X``
    with ``X`` a cross overlap, both inferred from populations.  ``mode``
    selects direct or indirect inference of the real parts.  With ``n_shots``
    set, every population is replaced by a binomial sample mean (stateful:
    consecutive evaluations consume the provider's RNG stream).
    """

    op: HermitianOperator
    psi0: StateVector
    psi_r: StateVector
    mode: str = "direct"
    backend: EvolutionBackend | None = None
    n_shots: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("direct", "indirect"):
            raise ValidationError(f"mode must be 'direct' or 'indirect', got {self.mode!r}")
        if self.backend is None:
            self.backend = ExactBackend(self.op)
        self.probes = build_probes(self.op, self.psi0, self.psi_r)
        self.alpha, self.beta, self.image = split_image_state(self.op, self.psi0)
        if self.image is not None and abs(self.probes.psi_r.overlap_with(self.image)) > 1e-10:
            raise ValidationError(
                "image state H psi0 is not orthogonal to the reference; "
                "the protocol cannot measure the energy overlap for this pair"
            )
        self._rng = np.random.default_rng(self.seed)

    def evaluate(self, delta_phis: np.ndarray) -> OverlapBatch:
        phis = np.asarray(delta_phis, dtype=np.float64)
        n = phis.size
        self_p = np.zeros((3, n))
        self_e = np.zeros((3, n))
        cross_p = np.zeros((3, n))
        cross_e = np.zeros((3, n))
        for i, t in enumerate(phis):
            pr = protocol_probabilities(self.probes, self.op, float(t), self.backend)
            if self.n_shots is not None:
                pr = sample_shots(pr, self.n_shots, self._rng)
            self_p[:, i] = (pr.p0, pr.pp, pr.pi)
            self_e[:, i] = (pr.p0_err, pr.pp_err, pr.pi_err)
            if self.image is not None:
                cr = cross_probabilities(
                    self.probes, self.image, self.op, float(t), self.backend
                )
                if self.n_shots is not None:
                    cr = sample_shots(cr, self.n_shots, self._rng)
                cross_p[:, i] = (cr.p0, cr.pp, cr.pi)
                cross_e[:, i] = (cr.p0_err, cr.pp_err, cr.pi_err)

        lam_r = self.probes.lambda_r
        tab = inference_tables(*self_p, phis, lam_r, *self_e)
        state_re = tab.re_direct if self.mode == "direct" else tab.re_indirect
        state_err = tab.err_direct if self.mode == "direct" else tab.err_indirect
        if self.image is not None:
            xtab = inference_tables(*cross_p, phis, lam_r, *cross_e)
            x_re = xtab.re_direct if self.mode == "direct" else xtab.re_indirect
            x_err = xtab.err_direct if self.mode == "direct" else xtab.err_indirect
            energy_re = self.alpha * state_re + self.beta * x_re
            energy_err = np.hypot(self.alpha * state_err, self.beta * x_err)
            energy_im = self.alpha * tab.im_direct + self.beta * xtab.im_direct
        else:
            energy_re = self.alpha * state_re
            energy_err = abs(self.alpha) * state_err
            energy_im = self.alpha * tab.im_direct
        has_err = self.n_shots is not None
        return OverlapBatch(
            state_re=state_re,
            energy_re=energy_re,
            state_im=tab.im_direct,
            energy_im=energy_im,
            state_err=state_err if has_err else None,
            energy_err=energy_err if has_err else None,
        )


@dataclass(frozen=True)
class IterationReport:
    """One estimator evaluation at iteration count ``k``.

    ``norm_value`` is the estimator denominator (the approximate squared norm
    of the iterated state); ``imag_residue`` is the largest imaginary part
    left in the unfolded signed double sums (exact provider only, NaN
    otherwise); ``lambda_err`` propagates provider standard errors when
    available.
    """

    k: int
    lambda_est: float
    lambda_ideal: float
    delta_lambda: float
    norm_value: float
    imag_residue: float
    lambda_err: float = float("nan")

    CSV_COLUMNS = (
        "k",
        "lambda_est",
        "lambda_ideal",
        "delta_lambda",
        "norm_value",
        "imag_residue",
    )

    def csv_row(self) -> tuple:
        return (
            self.k,
            self.lambda_est,
            self.lambda_ideal,
            self.delta_lambda,
            self.norm_value,
            self.imag_residue,
        )


@dataclass(frozen=True)
class SpectralGapInfo:
    """Spectral data of the inverse operator plus the initial overlap angle.

    ``lambda1 >= lambda2 >= lambda_n > 0`` are the dominant, sub-dominant and
    smallest eigenvalues of ``H^{-1}``; ``sin^2(theta0)`` is the squared
    overlap of the initial state with the ground state.
    """

    lambda1: float
    lambda2: float
    lambda_n: float
    theta0: float

    def __post_init__(self) -> None:
        if not (self.lambda1 >= self.lambda2 >= self.lambda_n > 0.0):
            raise ValidationError(
                f"inverse eigenvalues must satisfy l1 >= l2 >= ln > 0, got "
                f"({self.lambda1}, {self.lambda2}, {self.lambda_n})"
            )
        if not (0.0 < self.theta0 <= math.pi / 2.0 + 1e-12):
            raise ValidationError(
                f"overlap angle must lie in (0, pi/2], got {self.theta0}"
            )

    @classmethod
    def from_operator(cls, op: HermitianOperator, psi0: StateVector) -> "SpectralGapInfo":
        h = op.eigenvalues
        if float(h[0]) <= 0.0:
            raise DomainError(
                "spectral gap analysis requires a positive spectrum; "
                "shift the operator first"
            )
        sin2 = float(
            np.abs(np.vdot(op.eigenvectors[:, 0], psi0.amplitudes)) ** 2
        )
        if sin2 <= 0.0:
            raise DomainError("initial state has zero ground-state overlap")
        theta0 = math.asin(math.sqrt(min(sin2, 1.0)))
        return cls(
            lambda1=1.0 / float(h[0]),
            lambda2=1.0 / float(h[1]),
            lambda_n=1.0 / float(h[-1]),
            theta0=theta0,
        )


def ideal_iterate(
    op: HermitianOperator, psi0: StateVector, k: int
) -> tuple[StateVector, float]:
    """Exact inverse power iteration: normalize ``H^{-k} psi0``, return its energy.

    Evaluated in the eigenbasis; ``k = 0`` reproduces the Rayleigh quotient of
    the initial state.  A vanishing ground-state overlap triggers a
    convergence warning (the iteration then converges to a different state).
    """
    if k < 0:
        raise DomainError(f"iteration count must be >= 0, got {k}")
    if psi0.dim != op.dim:
        raise DomainError(f"state dimension {psi0.dim} != operator dimension {op.dim}")
    if float(op.eigenvalues[0]) <= 0.0:
        raise DomainError(
            "inverse iteration requires a positive spectrum; shift the operator first"
        )
    u = op.to_eigenbasis(psi0.amplitudes)
    if abs(u[0]) ** 2 < _OVERLAP_WARN:
        warnings.warn(
            f"initial state has negligible ground-state overlap "
            f"({abs(u[0])**2:.3e}); the iteration will converge to a different "
            f"eigenstate",
            stacklevel=2,
        )
    w = u * np.power(op.eigenvalues, -float(k))
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        raise DomainError("iterated state vanished; cannot normalize")
    w = w / norm
    energy = float(np.sum(np.abs(w) ** 2 * op.eigenvalues))
    return StateVector.from_amplitudes(op.from_eigenbasis(w)), energy


def _ledger_k(ledger: PhaseLedger) -> int:
    return ledger.series.k if ledger.series is not None else 0


def _signed_residue(
    ledger: PhaseLedger, provider: ExactOverlapProvider
) -> float:
    """Largest imaginary part of the unfolded signed double sums.

    The folded ledger uses only real parts by construction; this evaluates
    the original signed sum over positive and negative lags and reports how
    far its numerator and denominator stray from the real axis.
    """
    if ledger.signed_lags is None or ledger.signed_weights is None:
        return float("nan")
    phis = ledger.signed_lags * ledger.phase_unit
    state_c, energy_c = provider.complex_overlaps(phis)
    num = complex(np.dot(ledger.signed_weights, energy_c))
    den = complex(np.dot(ledger.signed_weights, state_c))
    return max(abs(num.imag), abs(den.imag))


def estimate_energy(
    op: HermitianOperator,
    psi0: StateVector,
    ledger: PhaseLedger,
    overlap_provider: OverlapProvider,
    denominator_floor: float = DENOMINATOR_FLOOR,
) -> IterationReport:
    """Ledger-weighted overlap ratio estimate of the ground-state energy.

    Evaluates the provider at the zero phase difference plus every ledger
    row, then forms numerator and denominator with the accumulated pair
    weights.  The summation order is fixed (ledger row order) so results are
    reproducible bit-for-bit.
    """
    phis = np.concatenate(([0.0], ledger.delta_phis))
    batch = overlap_provider.evaluate(phis)
    num = ledger.zero_weight * float(batch.energy_re[0]) + float(
        np.dot(ledger.weights, batch.energy_re[1:])
    )
    den = ledger.zero_weight * float(batch.state_re[0]) + float(
        np.dot(ledger.weights, batch.state_re[1:])
    )
    if abs(den) < denominator_floor:
        raise EstimateConditionError(
            f"estimator denominator {den:.3e} below floor {denominator_floor:.1e}; "
            f"the grid does not resolve this iteration count"
        )
    lambda_est = num / den

    lambda_err = float("nan")
    if batch.state_err is not None and batch.energy_err is not None:
        var_num = ledger.zero_weight**2 * float(batch.energy_err[0]) ** 2 + float(
            np.dot(ledger.weights**2, batch.energy_err[1:] ** 2)
        )
        var_den = ledger.zero_weight**2 * float(batch.state_err[0]) ** 2 + float(
            np.dot(ledger.weights**2, batch.state_err[1:] ** 2)
        )
        lambda_err = (
            math.sqrt(var_num + lambda_est**2 * var_den) / abs(den)
        )

    if isinstance(overlap_provider, ExactOverlapProvider):
        residue = _signed_residue(ledger, overlap_provider)
    else:
        residue = float("nan")

    k = _ledger_k(ledger)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, lambda_ideal = ideal_iterate(op, psi0, k)
    return IterationReport(
        k=k,
        lambda_est=float(lambda_est),
        lambda_ideal=float(lambda_ideal),
        delta_lambda=float(lambda_est - op.ground_energy()),
        norm_value=float(den),
        imag_residue=float(residue),
        lambda_err=lambda_err,
    )


def estimate_observable(
    a_op: np.ndarray,
    op: HermitianOperator,
    psi0: StateVector,
    ledger: PhaseLedger,
    overlap_provider: OverlapProvider,
    denominator_floor: float = DENOMINATOR_FLOOR,
) -> float:
    """Expectation of a (symmetrized) operator in the iterated state.

    The numerator replaces ``H`` by ``(a_op + a_op^dagger)/2``.  Because a
    general operator does not commute with the Hamiltonian, the pairwise
    phase structure does not collapse onto phase differences; the numerator
    is therefore evaluated as ``<chi| A_sym |chi>`` with ``chi`` the
    series-applied state — which is exactly the unfolded double sum.  The
    denominator reuses the ledger/provider machinery, so this route is
    restricted to the exact provider.
    """
    a_op = np.asarray(a_op)
    if a_op.shape != (op.dim, op.dim):
        raise ValidationError(
            f"observable shape {a_op.shape} does not match operator dimension {op.dim}"
        )
    if not getattr(overlap_provider, "exact", False):
        raise ValidationError(
            "observable estimation requires the exact overlap provider: for an "
            "operator that does not commute with H the double sum does not "
            "reduce to measurable phase differences"
        )
    a_sym = 0.5 * (a_op + a_op.conj().T)

    if ledger.series is None:
        chi = psi0.amplitudes
    else:
        chi = apply_series(ledger.series, op, psi0).raw
    numerator = float(np.real(np.vdot(chi, a_sym @ chi)))

    phis = np.concatenate(([0.0], ledger.delta_phis))
    batch = overlap_provider.evaluate(phis)
    den = ledger.zero_weight * float(batch.state_re[0]) + float(
        np.dot(ledger.weights, batch.state_re[1:])
    )
    if abs(den) < denominator_floor:
        raise EstimateConditionError(
            f"estimator denominator {den:.3e} below floor {denominator_floor:.1e}"
        )
    return numerator / den


def predicted_iterations(info: SpectralGapInfo, eps: float) -> float:
    """Iteration-count prediction from the inverse-spectrum gap structure.

    ``K = log[eps sin^{-2}(theta0) / (lambda1 - lambda_n)] / [2 log(lambda2/lambda1)]``
    — a logarithmic, possibly fractional bound; callers round up.  ``eps`` is
    the tolerated ground-state overlap deficit of the iterated state.
    """
    if eps <= 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    if info.lambda1 == info.lambda2:
        raise DomainError(
            "degenerate dominant inverse eigenvalue (lambda1 == lambda2); "
            "the iteration gap vanishes and no finite count is predicted"
        )
    if info.lambda1 == info.lambda_n:
        raise DomainError("spectral range lambda1 - lambda_n vanishes")
    sin2 = math.sin(info.theta0) ** 2
    numerator = math.log(eps / sin2 / (info.lambda1 - info.lambda_n))
    denominator = 2.0 * math.log(info.lambda2 / info.lambda1)
    return numerator / denominator
