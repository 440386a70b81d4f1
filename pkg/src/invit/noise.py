"""Dephasing noise: quantum-jump trajectories, sweeps, and error mitigation.

The noise model is per-qubit dephasing with jump operators ``sqrt(gamma) Z_j``.
Because ``C_j^dagger C_j = gamma I``, the jump statistics are state
independent: a trajectory is an ordinary Poisson process of total rate
``n_qubits * gamma`` whose events insert a ``Z`` on a uniformly chosen qubit
between exact unitary segments.  This makes a vectorized ensemble possible —
jump schedules are drawn up front, trajectories are grouped by jump count,
and whole groups evolve through batched eigenbasis operations.

Ensemble randomness comes from a per-trajectory uniform tape seeded by the
master seed and the trajectory index alone.  A given trajectory therefore
replays the same underlying draws at every rate and phase (the jump count is
the Poisson inverse CDF of its count uniform), which couples the points of a
rate sweep and keeps extrapolations to zero noise from amplifying
independently re-rolled sampling noise.

On top of the trajectory engine sit the measured-overlap sweep over
artificial noise rates, polynomial zero-noise extrapolation, and the
weighted combiner that blends the direct- and indirect-inference
extrapolations into one mitigated value per phase row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np
from scipy.stats import poisson

from .errors import DomainError, ValidationError
from .estimator import (
    ExactOverlapProvider,
    OverlapBatch,
    OverlapProvider,
    inference_tables,
)
from .pauli import HermitianOperator, StateVector
from .protocol import ProtocolProbabilities, build_probes, split_image_state
from .series import PhaseLedger

__all__ = [
    "NoiseConfig",
    "MitigationRecord",
    "DEFAULT_GAMMA_SWEEP",
    "mc_trajectory",
    "noisy_probabilities",
    "NoisyOverlapProvider",
    "extrapolate",
    "weighted_mitigate",
    "mitigate_rows",
    "mitigation_pipeline",
]

#: Artificial dephasing rates used for extrapolation, in units of the
#: Hamiltonian energy scale.
DEFAULT_GAMMA_SWEEP = (0.02, 0.03, 0.045, 0.065, 0.1)


@dataclass(frozen=True)
class NoiseConfig:
    """Dephasing-simulation parameters.

    ``gamma`` is the single operating rate used where one value is needed;
    ``gamma_sweep`` is the ascending list of artificially raised rates for
    extrapolation, and ``gamma_min`` the lowest physically accessible rate
    (rows below it are excluded from mitigation fits).
    """

    gamma: float = 0.02
    n_trajectories: int = 5000
    master_seed: int = 0
    gamma_sweep: tuple[float, ...] = DEFAULT_GAMMA_SWEEP
    gamma_min: float = 0.02

    def __post_init__(self) -> None:
        if self.gamma < 0.0:
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")
        if self.n_trajectories < 1:
            raise ValidationError(
                f"n_trajectories must be >= 1, got {self.n_trajectories}"
            )
        sweep = tuple(float(g) for g in self.gamma_sweep)
        if any(b <= a for a, b in zip(sweep, sweep[1:])):
            raise ValidationError(f"gamma_sweep must be strictly ascending: {sweep}")
        if any(g < 0.0 for g in sweep):
            raise ValidationError(f"gamma_sweep rates must be >= 0: {sweep}")
        if sweep and not (self.gamma_min in sweep or self.gamma_min < sweep[0]):
            raise ValidationError(
                f"gamma_min {self.gamma_min} must be a sweep rate or below the sweep"
            )
        object.__setattr__(self, "gamma_sweep", sweep)


@dataclass(frozen=True)
class MitigationRecord:
    """Per-quantity record of the sweep values and their extrapolations.

    ``values_*``/``errs_*`` are aligned with the gamma sweep; ``extrap_*``
    are the zero-rate intercepts of linear (order 1) and cubic (order 3)
    least-squares fits; ``combined`` is the weighted blend of the two
    order-3 intercepts.
    """

    gammas: tuple[float, ...]
    values_direct: np.ndarray = field(repr=False)
    values_indirect: np.ndarray = field(repr=False)
    errs_direct: np.ndarray = field(repr=False)
    errs_indirect: np.ndarray = field(repr=False)
    extrap_dir_1: float = 0.0
    extrap_dir_3: float = 0.0
    extrap_ind_1: float = 0.0
    extrap_ind_3: float = 0.0
    combined: float = 0.0


def _qubit_count(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim <= 0 or 2**n != dim:
        raise DomainError(
            f"the dephasing model acts on qubit registers; dimension {dim} "
            f"is not a power of two"
        )
    return n


def _z_diagonals(n_qubits: int) -> np.ndarray:
    """Row ``q`` holds the diagonal of ``Z_q`` (qubit 0 = least significant bit)."""
    idx = np.arange(2**n_qubits)
    return 1.0 - 2.0 * ((idx[None, :] >> np.arange(n_qubits)[:, None]) & 1)


def mc_trajectory(
    op: HermitianOperator,
    psi: StateVector,
    phi: float,
    gamma: float,
    rng: np.random.Generator,
) -> StateVector:
    """One dephasing trajectory: exact segments with Poisson-timed Z insertions.

    Draw order (part of the determinism contract): one Poisson jump count,
    then the jump times as uniforms over ``[0, phi]`` (sorted), then the
    qubit index per jump.
    """
    if phi < 0.0:
        raise DomainError(f"evolution phase must be >= 0, got {phi}")
    if gamma < 0.0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    if psi.dim != op.dim:
        raise DomainError(f"state dimension {psi.dim} != operator dimension {op.dim}")
    n_q = _qubit_count(op.dim)

    n_jumps = int(rng.poisson(n_q * gamma * phi)) if gamma > 0.0 and phi > 0.0 else 0
    vec_e = op.to_eigenbasis(psi.amplitudes)
    if n_jumps == 0:
        vec_e = vec_e * np.exp(-1j * op.eigenvalues * phi)
        return StateVector.from_amplitudes(op.from_eigenbasis(vec_e))

    times = np.sort(rng.uniform(0.0, phi, size=n_jumps))
    qubits = rng.integers(0, n_q, size=n_jumps)
    zdiag = _z_diagonals(n_q)
    previous = 0.0
    for t_jump, q in zip(times, qubits):
        vec_e = vec_e * np.exp(-1j * op.eigenvalues * (t_jump - previous))
        vec = op.from_eigenbasis(vec_e) * zdiag[q]
        vec_e = op.to_eigenbasis(vec)
        previous = float(t_jump)
    vec_e = vec_e * np.exp(-1j * op.eigenvalues * (phi - previous))
    return StateVector.from_amplitudes(op.from_eigenbasis(vec_e))


_TAPE_COUNT, _TAPE_TIME, _TAPE_QUBIT = 0, 1, 2


def _tape_uniforms(master_seed: int, tag: int, column: int, n_traj: int) -> np.ndarray:
    """One column of the per-trajectory uniform tape.

    Row ``i`` of the tape belongs to trajectory ``i``; a column is addressed
    by ``(tag, column)`` and seeded from ``master_seed`` alone, so the same
    trajectory re-reads the same uniforms at every rate and phase.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(tag), int(column)])
    )
    return rng.random(n_traj)


def _ensemble_draws(
    master_seed: int, n_traj: int, rate: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jump counts plus raw time/qubit uniforms for one trajectory ensemble.

    Each trajectory owns a fixed row of uniforms determined by
    ``master_seed`` and its index only.  The jump count is the Poisson
    inverse CDF of the count uniform at the requested total ``rate``, the
    jump times are the first ``count`` time uniforms (to be scaled by the
    evolution phase and sorted), and the struck qubits come from the qubit
    uniforms.  Marginally every ensemble is an exact Poisson jump process;
    across different rates or phases the ensembles are coupled through the
    shared uniforms, so sweep values vary smoothly with the rate instead of
    re-rolling the noise — which keeps zero-noise extrapolation from
    amplifying independent sampling errors.
    """
    u_count = _tape_uniforms(master_seed, _TAPE_COUNT, 0, n_traj)
    if rate > 0.0:
        counts = poisson.ppf(u_count, rate).astype(np.int64)
    else:
        counts = np.zeros(n_traj, dtype=np.int64)
    j_max = int(counts.max()) if n_traj else 0
    if j_max:
        u_times = np.column_stack(
            [_tape_uniforms(master_seed, _TAPE_TIME, j, n_traj) for j in range(j_max)]
        )
        u_qubits = np.column_stack(
            [_tape_uniforms(master_seed, _TAPE_QUBIT, j, n_traj) for j in range(j_max)]
        )
    else:
        u_times = np.empty((n_traj, 0))
        u_qubits = np.empty((n_traj, 0))
    return counts, u_times, u_qubits


def _ensemble_evolve(
    op: HermitianOperator,
    states: np.ndarray,
    phi: float,
    counts: np.ndarray,
    u_times: np.ndarray,
    u_qubits: np.ndarray,
) -> np.ndarray:
    """Evolve a stack of input states through the tape-drawn jump schedules.

    ``states`` has shape ``(n_states, dim)``; the result has shape
    ``(n_traj, n_states, dim)``.  The same jump realization is applied to
    every input state of a trajectory — legitimate because the jump process
    is state independent, and it keeps the per-trajectory populations of a
    probe set statistically correlated exactly as a shared noise environment
    would.  Trajectories are grouped by jump count and whole groups evolve
    through batched eigenbasis operations; the reduction order is fixed by
    trajectory index, so results do not depend on the grouping.
    """
    n_q = _qubit_count(op.dim)
    dim = op.dim
    n_states = states.shape[0]
    n_traj = counts.size
    vecs = op.eigenvectors
    states_e = states @ vecs.conj()  # rows -> eigenbasis coefficients

    out = np.empty((n_traj, n_states, dim), dtype=np.complex128)
    zdiag = _z_diagonals(n_q)

    for m in np.unique(counts):
        idx = np.nonzero(counts == m)[0]
        if m == 0:
            evolved = states_e * np.exp(-1j * op.eigenvalues * phi)
            out[idx] = (evolved @ vecs.T)[None, :, :]
            continue
        n_m = idx.size
        times = np.sort(u_times[idx, : int(m)] * phi, axis=1)
        qubits = (u_qubits[idx, : int(m)] * n_q).astype(np.int64)
        bounds = np.concatenate([times, np.full((n_m, 1), phi)], axis=1)
        deltas = np.diff(np.concatenate([np.zeros((n_m, 1)), bounds], axis=1), axis=1)
        batch = np.broadcast_to(states_e, (n_m, n_states, dim)).copy()
        for j in range(int(m)):
            batch *= np.exp(-1j * np.outer(deltas[:, j], op.eigenvalues))[:, None, :]
            comp = batch @ vecs.T
            comp *= zdiag[qubits[:, j]][:, None, :]
            batch = comp @ vecs.conj()
        batch *= np.exp(-1j * np.outer(deltas[:, -1], op.eigenvalues))[:, None, :]
        out[idx] = batch @ vecs.T
    return out


def noisy_probabilities(
    probes,
    op: HermitianOperator,
    t: float,
    gamma: float,
    n_traj: int,
    master_seed: int,
) -> ProtocolProbabilities:
    """Trajectory-averaged probe populations with standard errors.

    Trajectory ``i`` is seeded deterministically from ``master_seed`` and its
    index via the uniform tape, so a point is reproducible in isolation and
    ensembles at different rates share their randomness.
    """
    if n_traj < 1:
        raise DomainError(f"n_traj must be >= 1, got {n_traj}")
    if gamma < 0.0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    n_q = _qubit_count(op.dim)
    counts, u_times, u_qubits = _ensemble_draws(
        master_seed, n_traj, n_q * gamma * float(t)
    )
    inputs = np.stack([probes.psi0.amplitudes, probes.psi_plus.amplitudes])
    evolved = _ensemble_evolve(op, inputs, float(t), counts, u_times, u_qubits)
    p0 = np.abs(evolved[:, 0, :] @ probes.psi0.amplitudes.conj()) ** 2
    pp = np.abs(evolved[:, 1, :] @ probes.psi_plus.amplitudes.conj()) ** 2
    pi = np.abs(evolved[:, 1, :] @ probes.psi_i.amplitudes.conj()) ** 2

    def _mean_err(x: np.ndarray) -> tuple[float, float]:
        if x.size == 1:
            return float(x[0]), 0.0
        return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))

    (m0, e0), (mp, ep), (mi, ei) = _mean_err(p0), _mean_err(pp), _mean_err(pi)
    return ProtocolProbabilities(
        p0=m0, pp=mp, pi=mi, t=float(t), p0_err=e0, pp_err=ep, pi_err=ei
    )


def _noisy_point(
    op: HermitianOperator,
    probes,
    image: StateVector | None,
    alpha: float,
    beta: float,
    t: float,
    gamma: float,
    n_traj: int,
    master_seed: int,
) -> SimpleNamespace:
    """All direct/indirect state and energy overlap estimates at one point.

    Direct inference is linear in the populations, so it is averaged per
    trajectory (capturing the correlations induced by the shared jump
    schedule); indirect inference is nonlinear and is evaluated on the
    ensemble-mean populations with first-order error propagation.
    """
    n_q = _qubit_count(op.dim)
    counts, u_times, u_qubits = _ensemble_draws(
        master_seed, n_traj, n_q * gamma * float(t)
    )
    inputs = [probes.psi0.amplitudes, probes.psi_plus.amplitudes]
    if image is not None:
        chi_plus = (probes.psi_r.amplitudes + image.amplitudes) / math.sqrt(2.0)
        inputs += [image.amplitudes, chi_plus]
    evolved = _ensemble_evolve(op, np.stack(inputs), float(t), counts, u_times, u_qubits)

    bra0 = probes.psi0.amplitudes.conj()
    brap = probes.psi_plus.amplitudes.conj()
    brai = probes.psi_i.amplitudes.conj()
    lam_r = probes.lambda_r

    def _triple(ket_self: int, ket_probe: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a0 = np.abs(evolved[:, ket_self, :] @ bra0) ** 2
        ap = np.abs(evolved[:, ket_probe, :] @ brap) ** 2
        ai = np.abs(evolved[:, ket_probe, :] @ brai) ** 2
        return a0, ap, ai

    def _summarize(trips) -> SimpleNamespace:
        p0, pp, pi = trips
        n = p0.size
        # per-trajectory direct inference (linear in populations)
        tab_traj = inference_tables(p0, pp, pi, np.full(n, t), lam_r)
        re_dir = float(np.mean(tab_traj.re_direct))
        re_dir_err = (
            float(np.std(tab_traj.re_direct, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        )
        im_dir = float(np.mean(tab_traj.im_direct))
        im_dir_err = (
            float(np.std(tab_traj.im_direct, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        )
        means = [float(np.mean(x)) for x in (p0, pp, pi)]
        errs = [
            float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
            for x in (p0, pp, pi)
        ]
        tab_mean = inference_tables(
            *[np.array([v]) for v in means],
            np.array([t]),
            lam_r,
            *[np.array([e]) for e in errs],
        )
        return SimpleNamespace(
            re_direct=re_dir,
            re_direct_err=re_dir_err,
            im_direct=im_dir,
            im_direct_err=im_dir_err,
            re_indirect=float(tab_mean.re_indirect[0]),
            re_indirect_err=float(tab_mean.err_indirect[0]),
        )

    self_sum = _summarize(_triple(0, 1))
    point = SimpleNamespace(
        state_dir=self_sum.re_direct,
        state_dir_err=self_sum.re_direct_err,
        state_ind=self_sum.re_indirect,
        state_ind_err=self_sum.re_indirect_err,
        state_im=self_sum.im_direct,
    )
    if image is None:
        point.energy_dir = alpha * point.state_dir
        point.energy_dir_err = abs(alpha) * point.state_dir_err
        point.energy_ind = alpha * point.state_ind
        point.energy_ind_err = abs(alpha) * point.state_ind_err
        point.energy_im = alpha * point.state_im
    else:
        cross_sum = _summarize(_triple(2, 3))
        point.energy_dir = alpha * self_sum.re_direct + beta * cross_sum.re_direct
        point.energy_dir_err = math.hypot(
            alpha * self_sum.re_direct_err, beta * cross_sum.re_direct_err
        )
        point.energy_ind = alpha * self_sum.re_indirect + beta * cross_sum.re_indirect
        point.energy_ind_err = math.hypot(
            alpha * self_sum.re_indirect_err, beta * cross_sum.re_indirect_err
        )
        point.energy_im = alpha * self_sum.im_direct + beta * cross_sum.im_direct
    return point


@dataclass
class NoisyOverlapProvider(OverlapProvider):
    """Overlap provider backed by dephasing-trajectory ensembles.

    Evaluates one trajectory ensemble per phase difference at the configured
    operating rate ``noise.gamma``; ``mode`` selects direct or indirect
    inference of the real parts.  Deterministic: results depend only on
    ``(noise.master_seed, noise.n_trajectories, noise.gamma, phase)``.
    """

    op: HermitianOperator
    psi0: StateVector
    psi_r: StateVector
    noise: NoiseConfig
    mode: str = "direct"

    def __post_init__(self) -> None:
        if self.mode not in ("direct", "indirect"):
            raise ValidationError(f"mode must be 'direct' or 'indirect', got {self.mode!r}")
        self.probes = build_probes(self.op, self.psi0, self.psi_r)
        self.alpha, self.beta, self.image = split_image_state(self.op, self.psi0)

    def evaluate(self, delta_phis: np.ndarray) -> OverlapBatch:
        phis = np.asarray(delta_phis, dtype=np.float64)
        n = phis.size
        arrays = {name: np.zeros(n) for name in (
            "state_re", "energy_re", "state_err", "energy_err", "state_im", "energy_im"
        )}
        for i, t in enumerate(phis):
            pt = _noisy_point(
                self.op, self.probes, self.image, self.alpha, self.beta,
                float(t), self.noise.gamma, self.noise.n_trajectories,
                self.noise.master_seed,
            )
            if self.mode == "direct":
                arrays["state_re"][i] = pt.state_dir
                arrays["state_err"][i] = pt.state_dir_err
                arrays["energy_re"][i] = pt.energy_dir
                arrays["energy_err"][i] = pt.energy_dir_err
            else:
                arrays["state_re"][i] = pt.state_ind
                arrays["state_err"][i] = pt.state_ind_err
                arrays["energy_re"][i] = pt.energy_ind
                arrays["energy_err"][i] = pt.energy_ind_err
            arrays["state_im"][i] = pt.state_im
            arrays["energy_im"][i] = pt.energy_im
        return OverlapBatch(
            state_re=arrays["state_re"],
            energy_re=arrays["energy_re"],
            state_im=arrays["state_im"],
            energy_im=arrays["energy_im"],
            state_err=arrays["state_err"],
            energy_err=arrays["energy_err"],
        )


def extrapolate(gammas, values, order: int) -> float:
    """Zero-rate intercept of a degree-``order`` least-squares polynomial fit."""
    gammas = np.asarray(gammas, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if gammas.shape != values.shape or gammas.ndim != 1:
        raise DomainError(
            f"gammas and values must be equal-length 1-D sequences, got shapes "
            f"{gammas.shape} and {values.shape}"
        )
    if order < 0:
        raise DomainError(f"order must be >= 0, got {order}")
    if gammas.size < order + 1:
        raise DomainError(
            f"need at least {order + 1} points for an order-{order} fit, "
            f"got {gammas.size}"
        )
    coeffs = np.polynomial.polynomial.polyfit(gammas, values, deg=order)
    return float(coeffs[0])


def weighted_mitigate(dir1: float, dir3: float, ind1: float, ind3: float) -> float:
    """Blend the order-3 direct and indirect extrapolations.

    Each branch is weighted by the squared spread of the *other* branch's
    order-1 vs order-3 intercepts — a self-consistent branch (small spread)
    suppresses its own weight on the opposite value, i.e. the final value
    leans toward the branch whose two fits agree.  Both spreads zero means
    both branches are self-consistent; their order-3 mean is returned.
    """
    w_dir = (ind1 - ind3) ** 2
    w_ind = (dir1 - dir3) ** 2
    total = w_dir + w_ind
    if total == 0.0:
        return 0.5 * (dir3 + ind3)
    return (w_dir * dir3 + w_ind * ind3) / total


def mitigate_rows(
    gammas,
    direct_rows: np.ndarray,
    indirect_rows: np.ndarray,
    direct_errs: np.ndarray | None = None,
    indirect_errs: np.ndarray | None = None,
) -> tuple[np.ndarray, list[MitigationRecord]]:
    """Extrapolate and combine every row of per-rate overlap tables.

    ``*_rows`` have shape ``(n_gammas, n_rows)``; returns the mitigated value
    per row plus the full per-row records.
    """
    gammas = np.asarray(gammas, dtype=np.float64)
    direct_rows = np.asarray(direct_rows, dtype=np.float64)
    indirect_rows = np.asarray(indirect_rows, dtype=np.float64)
    if direct_errs is None:
        direct_errs = np.zeros_like(direct_rows)
    if indirect_errs is None:
        indirect_errs = np.zeros_like(indirect_rows)
    n_rows = direct_rows.shape[1]
    combined = np.zeros(n_rows)
    records: list[MitigationRecord] = []
    for q in range(n_rows):
        d1 = extrapolate(gammas, direct_rows[:, q], 1)
        d3 = extrapolate(gammas, direct_rows[:, q], 3)
        i1 = extrapolate(gammas, indirect_rows[:, q], 1)
        i3 = extrapolate(gammas, indirect_rows[:, q], 3)
        value = weighted_mitigate(d1, d3, i1, i3)
        combined[q] = value
        records.append(
            MitigationRecord(
                gammas=tuple(float(g) for g in gammas),
                values_direct=direct_rows[:, q].copy(),
                values_indirect=indirect_rows[:, q].copy(),
                errs_direct=direct_errs[:, q].copy(),
                errs_indirect=indirect_errs[:, q].copy(),
                extrap_dir_1=d1,
                extrap_dir_3=d3,
                extrap_ind_1=i1,
                extrap_ind_3=i3,
                combined=value,
            )
        )
    return combined, records


def _ledger_ratio(ledger: PhaseLedger, state_row: np.ndarray, energy_row: np.ndarray) -> float:
    num = ledger.zero_weight * energy_row[0] + float(
        np.dot(ledger.weights, energy_row[1:])
    )
    den = ledger.zero_weight * state_row[0] + float(
        np.dot(ledger.weights, state_row[1:])
    )
    return num / den


def mitigation_pipeline(
    op: HermitianOperator,
    psi0: StateVector,
    psi_r: StateVector,
    ledgers: dict[int, PhaseLedger],
    config: NoiseConfig,
) -> SimpleNamespace:
    """Full sweep-extrapolate-combine pipeline over a family of ledgers.

    All ledgers must share one phase-row set (they come from one grid at
    different inverse powers).  Trajectory ensembles are evaluated once per
    (rate, phase); extrapolation and the weighted combiner run per phase
    row — for the state overlap and the energy overlap separately — and the
    ledger sums then produce, for every iteration count ``k``: the
    unmitigated direct and indirect estimates at ``gamma_min``, the
    mitigated estimate, and the noiseless reference.

    Returns a namespace with ``per_k`` (list of row dicts), ``records``
    (per-phase-row mitigation records for the state overlap), and
    ``delta_phis``.
    """
    if not ledgers:
        raise ValidationError("mitigation pipeline needs at least one ledger")
    items = sorted(ledgers.items())
    base_rows = items[0][1].delta_phis
    for k, led in items[1:]:
        if led.delta_phis.shape != base_rows.shape or not np.allclose(
            led.delta_phis, base_rows, rtol=0.0, atol=1e-12
        ):
            raise ValidationError(
                "ledgers do not share a common phase-row set; the pipeline "
                "evaluates one overlap table for all iteration counts"
            )
    phis = np.concatenate(([0.0], base_rows))

    probes = build_probes(op, psi0, psi_r)
    alpha, beta, image = split_image_state(op, psi0)

    fit_gammas = [g for g in config.gamma_sweep if g >= config.gamma_min]
    if len(fit_gammas) < 4:
        raise ValidationError(
            f"need at least 4 sweep rates at or above gamma_min for the cubic "
            f"fit, got {len(fit_gammas)}"
        )
    eval_gammas = list(fit_gammas)
    if config.gamma_min not in eval_gammas:
        eval_gammas = [config.gamma_min] + eval_gammas

    shape = (len(eval_gammas), phis.size)
    tables = {
        name: np.zeros(shape)
        for name in (
            "state_dir", "state_ind", "energy_dir", "energy_ind",
            "state_dir_err", "state_ind_err", "energy_dir_err", "energy_ind_err",
        )
    }
    for gi, gamma in enumerate(eval_gammas):
        for pj, t in enumerate(phis):
            pt = _noisy_point(
                op, probes, image, alpha, beta, float(t), float(gamma),
                config.n_trajectories, config.master_seed,
            )
            tables["state_dir"][gi, pj] = pt.state_dir
            tables["state_ind"][gi, pj] = pt.state_ind
            tables["energy_dir"][gi, pj] = pt.energy_dir
            tables["energy_ind"][gi, pj] = pt.energy_ind
            tables["state_dir_err"][gi, pj] = pt.state_dir_err
            tables["state_ind_err"][gi, pj] = pt.state_ind_err
            tables["energy_dir_err"][gi, pj] = pt.energy_dir_err
            tables["energy_ind_err"][gi, pj] = pt.energy_ind_err

    fit_idx = [eval_gammas.index(g) for g in fit_gammas]
    state_mit, state_records = mitigate_rows(
        fit_gammas,
        tables["state_dir"][fit_idx],
        tables["state_ind"][fit_idx],
        tables["state_dir_err"][fit_idx],
        tables["state_ind_err"][fit_idx],
    )
    energy_mit, _ = mitigate_rows(
        fit_gammas,
        tables["energy_dir"][fit_idx],
        tables["energy_ind"][fit_idx],
        tables["energy_dir_err"][fit_idx],
        tables["energy_ind_err"][fit_idx],
    )

    min_idx = eval_gammas.index(config.gamma_min)
    exact = ExactOverlapProvider(op, psi0)
    exact_batch = exact.evaluate(phis)
    lam_gs = op.ground_energy()

    per_k = []
    for k, led in items:
        row = {
            "k": k,
            "lambda_direct": _ledger_ratio(
                led, tables["state_dir"][min_idx], tables["energy_dir"][min_idx]
            ),
            "lambda_indirect": _ledger_ratio(
                led, tables["state_ind"][min_idx], tables["energy_ind"][min_idx]
            ),
            "lambda_mitigated": _ledger_ratio(led, state_mit, energy_mit),
            "lambda_noiseless": _ledger_ratio(
                led, exact_batch.state_re, exact_batch.energy_re
            ),
        }
        row["delta_direct"] = abs(row["lambda_direct"] - lam_gs)
        row["delta_indirect"] = abs(row["lambda_indirect"] - lam_gs)
        row["delta_mitigated"] = abs(row["lambda_mitigated"] - lam_gs)
        row["delta_noiseless"] = abs(row["lambda_noiseless"] - lam_gs)
        per_k.append(row)
    return SimpleNamespace(per_k=per_k, records=state_records, delta_phis=phis)
