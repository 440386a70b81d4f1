"""Config-driven experiment runner: systems, grid sweeps, and result tables.

An experiment is described by one JSON document (see ``ExperimentConfig``),
built from the library modules and emitted as a CSV table with a JSON
metadata sidecar.  Four experiment kinds cover the bundled studies:

``iterate``
    Ground-state-energy estimates (and optional site correlations) for every
    combination of system variant, approximation grid, and iteration count.
``skew_sweep``
    Energy and operator-level error of the inverse approximation as the
    grid-step ratio ``delta_y / delta_z`` varies at fixed maximal phase.
``trotter``
    Product-formula evolution versus exact evolution across step counts.
``noise``
    The dephasing sweep / extrapolation / weighted-mitigation pipeline.

Tables are plot-ready; no plotting happens here.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version as _pkg_version
from pathlib import Path
from types import SimpleNamespace
from typing import Any

import numpy as np

from .bosons import (
    BoseHubbardParams,
    FockBasis,
    build_bose_hubbard,
    build_fock_basis,
    correlation_operator,
    mott_state,
)
from .errors import DomainError, ValidationError
from .estimator import (
    ExactOverlapProvider,
    IterationReport,
    OverlapProvider,
    ProtocolOverlapProvider,
    estimate_energy,
    estimate_observable,
)
from .noise import NoiseConfig, NoisyOverlapProvider, mitigation_pipeline
from .pauli import (
    HermitianOperator,
    PauliSum,
    StateVector,
    build_h2,
    h2_hartree_fock_state,
    load_pauli_sum,
    to_dense,
)
from .propagate import EvolutionBackend, TrotterBackend
from .series import GridParams, PhaseLedger, build_series, dedup_phases, materialize_inverse, trace_distance

__all__ = [
    "ExperimentConfig",
    "ResultTable",
    "run",
    "run_skew_sweep",
    "locate_beh2_file",
    "BEH2_ENV_VAR",
    "BEH2_DEFAULT_PATH",
]

EXPERIMENT_KINDS = ("iterate", "skew_sweep", "trotter", "noise")
SYSTEM_TYPES = ("h2", "beh2", "pauli_file", "bose_hubbard")
PROVIDER_TYPES = ("exact", "protocol", "noisy")

#: Environment variable naming a beryllium-hydride Hamiltonian file.
BEH2_ENV_VAR = "INVIT_BEH2_FILE"
#: Fallback location (relative to the working directory) for that file.
BEH2_DEFAULT_PATH = Path("data") / "beh2.json"

#: Hartree-Fock basis index for the 8-qubit beryllium-hydride model: the two
#: lowest spin orbitals occupied, qubit 0 the least significant bit.
_BEH2_HF_INDEX = 3


def _tool_version() -> str:
    try:
        return _pkg_version("invit")
    except PackageNotFoundError:  # running from a source tree without install
        return "unknown"


def locate_beh2_file() -> Path:
    """Find the user-supplied beryllium-hydride Hamiltonian file.

    The file is not distributed with the package.  Lookup order: the
    ``INVIT_BEH2_FILE`` environment variable, then ``data/beh2.json``
    relative to the current working directory.
    """
    env = os.environ.get(BEH2_ENV_VAR, "").strip()
    if env:
        path = Path(env)
        if not path.is_file():
            raise ValidationError(
                f"{BEH2_ENV_VAR} points to {path}, which does not exist"
            )
        return path
    if BEH2_DEFAULT_PATH.is_file():
        return BEH2_DEFAULT_PATH
    raise ValidationError(
        "beryllium-hydride Hamiltonian file not found: set the "
        f"{BEH2_ENV_VAR} environment variable or place the file at "
        f"{BEH2_DEFAULT_PATH}. The file is a Pauli-sum JSON document "
        '({"n_qubits": 8, "energy_unit": "Hartree", "terms": [{"coeff": ..., '
        '"paulis": [{"q": ..., "axis": "X"|"Y"|"Z"}, ...]}, ...]}).'
    )


# --- configuration ----------------------------------------------------------


def _require(mapping: dict, key: str, context: str) -> Any:
    if key not in mapping:
        raise ValidationError(f"{context}: missing required key '{key}'")
    return mapping[key]


def _as_float(value: Any, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{context}: expected a real number, got {value!r}")
    return float(value)


def _as_int(value: Any, context: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{context}: expected an integer, got {value!r}")
    return int(value)


def _k_range(raw: Any) -> tuple[int, ...]:
    """Accept an explicit list of iteration counts or {"start","stop"}."""
    if isinstance(raw, dict):
        start = _as_int(_require(raw, "start", "k_range"), "k_range.start")
        stop = _as_int(_require(raw, "stop", "k_range"), "k_range.stop")
        if stop < start:
            raise ValidationError(f"k_range: stop {stop} < start {start}")
        values = tuple(range(start, stop + 1))
    elif isinstance(raw, list):
        values = tuple(_as_int(v, "k_range entry") for v in raw)
    else:
        raise ValidationError(
            f"k_range must be a list or a start/stop object, got {raw!r}"
        )
    if not values:
        raise ValidationError("k_range must not be empty")
    if any(k < 1 for k in values):
        raise ValidationError(f"k_range entries must be >= 1, got {values}")
    return values


_GRID_KEYS = {"m_y", "m_z", "delta_y", "delta_z", "phi_max_over_2pi", "skew"}


def _check_grid_spec(spec: Any, context: str) -> dict:
    if not isinstance(spec, dict):
        raise ValidationError(f"{context}: grid spec must be an object, got {spec!r}")
    unknown = set(spec) - _GRID_KEYS
    if unknown:
        raise ValidationError(f"{context}: unknown grid keys {sorted(unknown)}")
    has_m = "m_y" in spec or "m_z" in spec
    has_delta = "delta_y" in spec or "delta_z" in spec
    has_phi = "phi_max_over_2pi" in spec
    if has_m and has_delta and has_phi:
        raise ValidationError(
            f"{context}: grid is over-determined; give counts or steps with "
            "the maximal phase, or counts with steps, not all three"
        )
    if has_m and not (has_delta or has_phi):
        raise ValidationError(f"{context}: step counts need steps or a maximal phase")
    if has_delta and not (has_m or has_phi):
        raise ValidationError(f"{context}: steps need counts or a maximal phase")
    if not (has_m or has_delta):
        raise ValidationError(f"{context}: grid spec needs counts and/or steps")
    return dict(spec)


def grid_for_k(spec: dict, k: int) -> GridParams:
    """Materialize one grid spec at iteration count ``k``.

    Three forms are accepted: fixed counts with a target maximal phase
    (steps adjusted), fixed steps with a target maximal phase (counts
    adjusted), and fully explicit counts plus steps.
    """
    if "phi_max_over_2pi" in spec:
        phi = _as_float(spec["phi_max_over_2pi"], "grid.phi_max_over_2pi")
        if "m_y" in spec:
            return GridParams.from_phi_max(
                k,
                _as_int(spec["m_y"], "grid.m_y"),
                _as_int(spec["m_z"], "grid.m_z"),
                phi,
                skew=_as_float(spec.get("skew", 1.0), "grid.skew"),
            )
        return GridParams.from_deltas(
            k,
            _as_float(spec["delta_y"], "grid.delta_y"),
            _as_float(spec["delta_z"], "grid.delta_z"),
            phi,
        )
    return GridParams(
        k=k,
        m_y=_as_int(spec["m_y"], "grid.m_y"),
        m_z=_as_int(spec["m_z"], "grid.m_z"),
        delta_y=_as_float(spec["delta_y"], "grid.delta_y"),
        delta_z=_as_float(spec["delta_z"], "grid.delta_z"),
    )


def _grid_label(spec: dict) -> str:
    if "phi_max_over_2pi" in spec:
        proc = "fixed_m" if "m_y" in spec else "fixed_delta"
        return f"{proc}:{spec['phi_max_over_2pi']:g}"
    return (
        f"explicit:{spec['m_y']}x{spec['m_z']}"
        f"@{spec['delta_y']:g}x{spec['delta_z']:g}"
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a system, grids, iteration counts, and providers.

    Built from a JSON document via :meth:`from_dict` / :meth:`from_file`;
    field semantics are documented in the repository README along with the
    bundled examples.
    """

    kind: str
    system: dict
    shift_e0: float
    k_range: tuple[int, ...]
    grids: tuple[dict, ...]
    evolution: dict = field(default_factory=lambda: {"backend": "exact"})
    overlaps: dict = field(default_factory=lambda: {"provider": "exact"})
    noise: NoiseConfig | None = None
    observables: dict | None = None
    skews: tuple[float, ...] = ()
    output: dict | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ValidationError(f"config must be a JSON object, got {type(raw).__name__}")
        kind = _require(raw, "kind", "config")
        if kind not in EXPERIMENT_KINDS:
            raise ValidationError(
                f"config.kind must be one of {EXPERIMENT_KINDS}, got {kind!r}"
            )
        system = _require(raw, "system", "config")
        if not isinstance(system, dict):
            raise ValidationError("config.system must be an object")
        sys_type = _require(system, "type", "config.system")
        if sys_type not in SYSTEM_TYPES:
            raise ValidationError(
                f"config.system.type must be one of {SYSTEM_TYPES}, got {sys_type!r}"
            )
        shift_e0 = _as_float(_require(raw, "shift_e0", "config"), "config.shift_e0")
        k_range = _k_range(_require(raw, "k_range", "config"))

        raw_grids = raw.get("grids")
        if raw_grids is None:
            raw_grids = [_require(raw, "grid", "config")]
        if not isinstance(raw_grids, list) or not raw_grids:
            raise ValidationError("config.grids must be a non-empty list")
        grids = tuple(
            _check_grid_spec(g, f"config.grids[{i}]") for i, g in enumerate(raw_grids)
        )

        evolution = raw.get("evolution", {"backend": "exact"})
        if not isinstance(evolution, dict):
            raise ValidationError("config.evolution must be an object")
        backend = evolution.get("backend", "exact")
        if backend not in ("exact", "trotter"):
            raise ValidationError(
                f"config.evolution.backend must be 'exact' or 'trotter', got {backend!r}"
            )

        overlaps = raw.get("overlaps", {"provider": "exact"})
        if not isinstance(overlaps, dict):
            raise ValidationError("config.overlaps must be an object")
        provider = overlaps.get("provider", "exact")
        if provider not in PROVIDER_TYPES:
            raise ValidationError(
                f"config.overlaps.provider must be one of {PROVIDER_TYPES}, "
                f"got {provider!r}"
            )

        noise = None
        if raw.get("noise") is not None:
            noise = _noise_config(raw["noise"])
        if kind == "noise" and noise is None:
            raise ValidationError("kind 'noise' requires a noise block")
        if provider == "noisy" and noise is None:
            raise ValidationError("the noisy overlap provider requires a noise block")

        observables = raw.get("observables")
        if observables is not None:
            if not isinstance(observables, dict):
                raise ValidationError("config.observables must be an object")
            _as_int(_require(observables, "c", "config.observables"), "observables.c")
            r_list = _require(observables, "r", "config.observables")
            if not isinstance(r_list, list) or not r_list:
                raise ValidationError("config.observables.r must be a non-empty list")
            for r in r_list:
                _as_int(r, "observables.r entry")
            if sys_type != "bose_hubbard":
                raise ValidationError(
                    "site correlations are defined for the bose_hubbard system only"
                )

        skews = tuple(
            _as_float(s, "config.skews entry") for s in raw.get("skews", [])
        )
        if kind == "skew_sweep":
            if not skews:
                raise ValidationError("kind 'skew_sweep' requires a non-empty skews list")
            if len(grids) != 1 or "phi_max_over_2pi" not in grids[0] or "m_y" not in grids[0]:
                raise ValidationError(
                    "skew_sweep requires exactly one grid spec with step counts "
                    "and a fixed phi_max_over_2pi"
                )

        output = raw.get("output")
        if output is not None:
            if not isinstance(output, dict):
                raise ValidationError("config.output must be an object")
            _require(output, "path", "config.output")
            fmt = output.get("format", "csv")
            if fmt != "csv":
                raise ValidationError(f"config.output.format must be 'csv', got {fmt!r}")

        known = {
            "kind", "system", "shift_e0", "k_range", "grid", "grids",
            "evolution", "overlaps", "noise", "observables", "skews", "output",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"config: unknown top-level keys {sorted(unknown)}")

        return cls(
            kind=kind,
            system=dict(system),
            shift_e0=shift_e0,
            k_range=k_range,
            grids=grids,
            evolution=dict(evolution),
            overlaps=dict(overlaps),
            noise=noise,
            observables=dict(observables) if observables is not None else None,
            skews=skews,
            output=dict(output) if output is not None else None,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed JSON in config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def canonical_dict(self) -> dict:
        """Semantically complete config content, excluding the output sink."""
        data: dict[str, Any] = {
            "kind": self.kind,
            "system": self.system,
            "shift_e0": self.shift_e0,
            "k_range": list(self.k_range),
            "grids": [dict(g) for g in self.grids],
            "evolution": self.evolution,
            "overlaps": self.overlaps,
        }
        if self.noise is not None:
            data["noise"] = {
                "gamma_sweep": list(self.noise.gamma_sweep),
                "gamma_min": self.noise.gamma_min,
                "trajectories": self.noise.n_trajectories,
                "seed": self.noise.master_seed,
                "gamma": self.noise.gamma,
            }
        if self.observables is not None:
            data["observables"] = self.observables
        if self.skews:
            data["skews"] = list(self.skews)
        return data

    def config_hash(self) -> str:
        payload = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _noise_config(raw: Any) -> NoiseConfig:
    """Noise block: gamma_sweep, gamma_min, trajectories, seed, extrap_orders."""
    if not isinstance(raw, dict):
        raise ValidationError("config.noise must be an object")
    known = {"gamma_sweep", "gamma_min", "trajectories", "seed", "extrap_orders", "gamma"}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"config.noise: unknown keys {sorted(unknown)}")
    orders = raw.get("extrap_orders", [1, 3])
    if list(orders) != [1, 3]:
        raise ValidationError(
            f"config.noise.extrap_orders: only [1, 3] is supported, got {orders!r}"
        )
    kwargs: dict[str, Any] = {}
    if "gamma_sweep" in raw:
        sweep = raw["gamma_sweep"]
        if not isinstance(sweep, list) or not sweep:
            raise ValidationError("config.noise.gamma_sweep must be a non-empty list")
        kwargs["gamma_sweep"] = tuple(
            _as_float(g, "noise.gamma_sweep entry") for g in sweep
        )
    if "gamma_min" in raw:
        kwargs["gamma_min"] = _as_float(raw["gamma_min"], "noise.gamma_min")
    if "trajectories" in raw:
        kwargs["n_trajectories"] = _as_int(raw["trajectories"], "noise.trajectories")
    if "seed" in raw:
        kwargs["master_seed"] = _as_int(raw["seed"], "noise.seed")
    if "gamma" in raw:
        kwargs["gamma"] = _as_float(raw["gamma"], "noise.gamma")
    elif "gamma_min" in kwargs:
        kwargs["gamma"] = kwargs["gamma_min"]
    return NoiseConfig(**kwargs)


# --- system construction ----------------------------------------------------


def _system_variants(cfg: ExperimentConfig) -> list[SimpleNamespace]:
    """Concrete operator/state bundles for each system variant.

    Sweep-valued system parameters (the tunneling ratio list of the
    Bose-Hubbard model) produce one variant per value; molecular systems
    produce a single variant.  Each variant carries the shifted operator,
    the initial state, the Pauli form when one exists (needed for product
    formulas), and the Fock basis when one exists (needed for correlators).
    """
    sys_type = cfg.system["type"]
    if sys_type in ("h2", "beh2", "pauli_file"):
        if sys_type == "h2":
            pauli = build_h2()
            psi0 = h2_hartree_fock_state()
        elif sys_type == "beh2":
            pauli = load_pauli_sum(locate_beh2_file())
            psi0 = StateVector.basis_state(2**pauli.n_qubits, _BEH2_HF_INDEX)
        else:
            pauli = load_pauli_sum(_require(cfg.system, "path", "config.system"))
            init = cfg.system.get("initial_state")
            if init is None:
                raise ValidationError(
                    "config.system: pauli_file systems need an initial_state "
                    'object, e.g. {"basis_index": 3}'
                )
            idx = _as_int(
                _require(init, "basis_index", "config.system.initial_state"),
                "initial_state.basis_index",
            )
            psi0 = StateVector.basis_state(2**pauli.n_qubits, idx)
        op = to_dense(pauli).shift(cfg.shift_e0)
        return [
            SimpleNamespace(labels={"system": sys_type}, op=op, psi0=psi0,
                            pauli=pauli, basis=None)
        ]

    params = cfg.system
    sites = _as_int(_require(params, "sites", "config.system"), "system.sites")
    n_max = _as_int(_require(params, "n_max", "config.system"), "system.n_max")
    total = params.get("total")
    total_n = None if total is None else _as_int(total, "system.total")
    mu = _as_float(params.get("mu_over_u", 0.0), "system.mu_over_u")
    boundary = params.get("boundary", "open")
    raw_j = _require(params, "j_over_u", "config.system")
    j_values = raw_j if isinstance(raw_j, list) else [raw_j]
    basis = build_fock_basis(sites, n_max, total_n=total_n)
    psi0 = mott_state(basis)
    variants = []
    for j in j_values:
        ju = _as_float(j, "system.j_over_u entry")
        op = build_bose_hubbard(
            basis,
            BoseHubbardParams(J=ju, U=1.0, mu=mu, e0=cfg.shift_e0, boundary=boundary),
        )
        variants.append(
            SimpleNamespace(labels={"system": "bose_hubbard", "j_over_u": ju},
                            op=op, psi0=psi0, pauli=None, basis=basis)
        )
    return variants


def _reference_state(cfg: ExperimentConfig, op: HermitianOperator) -> StateVector:
    idx = _as_int(cfg.overlaps.get("reference_index", 0), "overlaps.reference_index")
    return StateVector.basis_state(op.dim, idx)


def _backend_for(cfg: ExperimentConfig, variant: SimpleNamespace,
                 n_steps: int | None = None) -> EvolutionBackend | None:
    if cfg.evolution.get("backend", "exact") == "exact" and n_steps is None:
        return None
    if variant.pauli is None:
        raise ValidationError(
            "product-formula evolution needs a Pauli-sum system; the "
            "Bose-Hubbard model is available only with the exact backend"
        )
    steps = n_steps if n_steps is not None else _as_int(
        _require(cfg.evolution, "n_steps", "config.evolution"), "evolution.n_steps"
    )
    return TrotterBackend.from_pauli_sum(variant.pauli, steps, operator=variant.op)


def _provider_for(cfg: ExperimentConfig, variant: SimpleNamespace,
                  backend: EvolutionBackend | None) -> OverlapProvider:
    name = cfg.overlaps.get("provider", "exact")
    if name == "exact":
        if backend is not None:
            raise ValidationError(
                "the exact overlap provider is spectral and cannot represent "
                "product-formula evolution; use the protocol provider"
            )
        return ExactOverlapProvider(op=variant.op, psi0=variant.psi0)
    psi_r = _reference_state(cfg, variant.op)
    mode = cfg.overlaps.get("mode", "direct")
    if name == "protocol":
        shots = cfg.overlaps.get("shots")
        return ProtocolOverlapProvider(
            op=variant.op,
            psi0=variant.psi0,
            psi_r=psi_r,
            mode=mode,
            backend=backend,
            n_shots=None if shots is None else _as_int(shots, "overlaps.shots"),
            seed=cfg.overlaps.get("seed"),
        )
    if backend is not None:
        raise ValidationError("the noisy provider evolves exactly between jumps; "
                              "product-formula evolution is not supported")
    assert cfg.noise is not None
    return NoisyOverlapProvider(
        op=variant.op, psi0=variant.psi0, psi_r=psi_r, noise=cfg.noise, mode=mode
    )


# --- result table -----------------------------------------------------------


@dataclass
class ResultTable:
    """Rows plus the metadata needed to reproduce them bit-for-bit."""

    kind: str
    columns: tuple[str, ...]
    rows: list[tuple]
    metadata: dict

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """Write the CSV table and its JSON metadata sidecar."""
        path = Path(path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            writer.writerows(self.rows)
        sidecar = path.with_suffix(".meta.json")
        sidecar.write_text(
            json.dumps(self.metadata, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        return path, sidecar


def _metadata(cfg: ExperimentConfig) -> dict:
    meta = {
        "kind": cfg.kind,
        "config_hash": cfg.config_hash(),
        "tool_version": _tool_version(),
        "config": cfg.canonical_dict(),
    }
    seeds = {}
    if cfg.noise is not None:
        seeds["noise_master_seed"] = cfg.noise.master_seed
    if cfg.overlaps.get("seed") is not None:
        seeds["overlap_shot_seed"] = cfg.overlaps["seed"]
    if seeds:
        meta["seeds"] = seeds
    return meta


# --- experiment kinds -------------------------------------------------------


def _variant_columns(variants: list[SimpleNamespace]) -> tuple[str, ...]:
    keys: list[str] = []
    for v in variants:
        for key in v.labels:
            if key not in keys:
                keys.append(key)
    return tuple(keys)


def _run_iterate(cfg: ExperimentConfig) -> ResultTable:
    variants = _system_variants(cfg)
    var_cols = _variant_columns(variants)
    obs_cols: tuple[str, ...] = ()
    if cfg.observables is not None:
        obs_cols = tuple(f"corr_r{r}" for r in cfg.observables["r"])
    columns = var_cols + ("grid",) + IterationReport.CSV_COLUMNS + obs_cols
    rows: list[tuple] = []
    for variant in variants:
        backend = _backend_for(cfg, variant)
        provider = _provider_for(cfg, variant, backend)
        obs_ops = []
        if cfg.observables is not None:
            c = cfg.observables["c"]
            obs_ops = [
                correlation_operator(variant.basis, c, _as_int(r, "observables.r"))
                for r in cfg.observables["r"]
            ]
        for spec in cfg.grids:
            label = _grid_label(spec)
            for k in cfg.k_range:
                ledger = dedup_phases(build_series(grid_for_k(spec, k)))
                report = estimate_energy(variant.op, variant.psi0, ledger, provider)
                extras = tuple(
                    estimate_observable(a, variant.op, variant.psi0, ledger, provider)
                    for a in obs_ops
                )
                rows.append(
                    tuple(variant.labels.get(c, "") for c in var_cols)
                    + (label,)
                    + report.csv_row()
                    + extras
                )
    return ResultTable(cfg.kind, columns, rows, _metadata(cfg))


def _run_skew_sweep(cfg: ExperimentConfig, skews: tuple[float, ...]) -> ResultTable:
    variants = _system_variants(cfg)
    if len(variants) != 1:
        raise ValidationError("skew_sweep expects a single system variant")
    variant = variants[0]
    backend = _backend_for(cfg, variant)
    provider = _provider_for(cfg, variant, backend)
    spec = cfg.grids[0]
    phi = _as_float(spec["phi_max_over_2pi"], "grid.phi_max_over_2pi")
    m_y = _as_int(spec["m_y"], "grid.m_y")
    m_z = _as_int(spec["m_z"], "grid.m_z")
    columns = ("skew", "k", "phi_max_over_2pi", "delta_lambda", "trace_distance")
    rows: list[tuple] = []
    inv_cache: dict[int, np.ndarray] = {}
    for skew in skews:
        for k in cfg.k_range:
            grid = GridParams.from_phi_max(k, m_y, m_z, phi, skew=skew)
            series = build_series(grid)
            ledger = dedup_phases(series)
            report = estimate_energy(variant.op, variant.psi0, ledger, provider)
            if k not in inv_cache:
                lam = variant.op.eigenvalues
                vecs = variant.op.eigenvectors
                inv_cache[k] = (vecs * lam**-float(k)) @ vecs.conj().T
            approx = materialize_inverse(series, variant.op)
            dist = trace_distance(inv_cache[k], approx)
            rows.append(
                (skew, k, grid.phi_max_over_2pi, report.delta_lambda, dist)
            )
    return ResultTable(cfg.kind, columns, rows, _metadata(cfg))


def _run_trotter(cfg: ExperimentConfig) -> ResultTable:
    variants = _system_variants(cfg)
    if len(variants) != 1:
        raise ValidationError("trotter experiments expect a single system variant")
    variant = variants[0]
    steps_raw = cfg.evolution.get("n_steps_list") or [
        _require(cfg.evolution, "n_steps", "config.evolution")
    ]
    if not isinstance(steps_raw, list) or not steps_raw:
        raise ValidationError("config.evolution.n_steps_list must be a non-empty list")
    steps_list = [_as_int(s, "evolution.n_steps_list entry") for s in steps_raw]

    base = ExactOverlapProvider(op=variant.op, psi0=variant.psi0)
    gs = variant.op.ground_energy()
    columns = (
        "grid", "k", "n_steps", "lambda_trotter", "lambda_exact",
        "trotter_minus_exact", "delta_lambda",
    )
    rows: list[tuple] = []
    for spec in cfg.grids:
        label = _grid_label(spec)
        for k in cfg.k_range:
            ledger = dedup_phases(build_series(grid_for_k(spec, k)))
            exact_report = estimate_energy(variant.op, variant.psi0, ledger, base)
            for n_steps in steps_list:
                backend = _backend_for(cfg, variant, n_steps=n_steps)
                provider = ProtocolOverlapProvider(
                    op=variant.op,
                    psi0=variant.psi0,
                    psi_r=_reference_state(cfg, variant.op),
                    mode=cfg.overlaps.get("mode", "direct"),
                    backend=backend,
                )
                report = estimate_energy(variant.op, variant.psi0, ledger, provider)
                rows.append(
                    (
                        label, k, n_steps, report.lambda_est,
                        exact_report.lambda_est,
                        report.lambda_est - exact_report.lambda_est,
                        report.lambda_est - gs,
                    )
                )
    return ResultTable(cfg.kind, columns, rows, _metadata(cfg))


def _run_noise(cfg: ExperimentConfig) -> ResultTable:
    variants = _system_variants(cfg)
    if len(variants) != 1:
        raise ValidationError("noise experiments expect a single system variant")
    variant = variants[0]
    assert cfg.noise is not None
    spec = cfg.grids[0]
    ledgers: dict[int, PhaseLedger] = {
        k: dedup_phases(build_series(grid_for_k(spec, k))) for k in cfg.k_range
    }
    result = mitigation_pipeline(
        variant.op, variant.psi0, _reference_state(cfg, variant.op), ledgers, cfg.noise
    )
    columns = (
        "k", "lambda_direct", "lambda_indirect", "lambda_mitigated",
        "lambda_noiseless", "delta_direct", "delta_indirect",
        "delta_mitigated", "delta_noiseless",
    )
    rows = [tuple(row[c] for c in columns) for row in result.per_k]
    return ResultTable(cfg.kind, columns, rows, _metadata(cfg))


# --- entry points -----------------------------------------------------------


def run(config: ExperimentConfig) -> ResultTable:
    """Execute one experiment; write its table when an output is configured."""
    if config.kind == "iterate":
        table = _run_iterate(config)
    elif config.kind == "skew_sweep":
        table = _run_skew_sweep(config, config.skews)
    elif config.kind == "trotter":
        table = _run_trotter(config)
    else:
        table = _run_noise(config)
    if config.output is not None:
        path, sidecar = table.write(config.output["path"])
        print(f"{config.kind}: {len(table.rows)} rows -> {path} (metadata {sidecar})")
    else:
        print(f"{config.kind}: {len(table.rows)} rows (no output path configured)")
    return table


def run_skew_sweep(config: ExperimentConfig,
                   skews: list[float] | tuple[float, ...] | None = None) -> ResultTable:
    """Skew sweep with an optional override of the skew list."""
    chosen = tuple(float(s) for s in skews) if skews is not None else config.skews
    if not chosen:
        raise ValidationError("run_skew_sweep needs a non-empty skew list")
    table = _run_skew_sweep(config, chosen)
    if config.output is not None:
        path, sidecar = table.write(config.output["path"])
        print(f"skew_sweep: {len(table.rows)} rows -> {path} (metadata {sidecar})")
    return table
