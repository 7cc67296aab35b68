"""Ground-truth snapshot generation and sample covariance estimation.

Scenario sources are located by (angle, range) from the *array center*:
the array stretches and compresses about its center while sources stay
put, so the center is the one reference shared by both configurations.
Data is always synthesized from the exact-geometry propagation model (the
far-field form is an estimator-side approximation, never the truth), with
coupling applied in the compressed configuration and optionally in the
extended one.  Every random draw comes from a named stream keyed by
(seed, trial, stage, role[, source]), so adding sources, snapshots or
stages never perturbs the draws of the others and trials can run in any
order on any number of workers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .coupling import CouplingModel, coupling_matrix
from .geometry import ArrayConfig, SourceTruth, array_center, esg_steering_centered

__all__ = [
    "Scenario",
    "SnapshotBlock",
    "CovarianceEstimate",
    "generate_snapshots_compressed",
    "generate_snapshots_extended",
    "generate_snapshots_baseline",
    "sample_covariance",
    "save_snapshot_block",
    "load_snapshot_block",
]

_STAGE_CODES = {"compressed": 0, "extended": 1, "baseline": 2}
_ROLE_SIGNAL = 0
_ROLE_NOISE = 1


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulated localization problem."""

    sources: tuple[SourceTruth, ...]
    config_compressed: ArrayConfig = ArrayConfig(32, 0.5, 0.2)
    config_extended: ArrayConfig = ArrayConfig(32, 0.5, 2.0)
    coupling: CouplingModel = CouplingModel()
    coupling_extended: CouplingModel | None = None
    snapshots: int = 500
    snr_db: float = 0.0
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        problems = self.validation_errors()
        if problems:
            raise ValueError("invalid scenario: " + "; ".join(problems))

    def validation_errors(self) -> list[str]:
        """All violated invariants, as human-readable messages.

        A source-free scenario is legal (pure-noise data for covariance
        sanity checks); estimators demand at least one source themselves.
        """
        problems = []
        if self.config_compressed.scale >= 1.0:
            problems.append(
                f"compressed scale must be < 1, got {self.config_compressed.scale}"
            )
        if self.config_extended.scale <= 1.0:
            problems.append(
                f"extended scale must be > 1, got {self.config_extended.scale}"
            )
        if self.config_compressed.element_count != self.config_extended.element_count:
            problems.append("both configurations must share the element count")
        if self.config_compressed.baseline_spacing != self.config_extended.baseline_spacing:
            problems.append("both configurations must share the baseline spacing")
        m = self.config_compressed.element_count
        k = len(self.sources)
        if k >= m - 2 * self.coupling.band:
            problems.append(
                f"{k} sources exceed the identifiability limit "
                f"M - 2*band - 1 = {m - 2 * self.coupling.band - 1}"
            )
        # Center-frame ranges must clear the half-aperture even when extended,
        # otherwise the source sits on top of the array.
        reach = array_center(self.config_extended)
        for i, src in enumerate(self.sources):
            if src.range <= reach:
                problems.append(
                    f"source {i} range {src.range} is inside the extended "
                    f"half-aperture {reach}"
                )
        if self.snapshots < 1:
            problems.append(f"snapshots must be >= 1, got {self.snapshots}")
        return problems

    @property
    def source_count(self) -> int:
        return len(self.sources)

    @property
    def noise_variance(self) -> float:
        """Noise power from SNR relative to unit source power; inf SNR means noiseless."""
        if np.isinf(self.snr_db):
            return 0.0
        return float(10.0 ** (-self.snr_db / 10.0))

    def with_snr(self, snr_db: float) -> "Scenario":
        return replace(self, snr_db=snr_db)

    def with_snapshots(self, snapshots: int) -> "Scenario":
        return replace(self, snapshots=int(snapshots))


@dataclass(frozen=True)
class SnapshotBlock:
    """M x N complex observations plus the noise variance they were drawn with."""

    data: np.ndarray
    noise_variance: float
    config: ArrayConfig

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] != self.config.element_count:
            raise ValueError(
                f"data shape {self.data.shape} does not match M={self.config.element_count}"
            )

    @property
    def snapshot_count(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CovarianceEstimate:
    """Hermitian sample covariance and the number of snapshots behind it."""

    matrix: np.ndarray
    snapshot_count: int


def _stream(seed: int, trial: int, stage: str, role: int, sub: int = 0) -> np.random.Generator:
    key = (int(trial), _STAGE_CODES[stage], int(role), int(sub))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


def _signal_matrix(scenario: Scenario, trial: int, stage: str) -> np.ndarray:
    """K x N effective signals: unit-variance circular Gaussian rows scaled by sqrt(power).

    Each source draws from its own stream, snapshot-major, so the first N
    snapshots are identical across runs that only differ in N or K.
    """
    n = scenario.snapshots
    rows = []
    for k, src in enumerate(scenario.sources):
        pairs = _stream(scenario.seed, trial, stage, _ROLE_SIGNAL, k).standard_normal((n, 2))
        rows.append(np.sqrt(src.power / 2.0) * (pairs[:, 0] + 1j * pairs[:, 1]))
    if not rows:
        return np.zeros((0, n), dtype=complex)
    return np.asarray(rows)


def _noise_matrix(scenario: Scenario, trial: int, stage: str, m: int) -> np.ndarray:
    var = scenario.noise_variance
    if var == 0.0:
        return np.zeros((m, scenario.snapshots), dtype=complex)
    pairs = _stream(scenario.seed, trial, stage, _ROLE_NOISE).standard_normal(
        (scenario.snapshots, m, 2)
    )
    return np.sqrt(var / 2.0) * (pairs[:, :, 0] + 1j * pairs[:, :, 1]).T


def _channel_matrix(scenario: Scenario, config: ArrayConfig, model: CouplingModel | None) -> np.ndarray:
    if not scenario.sources:
        return np.zeros((config.element_count, 0), dtype=complex)
    steering = np.column_stack(
        [esg_steering_centered(src, config) for src in scenario.sources]
    )
    if model is None or model.reference_strength == 0.0:
        return steering
    return coupling_matrix(config, model) @ steering


def generate_snapshots_compressed(scenario: Scenario, trial: int = 0) -> SnapshotBlock:
    """Coupled exact-geometry snapshots from the compressed configuration."""
    config = scenario.config_compressed
    channel = _channel_matrix(scenario, config, scenario.coupling)
    data = channel @ _signal_matrix(scenario, trial, "compressed")
    data = data + _noise_matrix(scenario, trial, "compressed", config.element_count)
    return SnapshotBlock(data, scenario.noise_variance, config)


def generate_snapshots_extended(
    scenario: Scenario, include_coupling: bool = False, trial: int = 0
) -> SnapshotBlock:
    """Extended-configuration snapshots; coupling only on request.

    With coupling enabled the scenario's `coupling_extended` model is used
    when present, otherwise the compressed-stage model re-evaluated at the
    extended spacing.  Signal and noise realizations are independent of the
    compressed stage (fresh streams), while the source positions are shared.
    """
    config = scenario.config_extended
    model = None
    if include_coupling:
        model = scenario.coupling_extended or scenario.coupling
    channel = _channel_matrix(scenario, config, model)
    data = channel @ _signal_matrix(scenario, trial, "extended")
    data = data + _noise_matrix(scenario, trial, "extended", config.element_count)
    return SnapshotBlock(data, scenario.noise_variance, config)


def generate_snapshots_baseline(scenario: Scenario, trial: int = 0) -> SnapshotBlock:
    """Snapshots from a fixed half-wavelength array (scale 1), uncoupled.

    Reference data for the conventional far-field MUSIC comparison.
    """
    config = scenario.config_compressed.with_scale(1.0)
    channel = _channel_matrix(scenario, config, None)
    data = channel @ _signal_matrix(scenario, trial, "baseline")
    data = data + _noise_matrix(scenario, trial, "baseline", config.element_count)
    return SnapshotBlock(data, scenario.noise_variance, config)


def sample_covariance(block: SnapshotBlock) -> CovarianceEstimate:
    """(1/N) X X^H, forced exactly Hermitian against rounding drift."""
    n = block.snapshot_count
    mat = block.data @ block.data.conj().T / n
    mat = 0.5 * (mat + mat.conj().T)
    return CovarianceEstimate(mat, n)


# Binary snapshot interchange: little-endian header
#   magic "SFASBLK1", uint8 dtype (0: complex64, 1: complex128),
#   uint32 M, uint32 N, float64 noise_variance, float64 scale,
#   float64 baseline_spacing
# followed by row-major complex data (interleaved re/im pairs).
_MAGIC = b"SFASBLK1"
_HEADER = struct.Struct("<8sBIIddd")


def save_snapshot_block(block: SnapshotBlock, path, dtype=np.complex128) -> None:
    dtype = np.dtype(dtype)
    code = {np.dtype(np.complex64): 0, np.dtype(np.complex128): 1}[dtype]
    header = _HEADER.pack(
        _MAGIC,
        code,
        block.config.element_count,
        block.snapshot_count,
        block.noise_variance,
        block.config.scale,
        block.config.baseline_spacing,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(block.data.astype(dtype)).tobytes())


def load_snapshot_block(path) -> SnapshotBlock:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        magic, code, m, n, variance, scale, d0 = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a snapshot block file")
        dtype = {0: np.complex64, 1: np.complex128}[code]
        data = np.frombuffer(fh.read(), dtype=dtype).reshape(m, n).astype(np.complex128)
    return SnapshotBlock(data, variance, ArrayConfig(m, d0, scale))
