"""Two-stage subspace localization plus baselines and scoring utilities.

Stage 1 runs a far-field MUSIC scan on the central subarray of the
compressed-configuration covariance, where coupling reduces to a per-source
diagonal factor and grating lobes cannot occur.  Stage 2 takes each coarse
angle to the extended configuration: a 1-D range scan with the exact
spatial-geometry steering seeds a windowed 2-D search that refines angle
and range together.  A rank-reduction variant replaces the stage-2 spectrum
when residual coupling in the extended configuration cannot be ignored.

Angles cross this module's public surface in degrees; ranges are in
wavelengths; both are measured from the array center, the scenario frame
shared by every configuration of the same physical array.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import ArrayConfig, esg_manifold_centered, ff_manifold
from .simulate import CovarianceEstimate, SnapshotBlock, sample_covariance

__all__ = [
    "EstimatorSettings",
    "SubspaceDecomposition",
    "SpectrumGrid",
    "DegenerateSubspaceError",
    "UnderResolutionError",
    "decompose",
    "find_spectrum_peaks",
    "stage1_music",
    "stage2_range_search",
    "stage2_refine",
    "mc_music_spectrum",
    "mc_music_refine",
    "baseline_ff_music",
    "oracle_2d_music",
    "pair_estimates",
    "two_stage_localize",
    "RangeSearchResult",
    "RefineResult",
    "SourceEstimate",
    "LocalizationEstimate",
    "PairingResult",
]


class DegenerateSubspaceError(RuntimeError):
    """Signal/noise eigenvalue split is numerically ambiguous."""


class UnderResolutionError(RuntimeError):
    """Fewer spectrum peaks than sources.  Carries the peaks that were found."""

    def __init__(self, needed: int, peaks_found):
        self.needed = needed
        self.peaks_found = np.asarray(peaks_found, dtype=float)
        super().__init__(
            f"found {len(self.peaks_found)} separated peaks, need {needed}"
        )


@dataclass(frozen=True)
class EstimatorSettings:
    """Grids, windows and peak policy for the two-stage search.

    `trim` of None defers to the coupling band of the scenario in play.
    The two refinement passes use (angle step in degrees, range step as a
    fraction of the initial range estimate).
    """

    trim: int | None = None
    angle_min_deg: float = -90.0
    angle_max_deg: float = 90.0
    angle_step_deg: float = 0.1
    range_min: float = 5.0
    range_max: float = 2.0e4
    range_points: int = 200
    window_angle_deg: float = 2.0
    window_range_fraction: float = 0.3
    pass1_angle_step_deg: float = 0.05
    pass1_range_fraction: float = 0.01
    pass2_angle_step_deg: float = 0.005
    pass2_range_fraction: float = 0.001
    min_peak_separation_deg: float = 1.0
    flat_spectrum_ratio: float = 3.0

    def angle_grid_deg(self) -> np.ndarray:
        return _step_grid(self.angle_min_deg, self.angle_max_deg, self.angle_step_deg)

    def range_grid(self) -> np.ndarray:
        return np.geomspace(self.range_min, self.range_max, self.range_points)

    def resolve_trim(self, coupling_band: int) -> int:
        return self.trim if self.trim is not None else coupling_band


def _step_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid lo..hi; integer-ratio steps divide exactly so that
    round decimals (e.g. 10.0 at step 0.1) appear as exact grid values."""
    denom = round(1.0 / step)
    if denom >= 1 and abs(denom * step - 1.0) < 1e-9:
        return np.arange(round(lo * denom), round(hi * denom) + 1) / denom
    n = int(np.floor((hi - lo) / step + 1e-12))
    return lo + step * np.arange(n + 1)


@dataclass(frozen=True)
class SubspaceDecomposition:
    """Eigen-split of a covariance into signal and noise subspaces."""

    eigenvalues: np.ndarray
    signal_basis: np.ndarray
    noise_basis: np.ndarray

    @property
    def source_count(self) -> int:
        return self.signal_basis.shape[1]


@dataclass(frozen=True)
class SpectrumGrid:
    """Sampled pseudo-spectrum over one or two strictly increasing axes."""

    axes: tuple[np.ndarray, ...]
    axis_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.axes) != len(self.axis_names):
            raise ValueError("one name per axis required")
        if self.values.shape != tuple(len(a) for a in self.axes):
            raise ValueError(
                f"values shape {self.values.shape} does not match axes"
            )
        for ax in self.axes:
            if len(ax) > 1 and not np.all(np.diff(ax) > 0):
                raise ValueError("axes must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrum values must be finite")


def decompose(covariance: CovarianceEstimate, source_count: int) -> SubspaceDecomposition:
    """Eigendecomposition sorted descending, split after `source_count` values.

    Raises DegenerateSubspaceError when the split falls inside a numerically
    repeated eigenvalue (relative gap below 1e-8), e.g. on an identity
    covariance, where any subspace split would be arbitrary.
    """
    mat = covariance.matrix
    if source_count < 1 or source_count >= mat.shape[0]:
        raise ValueError(
            f"source_count must be in [1, {mat.shape[0] - 1}], got {source_count}"
        )
    vals, vecs = np.linalg.eigh(mat)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    gap = vals[source_count - 1] - vals[source_count]
    scale = max(abs(vals[0]), np.finfo(float).tiny)
    if gap <= 1e-8 * scale:
        raise DegenerateSubspaceError(
            f"eigenvalues {source_count} and {source_count + 1} coincide "
            f"(relative gap {gap / scale:.2e}); subspace split is ambiguous"
        )
    return SubspaceDecomposition(
        eigenvalues=vals,
        signal_basis=vecs[:, :source_count],
        noise_basis=vecs[:, source_count:],
    )


def _noise_quadratic(noise_basis: np.ndarray, manifold: np.ndarray) -> np.ndarray:
    """||U_n^H a||^2 per manifold column; the MUSIC denominator."""
    proj = noise_basis.conj().T @ manifold
    return np.einsum("ij,ij->j", proj.conj(), proj).real


def _spectrum(denominator: np.ndarray) -> np.ndarray:
    return 1.0 / np.maximum(denominator, np.finfo(float).tiny)


def find_spectrum_peaks(
    axis: np.ndarray,
    values: np.ndarray,
    count: int,
    min_separation: float = 1.0,
) -> np.ndarray:
    """The `count` dominant interior local maxima, ascending.

    A peak must strictly exceed both neighbors; candidates are taken in
    order of decreasing value (ties toward the smaller axis position) and
    a candidate closer than `min_separation` to an accepted peak is
    dropped as a sidelobe.  Raises UnderResolutionError when fewer than
    `count` survive.
    """
    interior = np.flatnonzero(
        (values[1:-1] > values[:-2]) & (values[1:-1] > values[2:])
    ) + 1
    order = sorted(interior, key=lambda i: (-values[i], axis[i]))
    accepted: list[int] = []
    for i in order:
        if all(abs(axis[i] - axis[j]) >= min_separation - 1e-12 for j in accepted):
            accepted.append(i)
            if len(accepted) == count:
                break
    if len(accepted) < count:
        raise UnderResolutionError(count, np.sort(axis[accepted]))
    return np.sort(axis[accepted])


def stage1_music(
    block: SnapshotBlock,
    trim: int,
    source_count: int,
    angle_grid_deg: np.ndarray | None = None,
    min_peak_separation_deg: float = 1.0,
) -> tuple[SpectrumGrid, np.ndarray]:
    """Coarse angles from the compressed configuration.

    Selects the central M - 2*trim rows/columns of the sample covariance,
    decomposes, and scans the matching rows of the far-field manifold.
    Returns the spectrum and the `source_count` peak angles in degrees.
    """
    m = block.config.element_count
    if m - 2 * trim <= source_count:
        raise ValueError(
            f"trim {trim} leaves {m - 2 * trim} elements for {source_count} sources"
        )
    if angle_grid_deg is None:
        angle_grid_deg = EstimatorSettings().angle_grid_deg()
    cov = sample_covariance(block)
    central = cov.matrix[trim : m - trim, trim : m - trim]
    decomp = decompose(CovarianceEstimate(central, cov.snapshot_count), source_count)
    manifold = ff_manifold(np.deg2rad(angle_grid_deg), block.config)[trim : m - trim, :]
    values = _spectrum(_noise_quadratic(decomp.noise_basis, manifold))
    grid = SpectrumGrid((angle_grid_deg,), ("angle_deg",), values)
    coarse = find_spectrum_peaks(
        angle_grid_deg, values, source_count, min_peak_separation_deg
    )
    return grid, coarse


@dataclass(frozen=True)
class RangeSearchResult:
    spectrum: SpectrumGrid
    initial_range: float
    flat_spectrum: bool


def stage2_range_search(
    decomp_extended: SubspaceDecomposition,
    coarse_angle_deg: float,
    range_grid: np.ndarray,
    config_extended: ArrayConfig,
    flat_spectrum_ratio: float = 3.0,
) -> RangeSearchResult:
    """1-D exact-geometry MUSIC scan in range at a fixed coarse angle.

    The global maximum of the scan seeds the 2-D refinement.  When the peak
    barely rises above the spectrum's median (ratio below
    `flat_spectrum_ratio`) the source is effectively planar and the result
    is flagged: its range is reported but carries little information.
    """
    theta = np.deg2rad(coarse_angle_deg)
    manifold = esg_manifold_centered(
        np.full(len(range_grid), theta), np.asarray(range_grid, float), config_extended
    )
    values = _spectrum(_noise_quadratic(decomp_extended.noise_basis, manifold))
    best = int(np.argmax(values))
    flat = bool(values[best] < flat_spectrum_ratio * np.median(values))
    grid = SpectrumGrid((np.asarray(range_grid, float),), ("range_wl",), values)
    return RangeSearchResult(grid, float(range_grid[best]), flat)


@dataclass(frozen=True)
class RefineResult:
    angle_deg: float
    range_wl: float
    spectrum: SpectrumGrid
    boundary_hit: bool


def _window_grid(center: float, halfwidth: float, step: float, lo: float, hi: float) -> np.ndarray:
    n = int(round(halfwidth / step))
    grid = center + step * np.arange(-n, n + 1)
    grid = grid[(grid >= lo - 1e-12) & (grid <= hi + 1e-12)]
    return np.clip(grid, lo, hi)


def _parabolic_vertex(d_lo: float, d_mid: float, d_hi: float) -> float:
    """Sub-grid offset (in grid steps) of the minimum of a 3-point parabola."""
    curvature = d_lo - 2.0 * d_mid + d_hi
    if curvature <= 0.0:
        return 0.0
    return float(np.clip(0.5 * (d_lo - d_hi) / curvature, -1.0, 1.0))


def _quadratic_vertex_2d(patch: np.ndarray) -> tuple[float, float]:
    """Sub-grid offsets of the minimum of a quadratic fit to a 3x3 patch.

    Least-squares fit of d = p0 + p1 x + p2 y + p3 x^2 + p4 y^2 + p5 xy on
    unit-spaced offsets; exact for any quadratic surface, cross term
    included, which matters on tilted angle/range ridges.  Falls back to
    per-axis parabolas when the fitted Hessian is not positive definite.
    """
    x, y = np.meshgrid((-1.0, 0.0, 1.0), (-1.0, 0.0, 1.0), indexing="ij")
    x = x.ravel()
    y = y.ravel()
    basis = np.column_stack([np.ones(9), x, y, x * x, y * y, x * y])
    p, *_ = np.linalg.lstsq(basis, patch.ravel(), rcond=None)
    hess = np.array([[2.0 * p[3], p[5]], [p[5], 2.0 * p[4]]])
    det = hess[0, 0] * hess[1, 1] - hess[0, 1] * hess[1, 0]
    if hess[0, 0] <= 0.0 or det <= 0.0:
        return (
            _parabolic_vertex(patch[0, 1], patch[1, 1], patch[2, 1]),
            _parabolic_vertex(patch[1, 0], patch[1, 1], patch[1, 2]),
        )
    dx, dy = np.linalg.solve(hess, [-p[1], -p[2]])
    return float(np.clip(dx, -1.0, 1.0)), float(np.clip(dy, -1.0, 1.0))


def _refine_search(
    denominator_fn,
    coarse_angle_deg: float,
    initial_range: float,
    settings: EstimatorSettings,
) -> RefineResult:
    """Two-pass windowed grid minimization of a spectrum denominator.

    Pass 2 re-grids around the pass-1 cell, then a per-axis parabolic fit
    pulls the estimate off the grid; every candidate stays inside the
    window around (coarse angle, initial range) by construction.
    """
    ang_lo = coarse_angle_deg - settings.window_angle_deg
    ang_hi = coarse_angle_deg + settings.window_angle_deg
    rng_halfwidth = settings.window_range_fraction * initial_range
    rng_lo = initial_range - rng_halfwidth
    rng_hi = initial_range + rng_halfwidth

    def run_pass(center_a, center_r, half_a, half_r, step_a, step_r):
        angles = _window_grid(center_a, half_a, step_a, ang_lo, ang_hi)
        ranges = _window_grid(center_r, half_r, step_r, rng_lo, rng_hi)
        denom = denominator_fn(np.deg2rad(angles), ranges)
        i, j = np.unravel_index(np.argmin(denom), denom.shape)
        return angles, ranges, denom, int(i), int(j)

    step1_r = settings.pass1_range_fraction * initial_range
    angles1, ranges1, denom1, i1, j1 = run_pass(
        coarse_angle_deg,
        initial_range,
        settings.window_angle_deg,
        rng_halfwidth,
        settings.pass1_angle_step_deg,
        step1_r,
    )
    pass1 = SpectrumGrid(
        (angles1, ranges1), ("angle_deg", "range_wl"), _spectrum(denom1)
    )

    step2_r = settings.pass2_range_fraction * initial_range
    angles2, ranges2, denom2, i2, j2 = run_pass(
        angles1[i1],
        ranges1[j1],
        1.5 * settings.pass1_angle_step_deg,
        1.5 * step1_r,
        settings.pass2_angle_step_deg,
        step2_r,
    )

    angle = angles2[i2]
    rng = ranges2[j2]
    interior_a = 0 < i2 < len(angles2) - 1
    interior_r = 0 < j2 < len(ranges2) - 1
    if interior_a and interior_r:
        da, dr = _quadratic_vertex_2d(denom2[i2 - 1 : i2 + 2, j2 - 1 : j2 + 2])
        angle += settings.pass2_angle_step_deg * da
        rng += step2_r * dr
    elif interior_a:
        angle += settings.pass2_angle_step_deg * _parabolic_vertex(
            denom2[i2 - 1, j2], denom2[i2, j2], denom2[i2 + 1, j2]
        )
    elif interior_r:
        rng += step2_r * _parabolic_vertex(
            denom2[i2, j2 - 1], denom2[i2, j2], denom2[i2, j2 + 1]
        )
    angle = float(np.clip(angle, ang_lo, ang_hi))
    rng = float(np.clip(rng, rng_lo, rng_hi))

    edge_a = min(angle - ang_lo, ang_hi - angle) < 0.5 * settings.pass2_angle_step_deg
    edge_r = min(rng - rng_lo, rng_hi - rng) < 0.5 * step2_r
    boundary_hit = bool(edge_a or edge_r)
    if boundary_hit:
        warnings.warn(
            f"refined estimate ({angle:.4f} deg, {rng:.4f} wl) sits on the "
            "search-window edge; widen the windows",
            RuntimeWarning,
            stacklevel=3,
        )
    return RefineResult(angle, rng, pass1, boundary_hit)


def _music_denominator_fn(decomp: SubspaceDecomposition, config: ArrayConfig):
    def fn(angles_rad: np.ndarray, ranges: np.ndarray) -> np.ndarray:
        mesh_t, mesh_r = np.meshgrid(angles_rad, ranges, indexing="ij")
        manifold = esg_manifold_centered(mesh_t.ravel(), mesh_r.ravel(), config)
        denom = _noise_quadratic(decomp.noise_basis, manifold)
        return denom.reshape(len(angles_rad), len(ranges))

    return fn


def stage2_refine(
    decomp_extended: SubspaceDecomposition,
    coarse_angle_deg: float,
    initial_range: float,
    config_extended: ArrayConfig,
    settings: EstimatorSettings = EstimatorSettings(),
) -> RefineResult:
    """Windowed 2-D exact-geometry MUSIC refinement around the stage-1 seed.

    The refined pair always satisfies |angle - coarse| <= window_angle_deg
    and |range - initial| <= window_range_fraction * initial.
    """
    return _refine_search(
        _music_denominator_fn(decomp_extended, config_extended),
        coarse_angle_deg,
        initial_range,
        settings,
    )


def _mc_transform_batch(manifold: np.ndarray, band: int) -> np.ndarray:
    """Stack of transforms T with columns [a, shift(a,-q)+shift(a,+q)]_q.

    For a banded complex-symmetric Toeplitz coupling C with coefficient
    vector c = [1, c_1, ..., c_P], C @ a equals T @ c for every a, which is
    what lets the spectrum search over coupled steering without knowing c.
    `manifold` is (M, G); returns (G, M, band + 1).
    """
    m, g = manifold.shape
    t = np.zeros((g, m, band + 1), dtype=complex)
    a = manifold.T
    t[:, :, 0] = a
    for q in range(1, band + 1):
        t[:, q:, q] += a[:, : m - q]
        t[:, : m - q, q] += a[:, q:]
    return t


def _mc_min_eigenvalues(
    decomp: SubspaceDecomposition, manifold: np.ndarray, band: int
) -> np.ndarray:
    t = _mc_transform_batch(manifold, band)
    proj = np.einsum("mn,gmp->gnp", decomp.noise_basis.conj(), t)
    quad = np.einsum("gnp,gnq->gpq", proj.conj(), proj)
    return np.linalg.eigvalsh(quad)[:, 0].real


def mc_music_spectrum(
    decomp_extended: SubspaceDecomposition,
    angle_deg: float,
    range_wl: float,
    band: int,
    config_extended: ArrayConfig,
) -> float:
    """Coupling-robust spectrum value 1/lambda_min(T^H U_n U_n^H T).

    At a true source location the quadratic form is rank-deficient for any
    banded symmetric coupling of bandwidth <= `band`, so the spectrum peaks
    there regardless of the unknown coupling coefficients.
    """
    if band < 1:
        raise ValueError(f"band must be >= 1, got {band}")
    manifold = esg_manifold_centered(
        np.array([np.deg2rad(angle_deg)]), np.array([float(range_wl)]), config_extended
    )
    lam = _mc_min_eigenvalues(decomp_extended, manifold, band)
    return float(_spectrum(lam)[0])


def mc_music_refine(
    decomp_extended: SubspaceDecomposition,
    coarse_angle_deg: float,
    initial_range: float,
    band: int,
    config_extended: ArrayConfig,
    settings: EstimatorSettings = EstimatorSettings(),
) -> RefineResult:
    """Windowed 2-D refinement maximizing the coupling-robust spectrum."""
    if band < 1:
        raise ValueError(f"band must be >= 1, got {band}")

    def denominator(angles_rad: np.ndarray, ranges: np.ndarray) -> np.ndarray:
        mesh_t, mesh_r = np.meshgrid(angles_rad, ranges, indexing="ij")
        manifold = esg_manifold_centered(mesh_t.ravel(), mesh_r.ravel(), config_extended)
        lam = _mc_min_eigenvalues(decomp_extended, manifold, band)
        return lam.reshape(len(angles_rad), len(ranges))

    return _refine_search(denominator, coarse_angle_deg, initial_range, settings)


def baseline_ff_music(
    block: SnapshotBlock,
    source_count: int,
    angle_grid_deg: np.ndarray | None = None,
) -> SpectrumGrid:
    """Conventional far-field MUSIC on the full, unsmoothed covariance.

    Comparison baseline for a fixed half-wavelength array; peaks (when
    resolvable) come from :func:`find_spectrum_peaks`.
    """
    if angle_grid_deg is None:
        angle_grid_deg = EstimatorSettings().angle_grid_deg()
    decomp = decompose(sample_covariance(block), source_count)
    manifold = ff_manifold(np.deg2rad(angle_grid_deg), block.config)
    values = _spectrum(_noise_quadratic(decomp.noise_basis, manifold))
    return SpectrumGrid((angle_grid_deg,), ("angle_deg",), values)


def oracle_2d_music(
    block_extended: SnapshotBlock,
    source_count: int,
    angle_grid_deg: np.ndarray | None = None,
    range_grid: np.ndarray | None = None,
    min_peak_separation_deg: float = 1.0,
) -> tuple[list[tuple[float, float]], SpectrumGrid]:
    """Exhaustive 2-D exact-geometry MUSIC over the full grid.

    Brute-force reference for the two-stage decomposition: returns the
    `source_count` dominant 2-D local maxima (strictly above all eight
    neighbors, deduplicated by angle separation) sorted by angle, plus the
    full spectrum.
    """
    settings = EstimatorSettings()
    if angle_grid_deg is None:
        angle_grid_deg = settings.angle_grid_deg()
    if range_grid is None:
        range_grid = settings.range_grid()
    decomp = decompose(sample_covariance(block_extended), source_count)
    angles_rad = np.deg2rad(angle_grid_deg)
    denom = np.empty((len(angle_grid_deg), len(range_grid)))
    chunk = max(1, 131072 // len(range_grid))
    for start in range(0, len(angles_rad), chunk):
        part = angles_rad[start : start + chunk]
        mesh_t, mesh_r = np.meshgrid(part, range_grid, indexing="ij")
        manifold = esg_manifold_centered(mesh_t.ravel(), mesh_r.ravel(), block_extended.config)
        denom[start : start + chunk, :] = _noise_quadratic(
            decomp.noise_basis, manifold
        ).reshape(len(part), len(range_grid))
    values = _spectrum(denom)

    core = values[1:-1, 1:-1]
    mask = np.ones_like(core, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            mask &= core > values[1 + di : values.shape[0] - 1 + di,
                                  1 + dj : values.shape[1] - 1 + dj]
    cand_i, cand_j = np.nonzero(mask)
    cand_i += 1
    cand_j += 1
    order = sorted(
        range(len(cand_i)),
        key=lambda n: (-values[cand_i[n], cand_j[n]], angle_grid_deg[cand_i[n]]),
    )
    accepted: list[tuple[float, float]] = []
    for n in order:
        ang = float(angle_grid_deg[cand_i[n]])
        if all(abs(ang - a) >= min_peak_separation_deg - 1e-12 for a, _ in accepted):
            accepted.append((ang, float(range_grid[cand_j[n]])))
            if len(accepted) == source_count:
                break
    if len(accepted) < source_count:
        raise UnderResolutionError(
            source_count, np.sort([a for a, _ in accepted])
        )
    grid = SpectrumGrid(
        (np.asarray(angle_grid_deg, float), np.asarray(range_grid, float)),
        ("angle_deg", "range_wl"),
        values,
    )
    return sorted(accepted), grid


@dataclass(frozen=True)
class PairingResult:
    """Truth-ordered assignment of estimates and the signed errors."""

    assignment: np.ndarray
    angle_errors: np.ndarray
    range_errors: np.ndarray | None


def pair_estimates(
    estimated_angles_deg,
    true_angles_deg,
    estimated_ranges=None,
    true_ranges=None,
) -> PairingResult:
    """Match estimates to truth by minimum total angular error.

    Solved exactly (Hungarian assignment) for any source count.  Entry k of
    the outputs refers to truth source k; errors are signed
    (estimate - truth).
    """
    est = np.atleast_1d(np.asarray(estimated_angles_deg, dtype=float))
    true = np.atleast_1d(np.asarray(true_angles_deg, dtype=float))
    if est.shape != true.shape:
        raise ValueError(f"got {len(est)} estimates for {len(true)} sources")
    cost = np.abs(est[:, None] - true[None, :])
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(len(true), dtype=int)
    assignment[cols] = rows
    angle_errors = est[assignment] - true
    range_errors = None
    if estimated_ranges is not None and true_ranges is not None:
        est_r = np.atleast_1d(np.asarray(estimated_ranges, dtype=float))
        true_r = np.atleast_1d(np.asarray(true_ranges, dtype=float))
        range_errors = est_r[assignment] - true_r
    return PairingResult(assignment, angle_errors, range_errors)


@dataclass(frozen=True)
class SourceEstimate:
    """Stage-1 and stage-2 outputs for one detected source."""

    coarse_angle_deg: float
    initial_range: float
    refined_angle_deg: float
    refined_range: float
    range_flat: bool
    boundary_hit: bool


@dataclass(frozen=True)
class LocalizationEstimate:
    """Full two-stage output with the search windows that produced it."""

    sources: tuple[SourceEstimate, ...]
    window_angle_deg: float
    window_range_fraction: float

    @property
    def coarse_angles_deg(self) -> np.ndarray:
        return np.array([s.coarse_angle_deg for s in self.sources])

    @property
    def refined_angles_deg(self) -> np.ndarray:
        return np.array([s.refined_angle_deg for s in self.sources])

    @property
    def refined_ranges(self) -> np.ndarray:
        return np.array([s.refined_range for s in self.sources])


def two_stage_localize(
    block_compressed: SnapshotBlock,
    block_extended: SnapshotBlock,
    source_count: int,
    trim: int,
    settings: EstimatorSettings = EstimatorSettings(),
    mc_band: int | None = None,
) -> LocalizationEstimate:
    """Run the complete pipeline on one pair of snapshot blocks.

    With `mc_band` set, the 2-D refinement uses the coupling-robust
    rank-reduction spectrum instead of the plain exact-geometry one.
    """
    _, coarse = stage1_music(
        block_compressed,
        trim,
        source_count,
        settings.angle_grid_deg(),
        settings.min_peak_separation_deg,
    )
    decomp = decompose(sample_covariance(block_extended), source_count)
    range_grid = settings.range_grid()
    results = []
    for angle in coarse:
        search = stage2_range_search(
            decomp,
            float(angle),
            range_grid,
            block_extended.config,
            settings.flat_spectrum_ratio,
        )
        if mc_band is None:
            refined = stage2_refine(
                decomp, float(angle), search.initial_range,
                block_extended.config, settings,
            )
        else:
            refined = mc_music_refine(
                decomp, float(angle), search.initial_range,
                mc_band, block_extended.config, settings,
            )
        results.append(
            SourceEstimate(
                coarse_angle_deg=float(angle),
                initial_range=search.initial_range,
                refined_angle_deg=refined.angle_deg,
                refined_range=refined.range_wl,
                range_flat=search.flat_spectrum,
                boundary_hit=refined.boundary_hit,
            )
        )
    return LocalizationEstimate(
        tuple(results), settings.window_angle_deg, settings.window_range_fraction
    )
