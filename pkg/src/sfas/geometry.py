"""Array geometry and steering-vector families for a scalable-aperture ULA.

All lengths are expressed in carrier wavelengths (lambda = 1), so spacings,
positions, apertures and source ranges are directly comparable across
configurations.  Angles are radians internally; degrees appear only at
user-facing interfaces (see :mod:`sfas.harness`).

Two coordinate frames appear in this package.  The steering formulas here
(:func:`esg_distance`, :func:`esg_steering`, :func:`fresnel_steering`) take
(angle, range) measured at the first element, which sits at position 0 and
pins the first steering entry to exactly 1.  Scenario-level code describes
sources relative to the *array center* instead, because the physical array
stretches and compresses about its center while sources stay put;
:func:`to_element_frame` converts, and :func:`esg_manifold_centered`
evaluates the exact steering directly over center-frame grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ArrayConfig",
    "SourceTruth",
    "element_positions",
    "array_center",
    "aperture",
    "rayleigh_distance",
    "fresnel_lower_bound",
    "esg_distance",
    "esg_steering",
    "ff_steering",
    "fresnel_steering",
    "ff_manifold",
    "esg_manifold",
    "to_element_frame",
    "esg_steering_centered",
    "esg_manifold_centered",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array whose inter-element spacing scales by a factor.

    Attributes
    ----------
    element_count:
        Number of elements M (at least 2).
    baseline_spacing:
        Baseline spacing d0 in wavelengths (default half-wavelength).
    scale:
        Scaling factor applied to the baseline spacing; < 1 compresses the
        array, > 1 extends it.
    """

    element_count: int
    baseline_spacing: float = 0.5
    scale: float = 1.0

    def __post_init__(self):
        if self.element_count < 2:
            raise ValueError(f"element_count must be >= 2, got {self.element_count}")
        if self.baseline_spacing <= 0:
            raise ValueError(f"baseline_spacing must be > 0, got {self.baseline_spacing}")
        if self.scale <= 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")

    @property
    def spacing(self) -> float:
        """Actual inter-element spacing in wavelengths."""
        return self.scale * self.baseline_spacing

    def with_scale(self, scale: float) -> "ArrayConfig":
        return ArrayConfig(self.element_count, self.baseline_spacing, scale)


@dataclass(frozen=True)
class SourceTruth:
    """Ground-truth source location and power.

    The (angle, range) pair is read in whatever frame the consumer
    documents: scenarios locate sources relative to the array center,
    while the steering formulas below use the first element as origin
    (:func:`to_element_frame` maps between them).

    Attributes
    ----------
    angle:
        Direction of arrival in radians, strictly inside (-pi/2, pi/2).
    range:
        Distance from the frame origin in wavelengths, > 0.
    power:
        Source signal power, > 0.
    """

    angle: float
    range: float
    power: float = 1.0

    def __post_init__(self):
        if not -np.pi / 2 < self.angle < np.pi / 2:
            raise ValueError(f"angle must lie in (-pi/2, pi/2) rad, got {self.angle}")
        if self.range <= 0:
            raise ValueError(f"range must be > 0, got {self.range}")
        if self.power <= 0:
            raise ValueError(f"power must be > 0, got {self.power}")

    @classmethod
    def from_degrees(cls, angle_deg: float, range_wl: float, power: float = 1.0) -> "SourceTruth":
        return cls(np.deg2rad(angle_deg), range_wl, power)

    @property
    def angle_deg(self) -> float:
        return float(np.rad2deg(self.angle))


def element_positions(config: ArrayConfig) -> np.ndarray:
    """Element positions [0, d, 2d, ...] in wavelengths for spacing d."""
    return np.arange(config.element_count) * config.spacing


def aperture(config: ArrayConfig) -> float:
    """Total array aperture (M-1)*d in wavelengths."""
    return (config.element_count - 1) * config.spacing


def array_center(config: ArrayConfig) -> float:
    """Midpoint of the element positions, (M-1)*d/2 in wavelengths."""
    return 0.5 * aperture(config)


def rayleigh_distance(config: ArrayConfig) -> float:
    """Near/far-field boundary 2*D^2/lambda in wavelengths.

    Scales with the square of the configuration scale factor.
    """
    d = aperture(config)
    return 2.0 * d * d


def fresnel_lower_bound(config: ArrayConfig) -> float:
    """Lower edge 0.62*sqrt(D^3/lambda) of the Fresnel region, in wavelengths.

    Exposed for diagnostics only; no estimator branches on it.
    """
    return 0.62 * np.sqrt(aperture(config) ** 3)


def esg_distance(source: SourceTruth, position) -> np.ndarray | float:
    """Exact source-to-element distance sqrt(r^2 + p^2 - 2*r*p*sin(theta)).

    `position` may be a scalar or an array of element positions (wavelengths).
    Raises ValueError if the source coincides with an element (radicand <= 0),
    which can only happen at |theta| = pi/2 with r equal to the position.
    """
    p = np.asarray(position, dtype=float)
    r = source.range
    radicand = r * r + p * p - 2.0 * r * p * np.sin(source.angle)
    if np.any(radicand <= 0.0):
        raise ValueError(
            f"source at (theta={source.angle}, r={source.range}) coincides with an element"
        )
    out = np.sqrt(radicand)
    return out if out.ndim else float(out)


def esg_steering(source: SourceTruth, config: ArrayConfig) -> np.ndarray:
    """Exact spatial-geometry steering vector, valid at any range.

    Entry m is (r / r_m) * exp(j*2*pi*(r_m - r)) with r_m the exact distance
    from the source to element m.  The first entry is exactly 1 because the
    reference element sits at the origin.
    """
    dist = esg_distance(source, element_positions(config))
    vec = (source.range / dist) * np.exp(1j * TWO_PI * (dist - source.range))
    vec[0] = 1.0 + 0.0j
    return vec


def ff_steering(angle: float, config: ArrayConfig) -> np.ndarray:
    """Planar-wavefront steering vector exp(-j*2*pi*(m-1)*d*sin(theta)).

    Unit-magnitude entries; accurate only far beyond the Rayleigh distance.
    """
    phase = -TWO_PI * element_positions(config) * np.sin(angle)
    return np.exp(1j * phase)


def fresnel_steering(source: SourceTruth, config: ArrayConfig) -> np.ndarray:
    """Second-order (Fresnel) near-field approximation of the steering vector.

    Entry m is exp(-j*2*pi*(m-1)*d*sin(theta) + j*pi*((m-1)*d)^2*cos(theta)^2/r):
    the quadratic wavefront-curvature correction on top of the planar term.
    """
    p = element_positions(config)
    sin_t = np.sin(source.angle)
    cos_t = np.cos(source.angle)
    phase = -TWO_PI * p * sin_t + np.pi * p * p * cos_t * cos_t / source.range
    return np.exp(1j * phase)


def ff_manifold(angles: np.ndarray, config: ArrayConfig) -> np.ndarray:
    """Far-field manifold, shape (M, len(angles)); angles in radians."""
    p = element_positions(config)
    return np.exp(-1j * TWO_PI * np.outer(p, np.sin(np.asarray(angles, dtype=float))))


def esg_manifold(angles: np.ndarray, ranges: np.ndarray, config: ArrayConfig) -> np.ndarray:
    """Exact-geometry manifold over paired (angle, range) points.

    `angles` (radians) and `ranges` (wavelengths) must have equal length G;
    returns shape (M, G).  The first row is pinned to exactly 1.
    """
    return _manifold_from_positions(angles, ranges, element_positions(config))


def _manifold_from_positions(angles, ranges, positions: np.ndarray) -> np.ndarray:
    """Steering columns for sources at (angle, range) from `positions`' frame
    origin, normalized so the row of the first element is exactly 1."""
    th = np.asarray(angles, dtype=float)
    r = np.asarray(ranges, dtype=float)
    if th.shape != r.shape:
        raise ValueError(f"angles and ranges must pair up, got {th.shape} vs {r.shape}")
    p = positions[:, None]
    radicand = r * r + p * p - 2.0 * r * p * np.sin(th)
    dist = np.sqrt(np.maximum(radicand, np.finfo(float).tiny))
    man = (dist[0] / dist) * np.exp(1j * TWO_PI * (dist - dist[0]))
    man[0, :] = 1.0 + 0.0j
    return man


def to_element_frame(source: SourceTruth, config: ArrayConfig) -> SourceTruth:
    """Re-express a center-frame source relative to the first element.

    A source at (theta, r) from the array center sits at distance
    sqrt(r^2 + c^2 + 2*r*c*sin(theta)) from the first element (c is the
    center offset); the returned SourceTruth feeds the element-frame
    steering formulas and describes the identical physical location.
    """
    c = array_center(config)
    x = source.range * np.sin(source.angle) + c
    y = source.range * np.cos(source.angle)
    return SourceTruth(float(np.arctan2(x, y)), float(np.hypot(x, y)), source.power)


def esg_steering_centered(source: SourceTruth, config: ArrayConfig) -> np.ndarray:
    """Exact steering for a source located relative to the array center.

    Identical physical channel as :func:`esg_steering` after
    :func:`to_element_frame`; the first entry stays exactly 1.
    """
    return esg_steering(to_element_frame(source, config), config)


def esg_manifold_centered(angles, ranges, config: ArrayConfig) -> np.ndarray:
    """Exact-geometry manifold over paired center-frame (angle, range) points.

    Equivalent to converting every grid point through
    :func:`to_element_frame`; implemented directly with center-offset
    element positions for speed.  Shape (M, G), first row exactly 1.
    """
    return _manifold_from_positions(
        angles, ranges, element_positions(config) - array_center(config)
    )
