#!/usr/bin/env python3
"""Rank-reduction refinement when the extended array stays coupled.

When residual coupling contaminates the extended configuration, the plain
exact-geometry spectrum is biased because its steering ignores the
coupling.  The rank-reduction spectrum searches over all banded symmetric
couplings at once (minimum eigenvalue of a small transformed quadratic
form) and removes the bias without knowing the coefficients.
"""

import numpy as np

from sfas import CouplingModel, Scenario, SourceTruth
from sfas.estimators import EstimatorSettings, pair_estimates, two_stage_localize
from sfas.simulate import generate_snapshots_compressed, generate_snapshots_extended

scenario = Scenario(
    sources=(
        SourceTruth.from_degrees(-20.66, 30.0),
        SourceTruth.from_degrees(10.77, 200.0),
    ),
    coupling=CouplingModel(band=2),
    coupling_extended=CouplingModel(0.3, 1.0, 0.0, band=2, symmetric=True),
    snapshots=500,
    snr_db=10.0,
    seed=606,
)
settings = EstimatorSettings()
truth = np.array([s.angle_deg for s in scenario.sources])

print("Extended configuration with residual coupling (band 2, c0=0.3), SNR 10 dB")
print(f"truth angles: {truth}\n")

plain_err, robust_err = [], []
for trial in range(10):
    block_c = generate_snapshots_compressed(scenario, trial)
    block_e = generate_snapshots_extended(scenario, include_coupling=True, trial=trial)
    plain = two_stage_localize(block_c, block_e, 2, 2, settings)
    robust = two_stage_localize(block_c, block_e, 2, 2, settings, mc_band=2)
    plain_err.append(pair_estimates(plain.refined_angles_deg, truth).angle_errors)
    robust_err.append(pair_estimates(robust.refined_angles_deg, truth).angle_errors)

plain_err = np.abs(plain_err)
robust_err = np.abs(robust_err)
print(f"{'':>14} {'plain refine':>14} {'rank-reduction':>15}")
print(f"{'median err':>14} {np.median(plain_err):14.5f} {np.median(robust_err):15.5f}")
print(f"{'max err':>14} {np.max(plain_err):14.5f} {np.max(robust_err):15.5f}")
print("\nThe plain spectrum carries a systematic bias of a few hundredths of a")
print("degree; the robust search removes it at the cost of a small eigenvalue")
print("problem per grid point.")
