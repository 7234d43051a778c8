"""Walk through the bundled two-stage trial and compute all ten intervals.

The trial crossed neither boundary at the interim look (Z1 = 2.540 < 2.797)
and rejected at the final analysis (Z2 = 2.718 > 1.977).  Conditional methods
correct for the selection implied by having continued: their point estimates
sit above the overall MLE and their intervals are wider.
"""
import numpy as np

from seqci import (
    MUSEC_DATA,
    MUSEC_DESIGN,
    analyze_trial,
    adjusted_asymptotic_ci,
    conditional_likelihood_ci,
    exact_ci,
    exact_conditional_ci,
    parametric_bootstrap_ci,
    penalised_likelihood_ci,
    randomisation_ci,
    repeated_ci,
    restricted_exact_conditional_ci,
    wald_ci,
)

trial = analyze_trial(MUSEC_DESIGN, MUSEC_DATA)
print(f"interim:  Z1 = {trial.stage1.z:.3f}  (boundary {MUSEC_DESIGN.e1})")
print(f"final:    Z2 = {trial.stage2.z:.3f}  (boundary {MUSEC_DESIGN.e2})")
print(f"overall MLE = {trial.theta_hat:.4f}, informations I1 = {trial.info1:.1f}, "
      f"I2 = {trial.info2:.1f}\n")


def stream(k):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=1, spawn_key=(k,))))


B = 200_000
results = [
    ("Wald (standard)", wald_ci(MUSEC_DESIGN, trial)),
    ("Exact (stagewise)", exact_ci(MUSEC_DESIGN, trial)),
    ("Repeated", repeated_ci(MUSEC_DESIGN, trial)),
    ("Adjusted asymptotic", adjusted_asymptotic_ci(MUSEC_DESIGN, trial)),
    ("Parametric bootstrap", parametric_bootstrap_ci(MUSEC_DESIGN, trial, B, stream(0))),
    ("Randomisation-based", randomisation_ci(MUSEC_DESIGN, trial, B, stream(1))),
    ("Conditional exact", exact_conditional_ci(MUSEC_DESIGN, trial)),
    ("Restricted conditional exact", restricted_exact_conditional_ci(MUSEC_DESIGN, trial)),
    ("Conditional likelihood", conditional_likelihood_ci(MUSEC_DESIGN, trial, B, stream(2))),
    ("Penalised likelihood", penalised_likelihood_ci(MUSEC_DESIGN, trial, B, stream(2))),
]

print(f"{'method':<30}{'point':>7}   {'95% CI':>16}   width")
for name, res in results:
    pt = "-" if res.point is None else f"{res.point:.3f}"
    print(f"{name:<30}{pt:>7}   ({res.lower:.3f}, {res.upper:.3f})   {res.width:.3f}")
