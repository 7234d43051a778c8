"""Benchmark the interval methods by simulation at the case-study rates.

Generates trial replicates binomially, applies every method to each
replicate, and tabulates coverage, width, test-decision consistency and
miss rates -- overall and conditional on the stopping stage.  Desk-scale
sizes here; raise N and B (and workers) for publication-grade precision.
"""
from seqci import MUSEC_DESIGN, Scenario, evaluate_metrics
from seqci.simulation import stop_rate
from seqci.trial import SIMULATABLE_METHODS

scenario = Scenario(
    design=MUSEC_DESIGN,
    p_ctrl=21 / 134,          # placebo response rate observed in the trial
    p_trt=42 / 143,           # active-arm rate: a true effect of ~0.137
    n_replicates=20_000,
    bootstrap_b=2_000,
    methods=SIMULATABLE_METHODS,
    seed=7,
)

rate, se = stop_rate(scenario, workers=4)
print(f"P(stop at stage 1) = {rate:.3f} (se {se:.3f})\n")

rows = evaluate_metrics(scenario, workers=4)
for cond in ("overall", "stage1", "stage2"):
    print(f"--- {cond} ---")
    print(f"{'method':<30}{'coverage':>9}{'width':>8}{'(sd)':>8}{'consis':>8}{'P(L>t)':>8}{'P(U<t)':>8}")
    for r in rows:
        if r.conditioning != cond:
            continue
        print(f"{r.method.value:<30}{r.coverage:9.3f}{r.width_mean:8.3f}{r.width_sd:8.3f}"
              f"{r.consistency:8.3f}{r.lower_miss:8.3f}{r.upper_miss:8.3f}")
    print()

print("note: a method's n_effective excludes replicates where it failed")
print("(information decrease etc.); failures are counted per row.")
