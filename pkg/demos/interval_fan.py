"""Show the interval fan for the first few simulated replicates.

Each replicate carries one interval per method, tagged with the stopping
stage and the rejection decision -- the raw material for fan/forest plots.
Note how much wider the conditional intervals become on replicates that
stopped early.
"""
from seqci import CiMethod, MUSEC_DESIGN, Scenario, replicate_snapshot

scenario = Scenario(
    design=MUSEC_DESIGN,
    p_ctrl=21 / 134,
    p_trt=42 / 143,
    n_replicates=10,
    bootstrap_b=2_000,
    methods=(CiMethod.WALD, CiMethod.REPEATED, CiMethod.CONDITIONAL_EXACT,
             CiMethod.PENALISED_LIKELIHOOD),
    seed=42,
)

records = replicate_snapshot(scenario, 10)
true_theta = scenario.true_theta
current = None
for rec in records:
    if rec.replicate != current:
        current = rec.replicate
        stage = "stopped at stage 1" if rec.stop_stage == 1 else "continued to stage 2"
        verdict = "reject" if rec.reject else "accept"
        print(f"\nreplicate {rec.replicate}: {stage}, {verdict}")
    covers = "covers" if rec.lower < true_theta < rec.upper else "MISSES"
    print(f"  {rec.method.value:<30} ({rec.lower:+.3f}, {rec.upper:+.3f})  {covers}")
