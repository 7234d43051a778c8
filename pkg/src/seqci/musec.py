"""Bundled case-study dataset: the MUSEC two-stage trial.

Interim analysis after 97 placebo / 101 active patients (12 and 27 responders);
final analysis at 134 / 143 cumulative (21 and 42 responders).  Efficacy
boundaries 2.797 and 1.977 on the Z scale, two-sided 95% intervals.  The trial
continued to stage 2; the standardised statistics are 2.540 and 2.718.
"""
from __future__ import annotations

from .trial import Design, TrialData

__all__ = ["MUSEC_DESIGN", "MUSEC_DATA"]

MUSEC_DESIGN = Design(
    n1_ctrl=97,
    n1_trt=101,
    n2_ctrl=134,
    n2_trt=143,
    e1=2.797,
    e2=1.977,
    alpha=0.05,
)

# stage-2 counts are incremental: 21-12=9 and 42-27=15
MUSEC_DATA = TrialData(s1_ctrl=12, s1_trt=27, s2_ctrl=9, s2_trt=15)
