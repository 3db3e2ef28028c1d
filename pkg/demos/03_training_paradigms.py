"""
Four training paradigms and two baselines on one corpus
=======================================================

The same question, asked under four different data-availability regimes:
  post_hoc      train and score inside the finished target course
  same_field    train on the largest other course in the same field
  multi_course  average the hyperplanes of every other course's model
  in_situ       never look at certification at all; train on last-week
                activity proxies inside the live course
plus two floors: a demographics-only model (baseline1) and plain recency
(baseline2). Each paradigm produces one AUC per course per week.
"""

import numpy as np

from dropoutlab.dataset import CorpusConfig, SynthConfig, synthesize_corpus
from dropoutlab.evaluate import render_summary
from dropoutlab.paradigms import PARADIGMS, run_experiment

# a small two-field corpus (same_field needs at least one other course in
# the target's field); every course gets its own child seed
config = CorpusConfig(courses=(
    SynthConfig(course_id="PHYSx", field="STEM", n_students=300, weeks_to_t100=6),
    SynthConfig(course_id="CHEMx", field="STEM", n_students=260, weeks_to_t100=5),
    SynthConfig(course_id="POETx", field="Hum", n_students=280, weeks_to_t100=7),
    SynthConfig(course_id="HISTx", field="Hum", n_students=240, weeks_to_t100=5),
))
corpus = synthesize_corpus(config, seed=11)
for c in corpus:
    print(f"  {c.meta.course_id} ({c.meta.field}): {c.n_students} students, "
          f"launch {c.meta.launch_date}")

# run every paradigm over every course and eligible week; jobs > 1 gives
# the identical report, just faster
report = run_experiment(corpus, PARADIGMS, jobs=2)
print(f"\n{len(report.rows)} (paradigm, course, week) cells scored, "
      f"{len(report.skipped)} skipped")

# mean AUC per paradigm, pooling all courses and weeks
print("\ngrand mean AUC per paradigm:")
for kind in PARADIGMS:
    vals = [r.auc for r in report.rows if r.paradigm == kind]
    print(f"  {kind:13s} {np.mean(vals):.4f}  ({len(vals)} cells)")

# the weekly view: week 0 is the full-points date, negative weeks are
# earlier snapshots with less accumulated signal
print()
print(render_summary(report))
