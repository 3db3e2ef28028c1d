"""Training paradigms and the weekly prediction schedule.

Week indexing is anchored to each course's T100% date (week 0); negative
weeks count backward toward launch. Four paradigms plus two baselines score
every enrolled student at each eligible week:

  post_hoc     train and score the target course with its own end-of-course
               labels (optimistic upper bound, unusable live)
  same_field   train on the largest same-field course, deploy cross-course
  multi_course train on every other course, average the hyperplanes
  in_situ      train during the course itself on persistence proxy labels;
               certification labels are structurally out of reach
  baseline1    demographics-only logistic regression
  baseline2    recency ranking, no learning
"""

from __future__ import annotations

import datetime
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import (
    CLICKSTREAM_FEATURES,
    ActivityTable,
    CourseData,
    CourseMeta,
    LabelSet,
    StudentDemographics,
    derive_labels,
)
from .errors import (
    BadValueError,
    BeforeLaunchError,
    InvalidParadigmError,
    SingleClassError,
    UnknownStudentError,
    WindowOutOfRangeError,
)
from .evaluate import EvalReport, EvalRow, auc_values, raw_accuracy
from .features import (
    apply_percentile,
    apply_zscore,
    build_matrix,
    fit_percentile,
    fit_zscore,
)
from .linear import (
    OptimizerConfig,
    ScoredStudents,
    average_hyperplanes,
    baseline_demographics,
    baseline_recency,
    predict_proba,
    score_demographics,
    train_logreg,
)

PARADIGMS: tuple[str, ...] = (
    "post_hoc", "same_field", "multi_course", "in_situ", "baseline1", "baseline2",
)

# Minimum days of data since launch before a paradigm can produce a model:
# post_hoc wants the first week of activity on record; in_situ needs a week of
# features plus the week that supplies proxy labels.
_MIN_DAYS: dict[str, int] = {
    "post_hoc": 7,
    "same_field": 0,
    "multi_course": 0,
    "in_situ": 14,
    "baseline1": 0,
    "baseline2": 0,
}


def week_date(meta: CourseMeta, w: int) -> datetime.date:
    """Calendar date of week w: t100_date + 7*w days (week 0 = T100%)."""
    d = meta.t100_date + datetime.timedelta(days=7 * w)
    if d < meta.launch_date:
        raise BeforeLaunchError(
            f"course {meta.course_id!r}: week {w} falls on {d}, "
            f"before launch {meta.launch_date}"
        )
    return d


def prediction_weeks(meta: CourseMeta, kind: str) -> list[int]:
    """Eligible week indices for a paradigm, earliest first, ending at 0."""
    if kind not in PARADIGMS:
        raise InvalidParadigmError(f"unknown paradigm {kind!r} (expected one of {PARADIGMS})")
    gap = (meta.t100_date - meta.launch_date).days
    min_days = _MIN_DAYS[kind]
    if gap < min_days:
        return []
    w_lo = -((gap - min_days) // 7)
    return list(range(w_lo, 1))


@dataclass(frozen=True)
class ProxyLabelSet:
    """Persistence stand-in labels: 1 iff the student acted during week w-1."""

    course_id: str
    week: int
    labels: Mapping[str, int]

    def vector(self, student_ids: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self.labels[s] for s in student_ids], dtype=np.float64)
        except KeyError as e:
            raise UnknownStudentError(f"no proxy label for student {e.args[0]!r}") from None


def proxy_labels(course: CourseData, w: int) -> ProxyLabelSet:
    """Label every student by activity (nevents > 0) in the 7 days before week w.

    The window [week_date(w)-7, week_date(w)-1] must lie inside
    [launch_date, t100_date].
    """
    meta = course.meta
    wd = meta.t100_date + datetime.timedelta(days=7 * w)
    lo = wd - datetime.timedelta(days=7)
    hi = wd - datetime.timedelta(days=1)
    if lo < meta.launch_date or hi > meta.t100_date:
        raise WindowOutOfRangeError(
            f"course {meta.course_id!r}: proxy window [{lo}, {hi}] not inside "
            f"[{meta.launch_date}, {meta.t100_date}]"
        )
    lo_off, hi_off = course.day_offset(lo), course.day_offset(hi)
    table = course.activity
    nevents = table.values[:, CLICKSTREAM_FEATURES.index("nevents")]
    mask = (table.day >= lo_off) & (table.day <= hi_off) & (nevents > 0)
    active = np.zeros(course.n_students, dtype=bool)
    active[table.student_index[mask]] = True
    labels = {sid: int(active[i]) for i, sid in enumerate(course.student_ids)}
    return ProxyLabelSet(meta.course_id, w, labels)


@dataclass(frozen=True)
class ParadigmSpec:
    """One paradigm instance: what to score and which courses may train it."""

    kind: str
    target_course: str
    source_courses: tuple[str, ...] = ()


def _corpus_index(corpus: Sequence[CourseData]) -> dict[str, CourseData]:
    by_id = {c.meta.course_id: c for c in corpus}
    if len(by_id) != len(corpus):
        raise BadValueError("corpus contains duplicate course ids")
    return by_id


def largest_same_field_source(corpus: Sequence[CourseData], target_id: str) -> str | None:
    """The biggest other course sharing the target's field; ties go to the
    lexicographically smaller course_id. None when the field is unique."""
    by_id = _corpus_index(corpus)
    target = by_id[target_id]
    candidates = [
        c for c in corpus
        if c.meta.course_id != target_id and c.meta.field == target.meta.field
    ]
    if not candidates:
        return None
    best = min(candidates, key=lambda c: (-c.n_students, c.meta.course_id))
    return best.meta.course_id


def make_spec(corpus: Sequence[CourseData], kind: str, target_id: str) -> ParadigmSpec:
    """Resolve the source courses a paradigm uses for a given target."""
    by_id = _corpus_index(corpus)
    if kind not in PARADIGMS:
        raise InvalidParadigmError(f"unknown paradigm {kind!r}")
    if target_id not in by_id:
        raise InvalidParadigmError(f"target course {target_id!r} not in corpus")
    if kind == "same_field":
        source = largest_same_field_source(corpus, target_id)
        if source is None:
            raise InvalidParadigmError(
                f"no other {by_id[target_id].meta.field} course to train same_field "
                f"for {target_id!r}"
            )
        return ParadigmSpec(kind, target_id, (source,))
    if kind == "multi_course":
        sources = tuple(sorted(cid for cid in by_id if cid != target_id))
        if not sources:
            raise InvalidParadigmError("multi_course needs at least one other course")
        return ParadigmSpec(kind, target_id, sources)
    return ParadigmSpec(kind, target_id)


def _validate_spec(corpus: Sequence[CourseData], spec: ParadigmSpec) -> dict[str, CourseData]:
    by_id = _corpus_index(corpus)
    if spec.kind not in PARADIGMS:
        raise InvalidParadigmError(f"unknown paradigm {spec.kind!r}")
    if spec.target_course not in by_id:
        raise InvalidParadigmError(f"target course {spec.target_course!r} not in corpus")
    for cid in spec.source_courses:
        if cid not in by_id:
            raise InvalidParadigmError(f"source course {cid!r} not in corpus")
    if spec.kind == "same_field":
        if len(spec.source_courses) != 1:
            raise InvalidParadigmError("same_field takes exactly one source course")
        expected = largest_same_field_source(corpus, spec.target_course)
        if spec.source_courses[0] != expected:
            raise InvalidParadigmError(
                f"same_field source must be the largest same-field course "
                f"({expected!r}), got {spec.source_courses[0]!r}"
            )
    elif spec.kind == "multi_course":
        expected_set = set(by_id) - {spec.target_course}
        if set(spec.source_courses) != expected_set or not expected_set:
            raise InvalidParadigmError(
                "multi_course sources must be every other corpus course"
            )
    elif spec.source_courses:
        raise InvalidParadigmError(f"{spec.kind} takes no source courses")
    return by_id


def _train_on_course(
    course: CourseData, w: int, C: float, opt: OptimizerConfig | None
):
    """Post-hoc-style model for one course at its own week w (clamped to launch)."""
    wd = course.meta.t100_date + datetime.timedelta(days=7 * w)
    wd = max(wd, course.meta.launch_date)
    m = build_matrix(course, wd)
    stats = fit_zscore(m)
    z = apply_zscore(m, stats)
    model = train_logreg(z, derive_labels(course), C, opt, norm=stats)
    return model, stats


def insitu_scores(
    meta: CourseMeta,
    students: tuple[StudentDemographics, ...],
    activity: ActivityTable,
    w: int,
    C: float = 1.0,
    opt: OptimizerConfig | None = None,
) -> ScoredStudents:
    """Score a live course at week w using only data available at week w.

    Takes the course apart on purpose: no grade table is accepted, so
    certification labels cannot influence this path. Features through week w
    are percentile-normalized against the same population and the model is
    trained on persistence proxy labels from week w-1.
    """
    shadow = CourseData(meta, students, activity, {})
    wd = week_date(meta, w)
    m = build_matrix(shadow, wd)
    stats = fit_percentile(m)
    p = apply_percentile(m, stats)
    proxy = proxy_labels(shadow, w)
    model = train_logreg(p, proxy, C, opt, norm=stats)
    return predict_proba(model, p)


def run_paradigm(
    corpus: Sequence[CourseData],
    spec: ParadigmSpec,
    w: int,
    C: float = 1.0,
    opt: OptimizerConfig | None = None,
    holdout: float = 0.0,
    seed: int = 0,
) -> ScoredStudents:
    """Score the target course's students at week w under one paradigm.

    holdout (post_hoc only) trains on a seeded (1 - holdout) fraction and
    returns scores for the held-out students alone; 0 keeps the literal
    same-population regime.
    """
    by_id = _validate_spec(corpus, spec)
    target = by_id[spec.target_course]
    if w not in prediction_weeks(target.meta, spec.kind):
        raise WindowOutOfRangeError(
            f"week {w} not eligible for {spec.kind} on {spec.target_course!r}"
        )
    wd = week_date(target.meta, w)

    if spec.kind == "post_hoc":
        m = build_matrix(target, wd)
        labels = derive_labels(target)
        if holdout > 0.0:
            if not (0.0 < holdout < 1.0):
                raise BadValueError(f"holdout {holdout} must be in (0, 1)")
            rng = np.random.default_rng(seed)
            n = m.n_rows
            n_test = int(round(holdout * n))
            order = rng.permutation(n)
            test_rows = np.sort(order[:n_test])
            train_rows = np.sort(order[n_test:])
            from .features import FeatureMatrix

            m_train = FeatureMatrix(
                m.schema, tuple(m.student_ids[i] for i in train_rows),
                m.values[train_rows], m.as_of,
            )
            m_test = FeatureMatrix(
                m.schema, tuple(m.student_ids[i] for i in test_rows),
                m.values[test_rows], m.as_of,
            )
            stats = fit_zscore(m_train)
            model = train_logreg(apply_zscore(m_train, stats), labels, C, opt, norm=stats)
            return predict_proba(model, apply_zscore(m_test, stats))
        stats = fit_zscore(m)
        z = apply_zscore(m, stats)
        model = train_logreg(z, labels, C, opt, norm=stats)
        return predict_proba(model, z)

    if spec.kind == "same_field":
        source = by_id[spec.source_courses[0]]
        model, stats = _train_on_course(source, w, C, opt)
        m_t = build_matrix(target, wd)
        return predict_proba(model, apply_zscore(m_t, stats))

    if spec.kind == "multi_course":
        models = [_train_on_course(by_id[cid], w, C, opt)[0] for cid in spec.source_courses]
        avg = average_hyperplanes(models)
        m_t = build_matrix(target, wd)
        stats_t = fit_zscore(m_t)
        return predict_proba(avg, apply_zscore(m_t, stats_t))

    if spec.kind == "in_situ":
        return insitu_scores(target.meta, target.students, target.activity, w, C, opt)

    if spec.kind == "baseline1":
        model = baseline_demographics(target, derive_labels(target), C, opt)
        return score_demographics(model, target)

    if spec.kind == "baseline2":
        return baseline_recency(target, wd)

    raise InvalidParadigmError(f"unknown paradigm {spec.kind!r}")


# ---------------------------------------------------------------------------
# Experiment harness
# ---------------------------------------------------------------------------

_WORKER_CORPUS: list[CourseData] | None = None


def _init_worker(corpus: list[CourseData]) -> None:
    global _WORKER_CORPUS
    _WORKER_CORPUS = corpus


def _run_course_cells(args) -> tuple[list[tuple], list[tuple]]:
    """All weekly cells for one (paradigm, course): rows plus skipped records."""
    kind, target_id, C, holdout, seed = args
    corpus = _WORKER_CORPUS
    by_id = _corpus_index(corpus)
    target = by_id[target_id]
    labels = derive_labels(target)
    rows: list[tuple] = []
    skipped: list[tuple] = []
    try:
        spec = make_spec(corpus, kind, target_id)
    except InvalidParadigmError as e:
        for w in prediction_weeks(target.meta, kind):
            skipped.append((kind, target_id, w, str(e)))
        return rows, skipped
    cached_scores: ScoredStudents | None = None
    for w in prediction_weeks(target.meta, kind):
        try:
            if kind == "baseline1":
                # week-independent: demographics never change, reuse the scores
                if cached_scores is None:
                    cached_scores = run_paradigm(corpus, spec, w, C, holdout=holdout, seed=seed)
                scored = cached_scores
            else:
                scored = run_paradigm(corpus, spec, w, C, holdout=holdout, seed=seed)
            y = labels.vector(scored.student_ids)
            a = auc_values(scored.scores, y)
            acc = raw_accuracy(scored.scores, y)
            rows.append((kind, target_id, w, a, acc, len(y), int(y.sum())))
        except SingleClassError as e:
            skipped.append((kind, target_id, w, str(e)))
    return rows, skipped


def run_experiment(
    corpus: Sequence[CourseData],
    paradigm_kinds: Sequence[str] = PARADIGMS,
    C: float = 1.0,
    holdout: float = 0.0,
    seed: int = 0,
    jobs: int = 1,
) -> EvalReport:
    """Every course x paradigm x eligible week, scored against true labels.

    Cells are independent; jobs > 1 fans (paradigm, course) tasks across
    processes. Assembly order is fixed, so the report is identical for any
    jobs value.
    """
    if len(corpus) == 0:
        raise BadValueError("corpus must be non-empty")
    for kind in paradigm_kinds:
        if kind not in PARADIGMS:
            raise InvalidParadigmError(f"unknown paradigm {kind!r}")
    corpus = list(corpus)
    course_ids = sorted(c.meta.course_id for c in corpus)
    tasks = [
        (kind, cid, C, holdout, seed)
        for kind in paradigm_kinds
        for cid in course_ids
    ]
    if jobs <= 1:
        _init_worker(corpus)
        results = [_run_course_cells(t) for t in tasks]
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(corpus,)
        ) as pool:
            results = list(pool.map(_run_course_cells, tasks))
    rows: list[EvalRow] = []
    skipped: list[tuple] = []
    for cell_rows, cell_skipped in results:
        rows.extend(EvalRow(*r) for r in cell_rows)
        skipped.extend(cell_skipped)
    return EvalReport.from_rows(rows, skipped)
