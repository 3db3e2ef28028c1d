"""Shared course builders and corpus fixtures."""

import datetime

import numpy as np
import pytest

from dropoutlab.dataset import (
    ActivityDay,
    CLICKSTREAM_FEATURES,
    CorpusConfig,
    CourseMeta,
    StudentDemographics,
    SynthConfig,
    course_from_records,
    synthesize_corpus,
)

LAUNCH = datetime.date(2014, 1, 6)


def counters(**overrides):
    """All 31 clickstream counters at zero, with named overrides."""
    c = {k: 0.0 for k in CLICKSTREAM_FEATURES}
    for k, v in overrides.items():
        assert k in c, k
        c[k] = float(v)
    return c


def make_meta(course_id="TSTx", launch=LAUNCH, weeks_to_t100=8, weeks_total=10,
              threshold=0.7, field="STEM"):
    return CourseMeta(
        course_id=course_id,
        launch_date=launch,
        end_date=launch + datetime.timedelta(days=7 * weeks_total),
        t100_date=launch + datetime.timedelta(days=7 * weeks_to_t100),
        cert_threshold=threshold,
        field=field,
    )


def day(offset, launch=LAUNCH):
    return launch + datetime.timedelta(days=offset)


@pytest.fixture
def tiny_course():
    """Six students with hand-checkable activity and grades.

    s00 certifies (active days 0, 2, 9), s01 drops out early (day 0 only),
    s02 never acts, s03 certifies exactly at threshold, s04 has no grade row,
    s05 is active late but fails.
    """
    meta = make_meta(weeks_to_t100=4, weeks_total=5)
    students = [
        StudentDemographics("s00", yob=1990, loe="Bachelor", gender="Female",
                            continent="Europe", took_precourse_survey=True),
        StudentDemographics("s01", yob=1997, loe="HighSchool", gender="Male",
                            continent="Asia"),
        StudentDemographics("s02"),
        StudentDemographics("s03", yob=1955, loe="Master", gender="Other",
                            continent="SouthAmerica", took_precourse_survey=True),
        StudentDemographics("s04", yob=2005, loe="Elementary", gender="Female",
                            continent="Africa"),
        StudentDemographics("s05", yob=1980, loe="Professional", gender="Male",
                            continent="NorthAmerica"),
    ]
    records = [
        ActivityDay("s00", day(0), counters(nevents=10, nvideo=3, nproblems_answered=4, sum_dt=120)),
        ActivityDay("s00", day(2), counters(nevents=5, nforum_posts=1, nproblems_answered=2)),
        ActivityDay("s00", day(9), counters(nevents=7, nvideo=2, max_dt=300)),
        ActivityDay("s01", day(0), counters(nevents=2, nshow_answer=1)),
        ActivityDay("s03", day(1), counters(nevents=4, nproblems_answered=3)),
        ActivityDay("s03", day(20), counters(nevents=6, nproblems_answered=5)),
        ActivityDay("s04", day(3), counters(nevents=1)),
        ActivityDay("s05", day(27), counters(nevents=9, nvideo=4)),
    ]
    grades = {"s00": 0.91, "s01": 0.05, "s02": 0.0, "s03": 0.7, "s05": 0.42}
    return course_from_records(meta, students, records, grades)


@pytest.fixture
def separable_course():
    """20 persistently active certifiers vs 20 silent dropouts."""
    meta = make_meta(course_id="SEPx", weeks_to_t100=8, weeks_total=10, threshold=0.5)
    students, records, grades = [], [], {}
    for i in range(40):
        sid = f"p{i:03d}"
        students.append(StudentDemographics(sid, yob=1985))
        if i < 20:
            for d in range(0, 56, 3):
                records.append(ActivityDay(sid, day(d), counters(nevents=5 + i % 3,
                                                                 nproblems_answered=2)))
            grades[sid] = 0.9
        else:
            grades[sid] = 0.1
    return course_from_records(meta, students, records, grades)


def _corpus_config(n_courses, n_students, fields):
    courses = []
    for i in range(n_courses):
        courses.append(SynthConfig(
            course_id=f"C{i + 1}x",
            field=fields[i % len(fields)],
            n_students=n_students,
            launch=LAUNCH + datetime.timedelta(days=28 * i),
            weeks_to_t100=6 + i % 3,
            weeks_total=8 + i % 3,
            cert_threshold=0.6 + 0.05 * (i % 3),
        ))
    return CorpusConfig(courses=tuple(courses))


@pytest.fixture(scope="session")
def small_corpus():
    """Four synthesized courses, two per field, 150 students each."""
    config = _corpus_config(4, 150, ("STEM", "Hum", "STEM", "Hum"))
    return synthesize_corpus(config, 2024)
