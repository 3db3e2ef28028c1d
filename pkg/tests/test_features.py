"""Feature schema, demographic encoding, cumulative counters, normalization."""

import datetime

import numpy as np
import pytest

from dropoutlab.dataset import StudentDemographics, course_from_records
from dropoutlab.errors import BadDateError, BadValueError, SchemaMismatchError
from dropoutlab.features import (
    DEFAULT_SCHEMA,
    FeatureMatrix,
    apply_percentile,
    apply_zscore,
    build_matrix,
    check_as_of,
    cumulative_clickstream,
    days_since_last_action,
    encode_demographics,
    fit_percentile,
    fit_zscore,
    load_matrix,
    load_norm_stats,
    normalize,
    percentile_columns,
    save_norm_stats,
    write_matrix,
)

from conftest import LAUNCH, counters, day, make_meta


class TestSchema:
    def test_width_and_blocks(self):
        assert len(DEFAULT_SCHEMA.names) == 66
        widths = {b: len(ix) for b, ix in DEFAULT_SCHEMA.blocks.items()}
        assert widths == {
            "age_dummies": 13, "loe_dummies": 8, "gender_dummies": 4,
            "continent_dummies": 8, "clickstream_cumulative": 31,
            "precourse_survey": 1, "days_since_last_action": 1,
        }

    def test_blocks_partition_columns(self):
        seen = sorted(i for ix in DEFAULT_SCHEMA.blocks.values() for i in ix)
        assert seen == list(range(66))

    def test_cumulative_names_prefixed(self):
        cum = [DEFAULT_SCHEMA.names[i] for i in DEFAULT_SCHEMA.blocks["clickstream_cumulative"]]
        assert all(n.startswith("cum_") for n in cum)
        assert cum[0] == "cum_avg_dt" and cum[-1] == "cum_problems_other"

    def test_percentile_columns_are_counters_plus_recency(self):
        cols = percentile_columns(DEFAULT_SCHEMA)
        expected = tuple(DEFAULT_SCHEMA.blocks["clickstream_cumulative"]) + tuple(
            DEFAULT_SCHEMA.blocks["days_since_last_action"])
        assert cols == tuple(sorted(expected))


def _dummy_name(v):
    return DEFAULT_SCHEMA.names[int(np.argmax(v))]


class TestAgeBinning:
    def test_reference_ages(self):
        # 2012 - 1990 = 22 falls in [20, 25)
        v = encode_demographics(StudentDemographics("s", yob=1990))
        assert _dummy_name(v[:13] * 1.0) == "age_20_25"
        # 2012 - 1997 = 15 falls in [15, 20)
        v = encode_demographics(StudentDemographics("s", yob=1997))
        assert _dummy_name(v[:13]) == "age_15_20"

    def test_bin_edges_half_open(self):
        cases = {2003: "age_lt10", 2002: "age_10_15", 1998: "age_10_15",
                 1997: "age_15_20", 1953: "age_55_60", 1952: "age_ge60",
                 1900: "age_ge60"}
        for yob, name in cases.items():
            v = encode_demographics(StudentDemographics("s", yob=yob))
            assert _dummy_name(v[:13]) == name, yob

    def test_null_yob(self):
        v = encode_demographics(StudentDemographics("s"))
        assert _dummy_name(v[:13]) == "age_null"


class TestDemographicEncoding:
    def test_each_group_one_hot(self):
        for s in (
            StudentDemographics("s"),
            StudentDemographics("s", yob=1985, loe="Associate", gender="Other",
                                continent="Oceania", took_precourse_survey=True),
            StudentDemographics("s", loe="JuniorHigh", gender="Female"),
        ):
            v = encode_demographics(s)
            assert v.shape == (33,)
            assert v[:13].sum() == 1.0
            assert v[13:21].sum() == 1.0
            assert v[21:25].sum() == 1.0
            assert v[25:33].sum() == 1.0
            assert set(np.unique(v)) <= {0.0, 1.0}

    def test_named_slots(self):
        s = StudentDemographics("s", yob=1980, loe="Master", gender="Male",
                                continent="SouthAmerica")
        v = encode_demographics(s)
        names = {DEFAULT_SCHEMA.names[i] for i in np.nonzero(v)[0]}
        assert names == {"age_30_35", "loe_master", "gender_male",
                         "continent_southamerica"}


class TestCumulativeCounters:
    def test_inclusive_prefix_sum(self, tiny_course):
        # s00 active on days 0, 2, 9
        c0 = cumulative_clickstream(tiny_course, "s00", day(0))
        c2 = cumulative_clickstream(tiny_course, "s00", day(2))
        c9 = cumulative_clickstream(tiny_course, "s00", day(9))
        k = list(counters())
        assert c0[k.index("nevents")] == 10.0
        assert c2[k.index("nevents")] == 15.0
        assert c9[k.index("nevents")] == 22.0
        assert c2[k.index("nproblems_answered")] == 6.0
        # day 1 sits between activity days: same totals as day 0
        c1 = cumulative_clickstream(tiny_course, "s00", day(1))
        assert np.array_equal(c1, c0)

    def test_later_activity_excluded(self, tiny_course):
        c = cumulative_clickstream(tiny_course, "s03", day(5))
        k = list(counters())
        assert c[k.index("nproblems_answered")] == 3.0  # day 20 row not yet visible

    def test_inactive_student_all_zero(self, tiny_course):
        c = cumulative_clickstream(tiny_course, "s02", day(30))
        assert np.all(c == 0.0)

    def test_monotone_in_time(self, tiny_course):
        prev = None
        for off in range(0, 35, 7):
            c = cumulative_clickstream(tiny_course, "s00", day(off))
            if prev is not None:
                assert np.all(c >= prev)
            prev = c


class TestRecency:
    def test_same_day_action(self, tiny_course):
        assert days_since_last_action(tiny_course, "s00", day(9)) == 0.0

    def test_days_elapsed(self, tiny_course):
        assert days_since_last_action(tiny_course, "s00", day(12)) == 3.0
        assert days_since_last_action(tiny_course, "s01", day(12)) == 12.0

    def test_never_active_sentinel(self, tiny_course):
        # one day beyond the longest possible silence
        assert days_since_last_action(tiny_course, "s02", day(9)) == 10.0
        assert days_since_last_action(tiny_course, "s02", day(0)) == 1.0

    def test_as_of_bounds(self, tiny_course):
        with pytest.raises(BadDateError):
            check_as_of(tiny_course, day(-1))
        with pytest.raises(BadDateError):
            check_as_of(tiny_course, tiny_course.meta.end_date + datetime.timedelta(days=1))
        assert check_as_of(tiny_course, day(4)) == 4


class TestBuildMatrix:
    def test_shape_and_row_order(self, tiny_course):
        m = build_matrix(tiny_course, day(9))
        assert m.values.shape == (6, 66)
        assert m.student_ids == tiny_course.student_ids
        assert m.as_of == day(9)

    def test_rows_match_per_student_helpers(self, tiny_course):
        m = build_matrix(tiny_course, day(9))
        cum_cols = list(DEFAULT_SCHEMA.blocks["clickstream_cumulative"])
        for i, sid in enumerate(m.student_ids):
            expect = cumulative_clickstream(tiny_course, sid, day(9))
            assert np.array_equal(m.values[i, cum_cols], expect)
            assert m.values[i, 65] == days_since_last_action(tiny_course, sid, day(9))

    def test_survey_column(self, tiny_course):
        m = build_matrix(tiny_course, day(9))
        col = m.values[:, 64]
        by_id = dict(zip(m.student_ids, col))
        assert by_id["s00"] == 1.0 and by_id["s03"] == 1.0
        assert by_id["s01"] == 0.0

    def test_deterministic(self, tiny_course):
        a = build_matrix(tiny_course, day(9))
        b = build_matrix(tiny_course, day(9))
        assert np.array_equal(a.values, b.values)

    def test_roster_order_irrelevant(self, tiny_course):
        shuffled = course_from_records(
            tiny_course.meta,
            tuple(reversed(tiny_course.students)),
            list(tiny_course.activity_days()),
            tiny_course.final_grade,
        )
        a = build_matrix(tiny_course, day(9))
        b = build_matrix(shuffled, day(9))
        assert a.student_ids == b.student_ids
        assert np.array_equal(a.values, b.values)

    def test_matrix_validates_shape(self):
        with pytest.raises(BadValueError):
            FeatureMatrix(DEFAULT_SCHEMA, ("a",), np.zeros((1, 65)), LAUNCH)
        with pytest.raises(BadValueError):
            FeatureMatrix(DEFAULT_SCHEMA, ("a",), np.full((1, 66), np.nan), LAUNCH)


def _matrix_from_columns(col33, col65, extra_rows=None):
    """Matrix with a chosen cum_avg_dt column and recency column."""
    vals = np.zeros((len(col33), 66))
    vals[:, 33] = col33
    vals[:, 65] = col65
    ids = tuple(f"m{i:02d}" for i in range(len(col33)))
    return FeatureMatrix(DEFAULT_SCHEMA, ids, vals, LAUNCH)


class TestZscore:
    def test_mean_and_population_std(self):
        m = _matrix_from_columns([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
        stats = fit_zscore(m)
        assert stats.mean[33] == pytest.approx(2.0)
        assert stats.std[33] == pytest.approx(np.sqrt(2.0 / 3.0))
        z = apply_zscore(m, stats)
        assert z.values[:, 33] == pytest.approx([-np.sqrt(1.5), 0.0, np.sqrt(1.5)])
        assert np.mean(z.values[:, 33]) == pytest.approx(0.0, abs=1e-15)

    def test_constant_column_maps_to_zero(self):
        m = _matrix_from_columns([4.0, 4.0, 4.0], [1.0, 2.0, 3.0])
        z = apply_zscore(m, fit_zscore(m))
        assert np.all(z.values[:, 33] == 0.0)

    def test_single_row(self):
        m = _matrix_from_columns([7.0], [3.0])
        z = apply_zscore(m, fit_zscore(m))
        assert np.all(z.values == 0.0)

    def test_all_columns_standardized(self, tiny_course):
        m = build_matrix(tiny_course, day(9))
        z = apply_zscore(m, fit_zscore(m))
        mu = z.values.mean(axis=0)
        assert np.max(np.abs(mu)) < 1e-12
        sd = z.values.std(axis=0)
        assert np.all((np.abs(sd - 1.0) < 1e-12) | (sd == 0.0))

    def test_no_clipping_of_new_extremes(self):
        train = _matrix_from_columns([0.0, 1.0], [0.0, 0.0])
        target = _matrix_from_columns([100.0], [0.0])
        z = apply_zscore(target, fit_zscore(train))
        assert z.values[0, 33] == pytest.approx((100.0 - 0.5) / 0.5)


class TestPercentile:
    def test_mid_rank_examples(self):
        train = _matrix_from_columns([10.0, 20.0, 30.0], [0.0, 0.0, 0.0])
        stats = fit_percentile(train)
        t = apply_percentile(train, stats)
        assert t.values[:, 33] == pytest.approx([1 / 6, 3 / 6, 5 / 6])
        probe = apply_percentile(_matrix_from_columns([20.0, 5.0, 35.0, 25.0], [0] * 4), stats)
        assert probe.values[:, 33] == pytest.approx([0.5, 0.0, 1.0, 2 / 3])

    def test_ties_share_mid_rank(self):
        train = _matrix_from_columns([5.0, 5.0, 5.0, 9.0], [0.0] * 4)
        t = apply_percentile(train, fit_percentile(train))
        assert t.values[:, 33] == pytest.approx([3 / 8, 3 / 8, 3 / 8, 7 / 8])

    def test_constant_column_maps_to_half(self):
        train = _matrix_from_columns([2.0, 2.0], [0.0, 0.0])
        t = apply_percentile(train, fit_percentile(train))
        assert np.all(t.values[:, 33] == 0.5)

    def test_dummies_pass_through(self, tiny_course):
        m = build_matrix(tiny_course, day(9))
        t = apply_percentile(m, fit_percentile(m))
        keep = [i for i in range(66) if i not in percentile_columns(DEFAULT_SCHEMA)]
        assert np.array_equal(t.values[:, keep], m.values[:, keep])

    def test_values_in_unit_interval(self, small_corpus):
        m = build_matrix(small_corpus[0], small_corpus[0].meta.t100_date)
        t = apply_percentile(m, fit_percentile(m))
        cols = list(percentile_columns(DEFAULT_SCHEMA))
        assert t.values[:, cols].min() >= 0.0
        assert t.values[:, cols].max() <= 1.0

    def test_order_preserved(self, small_corpus):
        m = build_matrix(small_corpus[0], small_corpus[0].meta.t100_date)
        t = apply_percentile(m, fit_percentile(m))
        col = 33 + 5
        a = np.argsort(m.values[:, col], kind="stable")
        assert np.all(np.diff(t.values[a, col]) >= 0)


class TestNormalizeDispatch:
    def test_zscore_kind(self, tiny_course):
        m = build_matrix(tiny_course, day(9))
        stats, (z,) = normalize(m, [m], "zscore")
        assert stats.kind == "zscore"
        assert np.array_equal(z.values, apply_zscore(m, fit_zscore(m)).values)

    def test_percentile_kind(self, tiny_course):
        m = build_matrix(tiny_course, day(9))
        stats, (t,) = normalize(m, [m], "percentile")
        assert stats.kind == "percentile"
        assert np.array_equal(t.values, apply_percentile(m, fit_percentile(m)).values)

    def test_unknown_kind(self, tiny_course):
        m = build_matrix(tiny_course, day(9))
        with pytest.raises(BadValueError):
            normalize(m, [m], "minmax")


class TestSerialization:
    def test_matrix_round_trip(self, tiny_course, tmp_path):
        m = build_matrix(tiny_course, day(9))
        p = tmp_path / "m.csv"
        write_matrix(m, p)
        back = load_matrix(p, day(9))
        assert back.student_ids == m.student_ids
        assert np.array_equal(back.values, m.values)

    def test_matrix_header_checked(self, tiny_course, tmp_path):
        m = build_matrix(tiny_course, day(9))
        p = tmp_path / "m.csv"
        write_matrix(m, p)
        text = p.read_text()
        p.write_text(text.replace("cum_avg_dt", "avg_dt", 1))
        with pytest.raises(SchemaMismatchError):
            load_matrix(p, day(9))

    def test_norm_stats_round_trip(self, tiny_course, tmp_path):
        m = build_matrix(tiny_course, day(9))
        for fit, apply in ((fit_zscore, apply_zscore), (fit_percentile, apply_percentile)):
            stats = fit(m)
            p = tmp_path / f"{stats.kind}.json"
            save_norm_stats(stats, p)
            back = load_norm_stats(p)
            assert back.kind == stats.kind
            assert np.array_equal(apply(m, back).values, apply(m, stats).values)
