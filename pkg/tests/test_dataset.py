"""Problem model, canonical JSONL round-trips, stratified sampling."""
import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from currigen.dataset import (
    SEED_QUOTA_DEFAULT,
    Problem,
    ProblemPool,
    Provenance,
    ProvenanceKind,
    SubjectCategory,
    distribution_report,
    dump_record,
    load_pool,
    pool_to_jsonl,
    problem_to_record,
    record_to_problem,
    save_pool,
    stratified_seed_sample,
    validate_level,
)
from currigen.errors import DatasetError, QuotaError, StorageError
from currigen.synthetic import make_synthetic_corpus

from helpers import make_problem


def test_subject_categories_are_the_seven_disciplines():
    labels = [s.value for s in SubjectCategory]
    assert labels == [
        "Prealgebra",
        "Algebra",
        "Intermediate Algebra",
        "Geometry",
        "Number Theory",
        "Counting & Probability",
        "Precalculus",
    ]
    assert SubjectCategory.parse("Geometry") is SubjectCategory.GEOMETRY
    with pytest.raises(DatasetError):
        SubjectCategory.parse("geometry")  # labels are exact


def test_default_quota_sums_to_two_hundred():
    assert sum(SEED_QUOTA_DEFAULT.values()) == 200
    assert SEED_QUOTA_DEFAULT[SubjectCategory.PREALGEBRA] == 51
    assert SEED_QUOTA_DEFAULT[SubjectCategory.ALGEBRA] == 26
    assert SEED_QUOTA_DEFAULT[SubjectCategory.INTERMEDIATE_ALGEBRA] == 22
    assert SEED_QUOTA_DEFAULT[SubjectCategory.GEOMETRY] == 21
    assert SEED_QUOTA_DEFAULT[SubjectCategory.NUMBER_THEORY] == 21
    assert SEED_QUOTA_DEFAULT[SubjectCategory.COUNTING_PROBABILITY] == 29
    assert SEED_QUOTA_DEFAULT[SubjectCategory.PRECALCULUS] == 30


def test_validate_level_bounds():
    assert validate_level(1) == 1
    assert validate_level(10) == 10
    for bad in (0, 11, -3):
        with pytest.raises(DatasetError):
            validate_level(bad)
    with pytest.raises(DatasetError):
        validate_level(True)
    with pytest.raises(DatasetError):
        validate_level("5")


def test_provenance_rules():
    Provenance(ProvenanceKind.SEED)
    with pytest.raises(DatasetError):
        Provenance(ProvenanceKind.SEED, parent_id="x")
    with pytest.raises(DatasetError):
        Provenance(ProvenanceKind.SEED, round_created=1)
    with pytest.raises(DatasetError):
        Provenance(ProvenanceKind.REDUCED)  # variants need a parent
    Provenance(ProvenanceKind.REDUCED, parent_id="p", round_created=2)
    with pytest.raises(DatasetError):
        Provenance(ProvenanceKind.REDUCED, parent_id="p", round_created=-1)


def test_problem_validation():
    with pytest.raises(DatasetError):
        Problem(id="", query="q")
    with pytest.raises(DatasetError):
        Problem(id="a", query="q", level=0)
    with pytest.raises(DatasetError):
        Problem(id="a", query="q", err_count=-1)
    p = Problem(id="a", query="q")
    assert not p.is_tagged  # no level/subject/answer yet
    assert make_problem("b").is_tagged


def test_err_count_may_never_decrease():
    p = make_problem("a", err_count=2)
    assert p.with_err_count(2).err_count == 2
    assert p.with_err_count(5).err_count == 5
    with pytest.raises(DatasetError):
        p.with_err_count(1)


def test_pool_rejects_duplicates_and_preserves_order():
    a, b = make_problem("a"), make_problem("b")
    pool = ProblemPool(problems=[a, b])
    assert pool.ids() == ["a", "b"]
    assert "a" in pool and "z" not in pool
    with pytest.raises(DatasetError):
        pool.add(make_problem("a"))
    with pytest.raises(DatasetError):
        ProblemPool(problems=[a, a])
    with pytest.raises(DatasetError):
        pool.get("zzz")
    with pytest.raises(DatasetError):
        pool.replace(make_problem("zzz"))
    pool.replace(make_problem("a", level=9))
    assert pool.get("a").level == 9
    assert pool.ids() == ["a", "b"]  # replace keeps position


def test_record_round_trip_is_exact():
    p = make_problem(
        "v1",
        level=7,
        subject=SubjectCategory.PRECALCULUS,
        err_count=2,
        kind=ProvenanceKind.DIVERSIFIED,
        parent_id="seed-3",
        round_created=4,
    )
    rec = problem_to_record(p)
    assert record_to_problem(rec) == p
    # canonical line is stable under a second trip
    line = dump_record(rec)
    assert dump_record(problem_to_record(record_to_problem(json.loads(line)))) == line


def test_latex_and_unicode_survive_persistence(tmp_path):
    query = r"Evaluate $\frac{\sqrt{5}-1}{2}$ and compare with θ = π/4. [level: 3]"
    p = Problem(
        id="latex-1",
        query=query,
        answer=r"\boxed{\frac{\sqrt{5}-1}{2}}",
        level=3,
        subject=SubjectCategory.ALGEBRA,
    )
    path = tmp_path / "pool.jsonl"
    save_pool(ProblemPool(problems=[p]), path)
    raw = path.read_text(encoding="utf-8")
    assert "θ" in raw and "π" in raw  # no ASCII escaping
    loaded = load_pool(path)
    assert loaded.get("latex-1").query == query
    assert loaded.get("latex-1").answer == p.answer


def test_save_load_byte_stable(tmp_path, big_corpus):
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_pool(big_corpus, p1)
    save_pool(load_pool(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_errors_carry_line_numbers(tmp_path):
    good = dump_record(problem_to_record(make_problem("a")))
    path = tmp_path / "pool.jsonl"

    path.write_text(good + "\nnot json\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="line 2"):
        load_pool(path)

    path.write_text(good + "\n\n" + good, encoding="utf-8")
    with pytest.raises(DatasetError, match="blank line at line 2"):
        load_pool(path)

    path.write_text(good + "\n" + good + "\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="duplicate problem id .* line 2"):
        load_pool(path)

    rec = problem_to_record(make_problem("c"))
    rec["bogus"] = 1
    path.write_text(dump_record(rec) + "\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="unknown field.*bogus.*line 1"):
        load_pool(path)

    rec = problem_to_record(make_problem("d"))
    del rec["err_count"]
    path.write_text(dump_record(rec) + "\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="missing field.*err_count"):
        load_pool(path)


def test_load_missing_file_is_storage_error(tmp_path):
    with pytest.raises(StorageError):
        load_pool(tmp_path / "nope.jsonl")


def test_load_empty_file_is_empty_pool(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert len(load_pool(path)) == 0


def test_record_schema_is_strict():
    with pytest.raises(DatasetError):
        record_to_problem([1, 2])
    rec = problem_to_record(make_problem("a"))
    rec["provenance"] = {"kind": "seed"}
    with pytest.raises(DatasetError, match="provenance"):
        record_to_problem(rec)
    rec = problem_to_record(make_problem("a"))
    rec["provenance"]["kind"] = "mystery"
    with pytest.raises(DatasetError, match="unknown provenance kind"):
        record_to_problem(rec)
    rec = problem_to_record(make_problem("a"))
    rec["level"] = 99
    with pytest.raises(DatasetError, match="level out of range"):
        record_to_problem(rec)


def test_stratified_sample_meets_quota_exactly(big_corpus):
    seed = stratified_seed_sample(big_corpus, SEED_QUOTA_DEFAULT, rng_seed=0)
    assert len(seed) == 200
    # brute-force tally, independent of distribution_report
    tally = Counter(p.subject for p in seed)
    assert tally == Counter(
        {s: n for s, n in SEED_QUOTA_DEFAULT.items()}
    )
    # and all distinct, all drawn from the corpus
    assert len(set(seed.ids())) == 200
    assert all(pid in big_corpus for pid in seed.ids())


def test_stratified_sample_is_deterministic(big_corpus):
    a = stratified_seed_sample(big_corpus, SEED_QUOTA_DEFAULT, rng_seed=42)
    b = stratified_seed_sample(big_corpus, SEED_QUOTA_DEFAULT, rng_seed=42)
    assert a.ids() == b.ids()
    c = stratified_seed_sample(big_corpus, SEED_QUOTA_DEFAULT, rng_seed=43)
    assert a.ids() != c.ids()


def test_subject_draws_do_not_perturb_each_other():
    counts = {SubjectCategory.ALGEBRA: 40, SubjectCategory.GEOMETRY: 40}
    base = make_synthetic_corpus(counts, rng_seed=3)
    # same geometry problems, one extra algebra problem appended
    grown = ProblemPool(name="corpus", problems=base)
    grown.add(make_problem("extra-alg", subject=SubjectCategory.ALGEBRA, level=5))
    quota = {SubjectCategory.ALGEBRA: 10, SubjectCategory.GEOMETRY: 10}
    pick_base = stratified_seed_sample(base, quota, rng_seed=0)
    pick_grown = stratified_seed_sample(grown, quota, rng_seed=0)
    geo_base = [p.id for p in pick_base if p.subject is SubjectCategory.GEOMETRY]
    geo_grown = [p.id for p in pick_grown if p.subject is SubjectCategory.GEOMETRY]
    assert geo_base == geo_grown


def test_quota_shortfall_names_the_gap(corpus_factory):
    corpus = corpus_factory(10)
    with pytest.raises(QuotaError, match="Prealgebra.*short by 41"):
        stratified_seed_sample(corpus, SEED_QUOTA_DEFAULT, rng_seed=0)


def test_quota_edge_cases(big_corpus):
    assert len(stratified_seed_sample(big_corpus, {}, rng_seed=0)) == 0
    with pytest.raises(QuotaError, match="negative"):
        stratified_seed_sample(big_corpus, {SubjectCategory.ALGEBRA: -1}, rng_seed=0)


def test_sampling_requires_subject_tags():
    pool = ProblemPool(problems=[Problem(id="raw", query="q")])
    with pytest.raises(DatasetError, match="no subject tag"):
        stratified_seed_sample(pool, {}, rng_seed=0)


def test_distribution_report_totals(big_corpus):
    report = distribution_report(big_corpus)
    assert report.total == len(big_corpus)
    assert sum(report.subjects.values()) == report.total
    assert sum(report.levels.values()) == report.total
    # raw corpus is untagged on difficulty but tagged on subject
    assert report.levels["untagged"] == len(big_corpus)
    assert report.subjects["untagged"] == 0
    assert set(report.levels) == {str(k) for k in range(1, 11)} | {"untagged"}


def test_distribution_report_empty_pool():
    report = distribution_report(ProblemPool())
    assert report.total == 0
    assert all(v == 0 for v in report.subjects.values())
    assert all(v == 0 for v in report.levels.values())


# -- properties ------------------------------------------------------------

_subjects = st.sampled_from(list(SubjectCategory))
_levels = st.one_of(st.none(), st.integers(min_value=1, max_value=10))


@st.composite
def problems(draw, index):
    level = draw(_levels)
    return Problem(
        id=f"p{index}",
        query=draw(st.text(max_size=40)) + f" [tag {index}]",
        answer=draw(st.one_of(st.none(), st.text(min_size=1, max_size=20))),
        level=level,
        subject=draw(_subjects),
        err_count=draw(st.integers(min_value=0, max_value=6)),
    )


@st.composite
def pools(draw):
    n = draw(st.integers(min_value=0, max_value=12))
    return ProblemPool(problems=[draw(problems(i)) for i in range(n)])


@settings(max_examples=60, deadline=None)
@given(pool=pools())
def test_jsonl_round_trip_property(tmp_path_factory, pool):
    path = tmp_path_factory.mktemp("pools") / "pool.jsonl"
    save_pool(pool, path)
    rebuilt = load_pool(path)
    assert rebuilt == pool
    assert pool_to_jsonl(rebuilt) == pool_to_jsonl(pool)


@settings(max_examples=60, deadline=None)
@given(pools())
def test_distribution_totals_property(pool):
    report = distribution_report(pool)
    assert report.total == len(pool)
    assert sum(report.subjects.values()) == len(pool)
    assert sum(report.levels.values()) == len(pool)
