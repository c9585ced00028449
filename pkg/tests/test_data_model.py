import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from knnga.data_model import (
    AttributeSpec,
    Dataset,
    Kind,
    Role,
    load_bundled,
    parse_arff,
    parse_csv,
    project,
    stratified_folds,
    synth_heart_ap,
    to_arff,
)
from knnga.errors import (
    ClassError,
    DataError,
    DataSyntaxError,
    EmptyMaskError,
    HeaderMismatch,
    InvalidFoldCount,
    MaskLengthError,
    SchemaError,
)

SMALL = """% tiny
@relation tiny
@attribute x numeric
@attribute colour {red, green}
@attribute label {a,b}
@data
1.5,red,a
2,green,b
"""


def test_parse_small_arff():
    d = parse_arff(SMALL)
    assert len(d) == 2
    assert len(d.schema) == 3
    assert d.name == "tiny"
    assert d.rows[0] == (1.5, 0, 0)
    assert d.rows[1] == (2.0, 1, 1)
    assert d.class_spec.name == "label"


def test_weather_shape(weather):
    assert len(weather) == 14
    assert len(weather.schema) == 5
    assert weather.class_spec.categories == ("yes", "no")


def test_heart_statlog_shape(heart):
    assert len(heart) == 270
    assert len(heart.schema) == 14
    assert np.bincount(heart.labels).tolist() == [150, 120]


def test_missing_cell_in_numeric_column():
    text = SMALL.replace("2,green,b", "?,green,b")
    assert parse_arff(text).rows[1][0] is None
    weather_like = """@relation w
@attribute outlook {sunny, rainy}
@attribute temperature numeric
@attribute humidity numeric
@attribute windy {TRUE, FALSE}
@attribute play {yes, no}
@data
sunny,85,?,FALSE,no
"""
    assert parse_arff(weather_like).rows[0] == (0, 85.0, None, 1, 1)


def test_keywords_case_insensitive_and_quoted_names():
    text = """@RELATION 'my data'
@ATTRIBUTE 'BP Systolic' REAL
@Attribute "kind" {'low risk', high}
@DATA
120,'low risk'
"""
    d = parse_arff(text)
    assert d.name == "my data"
    assert d.schema[0].name == "BP Systolic"
    assert d.schema[1].categories == ("low risk", "high")
    assert d.rows[0] == (120.0, 0)


def test_class_override():
    d = parse_arff(SMALL, class_attribute="colour")
    assert d.class_spec.name == "colour"
    assert d.schema[2].role is Role.FEATURE
    with pytest.raises(ClassError):
        parse_arff(SMALL, class_attribute="x")
    with pytest.raises(ClassError):
        parse_arff(SMALL, class_attribute="nope")


@pytest.mark.parametrize("path", sorted((FIXTURES / "malformed").glob("*.arff")), ids=lambda p: p.stem)
def test_malformed_corpus_rejected_with_position(path):
    with pytest.raises(DataError) as info:
        parse_arff(path.read_text())
    err = info.value
    if isinstance(err, DataSyntaxError):
        assert err.line >= 1
    else:
        assert isinstance(err, SchemaError)
        assert err.line is not None and err.line >= 1


def test_specific_error_types():
    read = lambda name: (FIXTURES / "malformed" / name).read_text()  # noqa: E731
    with pytest.raises(DataSyntaxError):
        parse_arff(read("string_type.arff"))
    with pytest.raises(SchemaError) as info:
        parse_arff(read("extra_field.arff"))
    assert info.value.line == 5
    with pytest.raises(SchemaError):
        parse_arff(read("undeclared_value.arff"))
    with pytest.raises(ClassError):
        parse_arff(read("missing_class.arff"))
    with pytest.raises(ClassError):
        parse_arff(read("numeric_class.arff"))


@pytest.mark.parametrize("name", ["weather", "heart-statlog"])
def test_arff_round_trip_bundled(name):
    d = load_bundled(name)
    assert parse_arff(to_arff(d)) == d


def test_arff_round_trip_synthetic_and_missing():
    d = synth_heart_ap(25, 3)
    assert parse_arff(to_arff(d)) == d
    text = SMALL.replace("1.5,red,a", "?,?,a")
    d2 = parse_arff(text)
    assert parse_arff(to_arff(d2)) == d2


CSV_SCHEMA = (
    AttributeSpec.numeric("age"),
    AttributeSpec.nominal("gender", ["m", "f"]),
    AttributeSpec.nominal("disease", ["healthy", "sick"], role=Role.CLASS),
)


def test_parse_csv():
    d = parse_csv("age,gender,disease\n54,f,sick\n", CSV_SCHEMA)
    assert len(d) == 1 and d.rows[0] == (54.0, 1, 1)


def test_csv_empty_cell_is_missing():
    d = parse_csv("age,gender,disease\n,f,sick\n", CSV_SCHEMA)
    assert d.rows[0][0] is None
    assert parse_csv("age,gender,disease\n54,?,sick\n", CSV_SCHEMA).rows[0] == (54.0, None, 1)


def test_csv_errors():
    with pytest.raises(SchemaError):
        parse_csv("age,gender,disease\n54,f\n", CSV_SCHEMA)
    with pytest.raises(HeaderMismatch):
        parse_csv("age,sex,disease\n54,f,sick\n", CSV_SCHEMA)
    with pytest.raises(SchemaError):
        parse_csv("age,gender,disease\nold,f,sick\n", CSV_SCHEMA)
    with pytest.raises(ClassError):
        parse_csv("age,gender,disease\n54,f,\n", CSV_SCHEMA)


def test_schema_invariants():
    with pytest.raises(SchemaError):
        AttributeSpec.nominal("c", [])
    with pytest.raises(SchemaError):
        AttributeSpec.nominal("c", ["a", "a"])
    with pytest.raises(ClassError):
        AttributeSpec("c", Kind.NUMERIC, role=Role.CLASS)
    with pytest.raises(ClassError):
        Dataset((AttributeSpec.numeric("x"),), ((1.0,),))
    with pytest.raises(SchemaError):
        Dataset(CSV_SCHEMA, ((1.0, 5, 0),))
    with pytest.raises(SchemaError):
        Dataset(CSV_SCHEMA, ((float("inf"), 0, 0),))


def _balanced(n_per_class, n_classes=2):
    schema = (AttributeSpec.numeric("x"),
              AttributeSpec.nominal("y", [f"c{i}" for i in range(n_classes)], role=Role.CLASS))
    rows = [(float(i), c) for c in range(n_classes) for i in range(n_per_class)]
    return Dataset(schema, tuple(rows))


def test_folds_symmetric_case():
    fa = stratified_folds(_balanced(5), 5, seed=0)
    y = _balanced(5).labels
    for f in range(5):
        idx = fa.test_indices(f)
        assert sorted(y[idx].tolist()) == [0, 1]


def test_folds_heart_sizes(heart):
    assert stratified_folds(heart, 5, 1).sizes() == [54] * 5


def test_folds_deterministic(heart):
    assert stratified_folds(heart, 5, 7) == stratified_folds(heart, 5, 7)
    assert stratified_folds(heart, 5, 7) != stratified_folds(heart, 5, 8)


def test_folds_errors():
    d = _balanced(2)
    with pytest.raises(InvalidFoldCount):
        stratified_folds(d, 1, 0)
    with pytest.raises(InvalidFoldCount):
        stratified_folds(d, 5, 0)


def test_rare_class_spread_over_distinct_folds():
    schema = (AttributeSpec.numeric("x"), AttributeSpec.nominal("y", ["big", "rare"], role=Role.CLASS))
    rows = [(float(i), 0) for i in range(20)] + [(100.0, 1), (101.0, 1)]
    fa = stratified_folds(Dataset(schema, tuple(rows)), 5, 3)
    rare = [fa.assignment[20], fa.assignment[21]]
    assert rare[0] != rare[1]


@settings(max_examples=60, deadline=None)
@given(counts=st.lists(st.integers(1, 12), min_size=1, max_size=4), data=st.data())
def test_folds_partition_and_stratification(counts, data):
    schema = (AttributeSpec.numeric("x"),
              AttributeSpec.nominal("y", [f"c{i}" for i in range(len(counts))], role=Role.CLASS))
    rows = [(float(i), c) for c, n in enumerate(counts) for i in range(n)]
    d = Dataset(schema, tuple(rows))
    k = data.draw(st.integers(2, max(2, len(d))))
    if k > len(d):
        with pytest.raises(InvalidFoldCount):
            stratified_folds(d, k, 0)
        return
    fa = stratified_folds(d, k, data.draw(st.integers(0, 10**6)))
    a = np.asarray(fa.assignment)
    assert len(a) == len(d) and a.min() >= 0 and a.max() < k
    for c in range(len(counts)):
        sizes = np.bincount(a[d.labels == c], minlength=k)
        assert sizes.max() - sizes.min() <= 1
    total = np.bincount(a, minlength=k)
    assert total.max() - total.min() <= 1


def test_project(weather):
    assert project(weather, [1, 1, 1, 1]) == weather
    p = project(weather, [0, 1, 0, 0])
    assert [a.name for a in p.schema] == ["temperature", "play"]
    assert p.rows[0] == (85.0, 1)
    with pytest.raises(MaskLengthError):
        project(weather, [1, 0])
    with pytest.raises(EmptyMaskError):
        project(weather, [0, 0, 0, 0])


@settings(max_examples=30, deadline=None)
@given(mask=st.lists(st.integers(0, 1), min_size=4, max_size=4).filter(any))
def test_project_composition(weather, mask):
    p = project(weather, mask)
    assert project(p, [1] * p.n_features) == p


def test_project_keeps_class_position():
    d = parse_arff(SMALL, class_attribute="colour")
    p = project(d, [0, 1])
    assert [a.name for a in p.schema] == ["colour", "label"]


def test_synth_heart_ap():
    d = synth_heart_ap(40, 1)
    names = [a.name for a in d.schema]
    assert names == ["Age", "Gender", "Diabetic", "BP Systolic", "BP Dialic", "Height", "Weight", "BMI",
                     "Hypertension", "Rural", "Urban", "Disease"]
    kinds = [a.kind for a in d.schema]
    assert kinds == [Kind.NUMERIC, Kind.NOMINAL, Kind.NOMINAL, Kind.NUMERIC, Kind.NUMERIC, Kind.NUMERIC,
                     Kind.NUMERIC, Kind.NUMERIC, Kind.NOMINAL, Kind.NOMINAL, Kind.NOMINAL, Kind.NOMINAL]
    assert len(d) == 40
    assert d.class_spec.categories == ("healthy", "sick")
    assert 0 < d.labels.sum() < 40
    for row in d.rows:
        height, weight, bmi = row[5], row[6], row[7]
        assert bmi == pytest.approx(weight / (height / 100) ** 2, abs=0.06)
        assert row[9] != row[10]  # rural xor urban


def test_synth_single_and_deterministic():
    one = synth_heart_ap(1, 5)
    assert len(one) == 1 and one.rows[0][-1] is not None
    assert to_arff(synth_heart_ap(40, 1)) == to_arff(synth_heart_ap(40, 1))
    assert synth_heart_ap(40, 1) != synth_heart_ap(40, 2)
    with pytest.raises(ValueError):
        synth_heart_ap(0, 1)
