"""Tabular dataset model, ARFF/CSV ingestion, stratified folds and projection.

Cells are stored as plain Python values: ``float`` for numeric attributes,
``int`` (category index) for nominal attributes and ``None`` for missing.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from ._rng import make_rng
from .errors import (
    ClassError,
    DataSyntaxError,
    EmptyMaskError,
    HeaderMismatch,
    InvalidFoldCount,
    MaskLengthError,
    SchemaError,
)

MISSING = None
Value = float | int | None


class Kind(str, Enum):
    NUMERIC = "numeric"
    NOMINAL = "nominal"


class Role(str, Enum):
    FEATURE = "feature"
    CLASS = "class"


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: Kind
    categories: tuple[str, ...] = ()
    role: Role = Role.FEATURE

    def __post_init__(self):
        name = self.name.strip()
        if not name:
            raise SchemaError("attribute name is empty")
        object.__setattr__(self, "name", name)
        cats = tuple(c.strip() for c in self.categories)
        object.__setattr__(self, "categories", cats)
        if self.kind is Kind.NOMINAL:
            if not cats:
                raise SchemaError(f"nominal attribute {name!r} has no categories")
            if len(set(cats)) != len(cats):
                raise SchemaError(f"nominal attribute {name!r} has duplicate categories")
        elif cats:
            raise SchemaError(f"numeric attribute {name!r} cannot declare categories")
        if self.role is Role.CLASS and self.kind is not Kind.NOMINAL:
            raise ClassError(f"class attribute {name!r} must be nominal")

    @classmethod
    def numeric(cls, name: str) -> "AttributeSpec":
        return cls(name, Kind.NUMERIC)

    @classmethod
    def nominal(cls, name: str, categories: Iterable[str], role: Role = Role.FEATURE) -> "AttributeSpec":
        return cls(name, Kind.NOMINAL, tuple(categories), role)

    @property
    def is_nominal(self) -> bool:
        return self.kind is Kind.NOMINAL

    def as_class(self) -> "AttributeSpec":
        return AttributeSpec(self.name, self.kind, self.categories, Role.CLASS)

    def as_feature(self) -> "AttributeSpec":
        return AttributeSpec(self.name, self.kind, self.categories, Role.FEATURE)


def _check_schema(schema: Sequence[AttributeSpec]) -> int:
    n_class = sum(a.role is Role.CLASS for a in schema)
    if n_class != 1:
        raise ClassError(f"schema must have exactly one class attribute, found {n_class}")
    names = [a.name for a in schema]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate attribute names in schema")
    return next(i for i, a in enumerate(schema) if a.role is Role.CLASS)


def _check_cell(spec: AttributeSpec, value: Value, row: int) -> Value:
    if value is None:
        return None
    if spec.is_nominal:
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise SchemaError(f"row {row}: nominal attribute {spec.name!r} needs a category index, got {value!r}")
        if not 0 <= value < len(spec.categories):
            raise SchemaError(f"row {row}: category index {value} out of range for {spec.name!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError(f"row {row}: non-finite value for numeric attribute {spec.name!r}")
    return value


@dataclass(frozen=True)
class Dataset:
    """Immutable typed table with exactly one nominal class attribute."""

    schema: tuple[AttributeSpec, ...]
    rows: tuple[tuple[Value, ...], ...]
    name: str = "dataset"

    def __post_init__(self):
        schema = tuple(self.schema)
        object.__setattr__(self, "schema", schema)
        cls_idx = _check_schema(schema)
        rows = []
        for r, row in enumerate(self.rows):
            if len(row) != len(schema):
                raise SchemaError(f"row {r}: expected {len(schema)} values, got {len(row)}")
            cells = tuple(_check_cell(spec, v, r) for spec, v in zip(schema, row))
            if cells[cls_idx] is None:
                raise ClassError(f"row {r}: class value is missing")
            rows.append(cells)
        object.__setattr__(self, "rows", tuple(rows))

    def __len__(self) -> int:
        return len(self.rows)

    @cached_property
    def class_index(self) -> int:
        return next(i for i, a in enumerate(self.schema) if a.role is Role.CLASS)

    @cached_property
    def feature_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.schema)) if i != self.class_index)

    @property
    def n_features(self) -> int:
        return len(self.schema) - 1

    @property
    def class_spec(self) -> AttributeSpec:
        return self.schema[self.class_index]

    @property
    def n_classes(self) -> int:
        return len(self.class_spec.categories)

    @cached_property
    def labels(self) -> np.ndarray:
        return np.fromiter((r[self.class_index] for r in self.rows), dtype=np.intp, count=len(self.rows))

    @cached_property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.schema)

    @cached_property
    def feature_matrix(self) -> np.ndarray:
        """Feature cells as float64, nominal cells as category codes, NaN for missing."""
        X = np.full((len(self.rows), self.n_features), np.nan)
        for j, col in enumerate(self.feature_indices):
            for i, row in enumerate(self.rows):
                v = row[col]
                if v is not None:
                    X[i, j] = v
        X.setflags(write=False)
        return X

    @cached_property
    def nominal_features(self) -> np.ndarray:
        return np.array([self.schema[c].is_nominal for c in self.feature_indices], dtype=bool)

    def with_rows(self, rows: Iterable[Sequence[Value]]) -> "Dataset":
        return Dataset(self.schema, tuple(tuple(r) for r in rows), self.name)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(self.schema, tuple(self.rows[i] for i in indices), self.name)


def schema_fingerprint(schema: Sequence[AttributeSpec]) -> str:
    parts = []
    for a in schema:
        parts.append(f"{a.name}:{a.kind.value}:{a.role.value}:{'|'.join(a.categories)}")
    return ";".join(parts)


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: tuple[int, ...]

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignment) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignment) != fold)

    def sizes(self) -> list[int]:
        counts = np.bincount(np.asarray(self.assignment, dtype=np.intp), minlength=self.k)
        return counts.tolist()


# ---------------------------------------------------------------- ARFF

_QUOTED = re.compile(r"""\s*(?:'((?:[^'\\]|\\.)*)'|"((?:[^"\\]|\\.)*)"|([^\s{]+))""")
_NUMERIC_TYPES = {"numeric", "real", "integer"}


def _unquote(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        return re.sub(r"\\(.)", r"\1", token[1:-1])
    return token


def _split_values(text: str, lineno: int) -> list[str]:
    """Split a comma-separated line honoring single and double quotes."""
    out: list[str] = []
    buf: list[str] = []
    quote = None
    i = 0
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\" and i + 1 < len(text):
                buf.append(text[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = None
            else:
                buf.append(ch)
        elif ch in "'\"" and not "".join(buf).strip():
            buf = []
            quote = ch
        elif ch == ",":
            out.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
        i += 1
    if quote:
        raise DataSyntaxError(lineno, "unterminated quoted value")
    out.append("".join(buf).strip())
    return out


def _parse_attribute(rest: str, lineno: int) -> AttributeSpec:
    m = _QUOTED.match(rest)
    if not m or not (m.group(1) or m.group(2) or m.group(3)):
        raise DataSyntaxError(lineno, "attribute declaration lacks a name")
    name = next(g for g in m.groups() if g is not None)
    name = re.sub(r"\\(.)", r"\1", name)
    type_part = rest[m.end():].strip()
    if not type_part:
        raise DataSyntaxError(lineno, f"attribute {name!r} lacks a type")
    if type_part.startswith("{"):
        if not type_part.endswith("}"):
            raise DataSyntaxError(lineno, f"unterminated category list for {name!r}")
        cats = [c for c in _split_values(type_part[1:-1], lineno)]
        if any(c == "" for c in cats):
            raise DataSyntaxError(lineno, f"empty category in {name!r}")
        try:
            return AttributeSpec.nominal(name, cats)
        except SchemaError as exc:
            raise DataSyntaxError(lineno, exc.reason) from None
    type_word = type_part.split()[0].lower()
    if type_word in _NUMERIC_TYPES:
        return AttributeSpec.numeric(name)
    raise DataSyntaxError(lineno, f"unsupported attribute type {type_part.split()[0]!r} for {name!r}")


def _parse_cell(spec: AttributeSpec, token: str, lineno: int) -> Value:
    if token == "?":
        return None
    if spec.is_nominal:
        try:
            return spec.categories.index(token)
        except ValueError:
            raise SchemaError(f"undeclared value {token!r} for nominal attribute {spec.name!r}", lineno) from None
    try:
        value = float(token)
    except ValueError:
        raise SchemaError(f"non-numeric value {token!r} for attribute {spec.name!r}", lineno) from None
    if not math.isfinite(value):
        raise SchemaError(f"non-finite value {token!r} for attribute {spec.name!r}", lineno)
    return value


def _assign_class(schema: list[AttributeSpec], class_attribute: str | None,
                  lines: list[int] | None = None) -> list[AttributeSpec]:
    if not schema:
        raise ClassError("no attributes declared")
    if class_attribute is None:
        idx = len(schema) - 1
    else:
        wanted = class_attribute.strip()
        matches = [i for i, a in enumerate(schema) if a.name == wanted]
        if not matches:
            raise ClassError(f"class attribute {wanted!r} is not declared")
        idx = matches[0]
    if not schema[idx].is_nominal:
        raise ClassError(f"class attribute {schema[idx].name!r} is numeric", lines[idx] if lines else None)
    return [a.as_class() if i == idx else a.as_feature() for i, a in enumerate(schema)]


def _build(schema, rows, name, class_idx, row_lines) -> Dataset:
    for cells, lineno in zip(rows, row_lines):
        if cells[class_idx] is None:
            raise ClassError(f"class value is missing ('?' in {schema[class_idx].name!r})", lineno)
    return Dataset(tuple(schema), tuple(rows), name)


def parse_arff(text: str, class_attribute: str | None = None) -> Dataset:
    """Parse the numeric/nominal subset of ARFF.

    Keywords are case-insensitive, ``%`` starts a comment line and ``?``
    marks a missing cell. The last attribute is the class unless
    ``class_attribute`` names another one.
    """
    relation = None
    attrs: list[AttributeSpec] = []
    attr_lines: list[int] = []
    raw_rows: list[tuple[int, list[str]]] = []
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if in_data:
            if line.startswith("{"):
                raise DataSyntaxError(lineno, "sparse ARFF rows are not supported")
            raw_rows.append((lineno, _split_values(line, lineno)))
            continue
        if not line.startswith("@"):
            raise DataSyntaxError(lineno, f"expected a declaration, got {line[:30]!r}")
        keyword, _, rest = line.partition(" ")
        if "\t" in keyword:
            keyword, _, tail = keyword.partition("\t")
            rest = tail + " " + rest
        keyword = keyword.lower()
        rest = rest.strip()
        if keyword == "@relation":
            if relation is not None:
                raise DataSyntaxError(lineno, "duplicate @relation")
            if not rest:
                raise DataSyntaxError(lineno, "@relation lacks a name")
            relation = _unquote(rest)
        elif keyword == "@attribute":
            if relation is None:
                raise DataSyntaxError(lineno, "@attribute before @relation")
            spec = _parse_attribute(rest, lineno)
            if any(a.name == spec.name for a in attrs):
                raise DataSyntaxError(lineno, f"duplicate attribute {spec.name!r}")
            attrs.append(spec)
            attr_lines.append(lineno)
        elif keyword == "@data":
            if not attrs:
                raise DataSyntaxError(lineno, "@data before any @attribute")
            in_data = True
        else:
            raise DataSyntaxError(lineno, f"unknown keyword {keyword!r}")
    if relation is None:
        raise DataSyntaxError(1, "missing @relation")
    if not in_data:
        raise DataSyntaxError(len(text.splitlines()) or 1, "missing @data section")
    schema = _assign_class(attrs, class_attribute, attr_lines)
    class_idx = next(i for i, a in enumerate(schema) if a.role is Role.CLASS)
    rows = []
    for lineno, tokens in raw_rows:
        if len(tokens) != len(schema):
            raise SchemaError(f"expected {len(schema)} values, got {len(tokens)}", lineno)
        rows.append(tuple(_parse_cell(a, t, lineno) for a, t in zip(schema, tokens)))
    return _build(schema, rows, relation, class_idx, [ln for ln, _ in raw_rows])


def parse_csv(text: str, schema: Sequence[AttributeSpec], name: str = "dataset") -> Dataset:
    """Parse header + rows against a caller-supplied schema; empty cell = missing."""
    schema = list(schema)
    class_idx = _check_schema(schema)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderMismatch("CSV text is empty") from None
    header = [h.strip() for h in header]
    expected = [a.name for a in schema]
    if header != expected:
        raise HeaderMismatch(f"header {header} does not match schema {expected}")
    rows = []
    row_lines = []
    for fields in reader:
        lineno = reader.line_num
        if not fields:
            continue
        if len(fields) != len(schema):
            raise SchemaError(f"expected {len(schema)} fields, got {len(fields)}", lineno)
        cells = []
        for spec, tok in zip(schema, fields):
            tok = tok.strip()
            cells.append(None if tok == "" else _parse_cell(spec, tok, lineno))
        rows.append(tuple(cells))
        row_lines.append(lineno)
    return _build(schema, rows, name, class_idx, row_lines)


def _quote_name(name: str) -> str:
    if re.fullmatch(r"[A-Za-z0-9_.\-]+", name) and name not in ("?",):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _format_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def to_arff(d: Dataset) -> str:
    """Serialize a dataset to ARFF; ``parse_arff`` of the output equals ``d``."""
    lines = [f"@relation {_quote_name(d.name)}", ""]
    for a in d.schema:
        if a.is_nominal:
            cats = ",".join(_quote_name(c) for c in a.categories)
            lines.append(f"@attribute {_quote_name(a.name)} {{{cats}}}")
        else:
            lines.append(f"@attribute {_quote_name(a.name)} numeric")
    lines += ["", "@data"]
    for row in d.rows:
        cells = []
        for a, v in zip(d.schema, row):
            if v is None:
                cells.append("?")
            elif a.is_nominal:
                cells.append(_quote_name(a.categories[v]))
            else:
                cells.append(_format_number(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def load(path, class_attribute: str | None = None, schema: Sequence[AttributeSpec] | None = None) -> Dataset:
    """Load an ``.arff`` file, or a ``.csv`` file when ``schema`` is given."""
    from pathlib import Path

    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".csv":
        if schema is None:
            raise SchemaError("CSV input requires an explicit schema")
        return parse_csv(text, schema, name=path.stem)
    return parse_arff(text, class_attribute)


# ---------------------------------------------------------------- folds / projection

def stratified_folds(d: Dataset, k: int, seed: int) -> FoldAssignment:
    """Assign rows to ``k`` folds so each class is spread as evenly as possible.

    Members of each class are shuffled and dealt round-robin; the dealing
    position carries over between classes so overall fold sizes also stay
    within one of each other.
    """
    n = len(d)
    if k < 2 or k > n:
        raise InvalidFoldCount(f"fold count must be in [2, {n}], got {k}")
    rng = make_rng(seed, "folds")
    labels = d.labels
    assignment = np.empty(n, dtype=np.intp)
    pos = 0
    for c in range(d.n_classes):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        assignment[members] = (pos + np.arange(len(members))) % k
        pos = (pos + len(members)) % k
    return FoldAssignment(k, tuple(int(a) for a in assignment))


def project(d: Dataset, mask: Sequence[int]) -> Dataset:
    """Keep the masked-in feature attributes and the class, in schema order."""
    bits = [int(b) for b in mask]
    if len(bits) != d.n_features:
        raise MaskLengthError(f"mask has {len(bits)} bits, dataset has {d.n_features} features")
    if not any(bits):
        raise EmptyMaskError("mask selects no attributes")
    keep = sorted([c for c, b in zip(d.feature_indices, bits) if b] + [d.class_index])
    if len(keep) == len(d.schema):
        return d
    schema = tuple(d.schema[c] for c in keep)
    rows = tuple(tuple(row[c] for c in keep) for row in d.rows)
    return Dataset(schema, rows, d.name)


# ---------------------------------------------------------------- synthetic heart-AP

# Plausible-range constants for the synthetic generator. The risk rule only
# exists to give tests a learnable signal; it is not a medical model.
SYNTH_AGE_RANGE = (25, 80)
SYNTH_HEIGHT_CM = (148.0, 172.0)
SYNTH_MALE_HEIGHT_OFFSET_CM = 10.0
SYNTH_BMI_RANGE = (17.0, 38.0)
SYNTH_SYSTOLIC_BASE = 105.0
SYNTH_AGE_CUTOFF = 50
SYNTH_SYSTOLIC_CUTOFF = 140.0
SYNTH_BMI_CUTOFF = 27.0
SYNTH_RISK_THRESHOLD = 2
SYNTH_LABEL_NOISE = 0.05

HEART_AP_SCHEMA = (
    AttributeSpec.numeric("Age"),
    AttributeSpec.nominal("Gender", ["male", "female"]),
    AttributeSpec.nominal("Diabetic", ["yes", "no"]),
    AttributeSpec.numeric("BP Systolic"),
    AttributeSpec.numeric("BP Dialic"),
    AttributeSpec.numeric("Height"),
    AttributeSpec.numeric("Weight"),
    AttributeSpec.numeric("BMI"),
    AttributeSpec.nominal("Hypertension", ["yes", "no"]),
    AttributeSpec.nominal("Rural", ["yes", "no"]),
    AttributeSpec.nominal("Urban", ["yes", "no"]),
    AttributeSpec.nominal("Disease", ["healthy", "sick"], role=Role.CLASS),
)


def synth_heart_ap(n: int = 40, seed: int = 1) -> Dataset:
    """Generate ``n`` synthetic patients over the 12-attribute heart-AP schema.

    A patient is labelled sick when at least ``SYNTH_RISK_THRESHOLD`` of
    (age over cutoff, systolic over cutoff, BMI over cutoff, diabetic,
    hypertensive) hold; ``SYNTH_LABEL_NOISE`` of labels are then flipped.
    Height is in cm, weight in kg, and BMI is derived from them.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed, "synth-heart-ap")
    rows = []
    for _ in range(n):
        age = int(rng.integers(SYNTH_AGE_RANGE[0], SYNTH_AGE_RANGE[1] + 1))
        male = rng.random() < 0.5
        height = round(float(rng.uniform(*SYNTH_HEIGHT_CM)) + (SYNTH_MALE_HEIGHT_OFFSET_CM if male else 0.0), 1)
        target_bmi = float(rng.uniform(*SYNTH_BMI_RANGE))
        weight = round(target_bmi * (height / 100.0) ** 2, 1)
        bmi = round(weight / (height / 100.0) ** 2, 1)
        diabetic = rng.random() < (0.15 + 0.004 * (age - SYNTH_AGE_RANGE[0]))
        systolic = round(SYNTH_SYSTOLIC_BASE + 0.5 * (age - SYNTH_AGE_RANGE[0]) + 1.2 * (bmi - 22.0)
                         + float(rng.normal(0.0, 10.0)))
        diastolic = round(0.6 * systolic + float(rng.normal(0.0, 5.0)))
        hypertension = systolic >= SYNTH_SYSTOLIC_CUTOFF or rng.random() < 0.1
        rural = rng.random() < 0.6
        risk = (age > SYNTH_AGE_CUTOFF) + (systolic > SYNTH_SYSTOLIC_CUTOFF) + (bmi > SYNTH_BMI_CUTOFF) \
            + diabetic + hypertension
        sick = risk >= SYNTH_RISK_THRESHOLD
        if rng.random() < SYNTH_LABEL_NOISE:
            sick = not sick
        yes = lambda flag: 0 if flag else 1  # noqa: E731
        rows.append((
            float(age), 0 if male else 1, yes(diabetic), float(systolic), float(diastolic),
            height, weight, bmi, yes(hypertension), yes(rural), yes(not rural), 1 if sick else 0,
        ))
    return Dataset(HEART_AP_SCHEMA, tuple(rows), "heart-disease-ap")


def bundled_path(name: str):
    """Path of a vendored fixture (``weather`` or ``heart-statlog``)."""
    from importlib.resources import files

    return files("knnga").joinpath("data").joinpath(f"{name}.arff")


def load_bundled(name: str) -> Dataset:
    return parse_arff(bundled_path(name).read_text(encoding="utf-8"))
