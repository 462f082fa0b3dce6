"""Data model, directory I/O, attribute binarization and the planted synthetic generator."""
from __future__ import annotations

import json
import logging
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

ROLES = ("seen", "unseen", "generated", "mixed")
NAME_RE = re.compile(r"^[A-Za-z0-9_+-]+$")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (N x d) with class indices into an AttributeMatrix."""

    features: np.ndarray
    labels: np.ndarray
    role: str = "seen"

    def __post_init__(self):
        x = _frozen(self.features, np.float64)
        y = _frozen(self.labels, np.int64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValidationError(f"features must be a non-empty 2-D matrix, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValidationError(f"{y.shape[0] if y.ndim else 0} labels for {x.shape[0]} feature rows")
        if not np.all(np.isfinite(x)):
            r, c = np.argwhere(~np.isfinite(x))[0]
            raise ValidationError(f"non-finite feature at row {r}, column {c}")
        if np.any(y < 0):
            raise ValidationError("labels must be non-negative class indices")
        if self.role not in ROLES:
            raise ValidationError(f"unknown role {self.role!r}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def restrict(self, class_idx, role: str | None = None) -> "Dataset":
        keep = np.isin(self.labels, np.asarray(list(class_idx), dtype=np.int64))
        if not keep.any():
            raise ValidationError("no samples belong to the requested classes")
        return Dataset(self.features[keep], self.labels[keep], role or self.role)


@dataclass(frozen=True)
class AttributeMatrix:
    """Per-class attribute signatures, K classes x N_a attributes, values in [0, 1]."""

    values: np.ndarray
    class_names: tuple = ()
    attr_names: tuple = ()

    def __post_init__(self):
        v = _frozen(self.values, np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValidationError(f"attribute matrix must be non-empty 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            r, c = np.argwhere(~np.isfinite(v))[0]
            raise ValidationError(f"non-finite attribute at class row {r}, attribute {c}")
        bad = (v < 0) | (v > 1)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValidationError(f"attribute value {v[r, c]} outside [0,1] at class row {r}, attribute {c}")
        k, na = v.shape
        cn = tuple(self.class_names) or tuple(f"class{i:02d}" for i in range(k))
        an = tuple(self.attr_names) or tuple(f"attr{j:02d}" for j in range(na))
        if len(cn) != k or len(an) != na:
            raise ValidationError("name lists do not match attribute matrix shape")
        if len(set(cn)) != k or len(set(an)) != na:
            raise ValidationError("class and attribute names must be unique")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "class_names", cn)
        object.__setattr__(self, "attr_names", an)

    @property
    def n_classes(self) -> int:
        return self.values.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.values.shape[1]

    def binarized(self) -> np.ndarray:
        return binarize_attributes(self)


@dataclass(frozen=True)
class SplitSpec:
    seen_classes: tuple
    unseen_classes: tuple

    def __post_init__(self):
        seen = tuple(sorted(int(i) for i in self.seen_classes))
        unseen = tuple(sorted(int(i) for i in self.unseen_classes))
        if set(seen) & set(unseen):
            raise ValidationError(f"seen and unseen classes overlap: {sorted(set(seen) & set(unseen))}")
        object.__setattr__(self, "seen_classes", seen)
        object.__setattr__(self, "unseen_classes", unseen)


@dataclass(frozen=True)
class SynthInfo:
    """Ground truth planted by synth_generate."""

    informative: tuple
    noise: tuple
    projection: np.ndarray = field(repr=False)
    signatures: np.ndarray = field(repr=False)


def binarize_attributes(a) -> np.ndarray:
    """Threshold each attribute at its mean over all classes (strict >).

    Accepts an AttributeMatrix or a raw K x N_a array. Constant columns come out
    all-zero and trigger a warning; they are kept so column indices stay aligned.
    """
    v = a.values if isinstance(a, AttributeMatrix) else np.asarray(a, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 2:
        raise ValidationError("binarization needs at least 2 classes")
    out = (v > v.mean(axis=0, keepdims=True)).astype(np.int8)
    const = np.flatnonzero(np.ptp(v, axis=0) == 0)
    if const.size:
        warnings.warn(f"constant attribute columns binarize to all-zero: {const.tolist()}", stacklevel=2)
    return out


def split_by_role(data: Dataset, split: SplitSpec) -> tuple[Dataset, Dataset]:
    return data.restrict(split.seen_classes, "seen"), data.restrict(split.unseen_classes, "unseen")


# -- directory format -------------------------------------------------------

def _parse_float(tok: str, where: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ValidationError(f"cannot parse {tok!r} as a decimal at {where}") from None
    if not np.isfinite(v):
        raise ValidationError(f"non-finite value {tok!r} at {where}")
    return v


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise ValidationError(f"missing file {path}")
    return [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]


def _check_name(name: str, where: str) -> str:
    if not NAME_RE.match(name):
        raise ValidationError(f"invalid name {name!r} at {where}")
    return name


def read_attributes_csv(path) -> AttributeMatrix:
    path = Path(path)
    lines = _read_lines(path)
    if len(lines) < 2:
        raise ValidationError(f"{path.name}: need a header row and at least one class row")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    na = len(rows[0]) - 1
    if len(header) == na + 1:
        header = header[1:]
    if len(header) != na:
        raise ValidationError(f"{path.name}: header has {len(header)} names but rows carry {na} attributes")
    names, vals = [], []
    for i, r in enumerate(rows, start=2):
        if len(r) != na + 1:
            raise ValidationError(f"{path.name} line {i}: expected {na + 1} fields, got {len(r)}")
        names.append(_check_name(r[0], f"{path.name} line {i}"))
        row = []
        for j, tok in enumerate(r[1:]):
            v = _parse_float(tok, f"{path.name} line {i}, column {j + 2}")
            if v < 0 or v > 1:
                raise ValidationError(
                    f"{path.name} line {i}, attribute {header[j]!r}: value {tok} outside [0,1]")
            row.append(v)
        vals.append(row)
    for j, h in enumerate(header):
        _check_name(h, f"{path.name} header column {j + 1}")
    return AttributeMatrix(np.array(vals), tuple(names), tuple(header))


def load_dataset(dir_path) -> tuple[Dataset, AttributeMatrix, SplitSpec]:
    """Read features.csv, labels.csv, attributes.csv and split.json from a directory."""
    d = Path(dir_path)
    if not d.is_dir():
        raise ValidationError(f"dataset directory {d} does not exist")
    attrs = read_attributes_csv(d / "attributes.csv")
    index = {n: i for i, n in enumerate(attrs.class_names)}

    feat_lines = _read_lines(d / "features.csv")
    rows = []
    width = None
    for i, ln in enumerate(feat_lines, start=1):
        toks = ln.split(",")
        if width is None:
            width = len(toks)
        elif len(toks) != width:
            raise ValidationError(f"features.csv line {i}: expected {width} columns, got {len(toks)}")
        rows.append([_parse_float(t, f"features.csv line {i}, column {j + 1}") for j, t in enumerate(toks)])

    label_lines = _read_lines(d / "labels.csv")
    if len(label_lines) != len(rows):
        raise ValidationError(
            f"dimension mismatch: labels.csv has {len(label_lines)} rows, features.csv has {len(rows)}")
    labels = []
    for i, name in enumerate(label_lines, start=1):
        if name not in index:
            raise ValidationError(f"labels.csv line {i}: class {name!r} not in attributes.csv")
        labels.append(index[name])

    split_path = d / "split.json"
    if not split_path.is_file():
        raise ValidationError(f"missing file {split_path}")
    try:
        sp = json.loads(split_path.read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"split.json: {e}") from None
    try:
        seen = [index[n] for n in sp["seen"]]
        unseen = [index[n] for n in sp["unseen"]]
    except KeyError as e:
        raise ValidationError(f"split.json: unknown class or missing key {e}") from None
    split = SplitSpec(tuple(seen), tuple(unseen))
    used = set(labels)
    uncovered = used - set(seen) - set(unseen)
    if uncovered:
        raise ValidationError(
            f"split.json does not cover classes {[attrs.class_names[i] for i in sorted(uncovered)]}")

    role = sp.get("role")
    if role is None:
        if used <= set(split.seen_classes):
            role = "seen"
        elif used <= set(split.unseen_classes):
            role = "unseen"
        else:
            role = "mixed"
    data = Dataset(np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64), role)
    try:
        binarize_attributes(attrs)
    except ValidationError:
        pass
    else:
        if len({r.tobytes() for r in attrs.binarized()}) < attrs.n_classes:
            log.warning("binarized class signatures are not pairwise distinct; tau will be 0")
    return data, attrs, split


def _fmt(v: float) -> str:
    return repr(float(v))


def write_attributes_csv(path, attrs: AttributeMatrix) -> None:
    lines = [",".join(attrs.attr_names)]
    for name, row in zip(attrs.class_names, attrs.values):
        lines.append(",".join([name] + [_fmt(v) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def save_dataset(dir_path, data: Dataset, attrs: AttributeMatrix, split: SplitSpec,
                 write_role: bool = False) -> Path:
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    (d / "features.csv").write_text("".join(",".join(_fmt(v) for v in row) + "\n" for row in data.features))
    (d / "labels.csv").write_text("".join(attrs.class_names[i] + "\n" for i in data.labels))
    write_attributes_csv(d / "attributes.csv", attrs)
    sp = {"seen": [attrs.class_names[i] for i in split.seen_classes],
          "unseen": [attrs.class_names[i] for i in split.unseen_classes]}
    if write_role:
        sp["role"] = data.role
    (d / "split.json").write_text(json.dumps(sp, indent=2) + "\n")
    return d


# -- synthetic benchmark ----------------------------------------------------

def _distinct_codes(rng, k: int, n_bits: int) -> np.ndarray:
    if n_bits <= 20:
        codes = rng.choice(2 ** n_bits, size=k, replace=False)
        return ((codes[:, None] >> np.arange(n_bits)[None, :]) & 1).astype(np.int8)
    while True:
        s = rng.integers(0, 2, size=(k, n_bits), dtype=np.int8)
        if len({r.tobytes() for r in s}) == k:
            return s


def synth_generate(n_classes_seen: int, n_classes_unseen: int, n_informative: int, n_noise: int,
                   samples_per_class: int, d: int, noise_sigma: float, seed: int,
                   return_info: bool = False):
    """Planted benchmark: features are a linear image of binary informative signatures.

    Every informative column varies within the seen classes and within the unseen
    classes. Noise attributes are per-class uniform draws on [0, 1], independent of
    the features.
    Attribute columns are shuffled so informative and noise ones are interleaved;
    attribute names ("info*" / "noise*") record which is which.
    """
    counts = dict(n_classes_seen=n_classes_seen, n_classes_unseen=n_classes_unseen,
                  n_informative=n_informative, samples_per_class=samples_per_class, d=d)
    for k, v in counts.items():
        if int(v) < 1:
            raise ValidationError(f"{k} must be >= 1, got {v}")
    k = n_classes_seen + n_classes_unseen
    if n_informative < 64 and 2 ** n_informative < k:
        raise ValidationError(
            f"cannot plant {k} distinct signatures with {n_informative} informative attributes")
    if n_noise < 0 or n_informative + n_noise < 2:
        raise ValidationError("need n_noise >= 0 and n_informative + n_noise >= 2")
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be >= 0")

    rng = np.random.default_rng(seed)
    # every informative column must vary within the seen block and within the unseen block;
    # otherwise it is informative for one side only
    blocks = [b for b in (slice(0, n_classes_seen), slice(n_classes_seen, k)) if b.stop - b.start >= 2]
    for _ in range(10000):
        sig = _distinct_codes(rng, k, n_informative)
        if all(np.all(np.ptp(sig[b], axis=0) > 0) for b in blocks):
            break
    else:
        warnings.warn("could not plant informative columns that vary within both class blocks", stacklevel=2)

    noise_attr = rng.uniform(0.0, 1.0, size=(k, n_noise))

    n_attr = n_informative + n_noise
    perm = rng.permutation(n_attr)
    full = np.concatenate([sig, noise_attr], axis=1).astype(np.float64)
    values = np.empty_like(full)
    values[:, perm] = full
    names = [""] * n_attr
    for j in range(n_attr):
        names[perm[j]] = f"info{j}" if j < n_informative else f"noise{j - n_informative}"
    informative = tuple(sorted(int(perm[j]) for j in range(n_informative)))
    noise = tuple(sorted(int(perm[j]) for j in range(n_informative, n_attr)))

    proj = rng.normal(size=(d, n_informative))
    protos = (2.0 * sig - 1.0) @ proj.T
    labels = np.repeat(np.arange(k), samples_per_class)
    x = protos[labels] + noise_sigma * rng.normal(size=(labels.size, d))

    attrs = AttributeMatrix(values, tuple(f"class{i:02d}" for i in range(k)), tuple(names))
    split = SplitSpec(tuple(range(n_classes_seen)), tuple(range(n_classes_seen, k)))
    seen_mask = labels < n_classes_seen
    seen = Dataset(x[seen_mask], labels[seen_mask], "seen")
    unseen = Dataset(x[~seen_mask], labels[~seen_mask], "unseen")
    if return_info:
        return seen, unseen, attrs, split, SynthInfo(informative, noise, proj, sig)
    return seen, unseen, attrs, split


def merge(a: Dataset, b: Dataset, role: str = "mixed") -> Dataset:
    return Dataset(np.vstack([a.features, b.features]), np.concatenate([a.labels, b.labels]), role)
