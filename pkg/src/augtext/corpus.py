"""Dataset ingestion, validation, stratified subsetting, and persistence.

File formats:
  dataset JSONL   {"text": "...", "label": "..."} per line
  dataset CSV     RFC 4180 with a header row, text/label columns by name
  augmented JSONL {"orig_id": 7, "method": "imf", "text": "...",
                   "label": "...", "loss": 0.41}   (loss optional)
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyDatasetError,
    MissingColumnError,
    SchemaError,
    SubsetTooLargeError,
)

METHODS = ("imf", "ri", "rs", "rd", "sr", "bt", "br", "real")


@dataclass(frozen=True)
class Example:
    """One labeled text record."""

    id: int
    text: str
    label: str

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"example id must be non-negative, got {self.id}")
        if not self.text.strip():
            raise ValueError(f"example {self.id}: text is empty or whitespace-only")


@dataclass(frozen=True)
class Dataset:
    """An ordered, validated collection of examples."""

    name: str
    examples: tuple[Example, ...]
    label_set: frozenset[str] = field(default=frozenset())

    def __post_init__(self):
        if not self.examples:
            raise EmptyDatasetError(f"dataset {self.name!r} has no examples")
        if not self.label_set:
            object.__setattr__(
                self, "label_set", frozenset(ex.label for ex in self.examples)
            )
        ids = [ex.id for ex in self.examples]
        if len(set(ids)) != len(ids):
            raise ValueError(f"dataset {self.name!r} has duplicate example ids")
        for ex in self.examples:
            if ex.label not in self.label_set:
                raise ValueError(
                    f"example {ex.id} has label {ex.label!r} outside the label set"
                )
        if len(self.label_set) < 2:
            raise ValueError(
                f"dataset {self.name!r} needs at least 2 labels, "
                f"got {len(self.label_set)}"
            )

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def labels(self) -> list[str]:
        """Label set in sorted order (the canonical class ordering)."""
        return sorted(self.label_set)


@dataclass(frozen=True)
class AugmentedExample:
    """An augmented text carrying its provenance.

    The label is inherited from the source example; augmentation never
    relabels. ``loss`` is filled in by the scoring step, if any.
    """

    orig_id: int
    method: str
    text: str
    label: str
    loss: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.loss is not None and not (self.loss >= 0):
            raise ValueError(f"loss must be >= 0, got {self.loss}")


def load_jsonl(path: str | Path) -> Dataset:
    """Load a dataset from JSONL. Ids are assigned by line order, 0-based."""
    path = Path(path)
    try:
        raw = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise SchemaError(0, f"{path}: invalid UTF-8 ({e})") from e
    examples: list[Example] = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(line_no, f"invalid JSON: {e.msg}") from e
        if not isinstance(obj, dict):
            raise SchemaError(line_no, "expected a JSON object")
        text = obj.get("text")
        label = obj.get("label")
        if not isinstance(text, str):
            raise SchemaError(line_no, 'missing or non-string field "text"')
        if not isinstance(label, str):
            raise SchemaError(line_no, 'missing or non-string field "label"')
        if not text.strip():
            raise SchemaError(line_no, '"text" is empty or whitespace-only')
        examples.append(Example(id=len(examples), text=text, label=label))
    if not examples:
        raise EmptyDatasetError(f"{path}: no valid lines")
    return Dataset(name=path.stem, examples=tuple(examples))


def load_csv(path: str | Path, text_column: str = "text", label_column: str = "label") -> Dataset:
    """Load a dataset from a headed CSV file (RFC 4180)."""
    path = Path(path)
    examples: list[Example] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for col in (text_column, label_column):
            if col not in header:
                raise MissingColumnError(col)
        for row_no, row in enumerate(reader, start=2):  # header is line 1
            text = row.get(text_column)
            label = row.get(label_column)
            if text is None or label is None:
                raise SchemaError(row_no, "row has fewer fields than the header")
            if not text.strip():
                raise SchemaError(row_no, f"column {text_column!r} is empty")
            examples.append(Example(id=len(examples), text=text, label=label))
    if not examples:
        raise EmptyDatasetError(f"{path}: no data rows")
    return Dataset(name=path.stem, examples=tuple(examples))


def sample_subset(d: Dataset, n: int, seed: int) -> Dataset:
    """Stratified uniform sample of n examples without replacement.

    Per-label quotas are proportional to label frequency with
    largest-remainder rounding; within a label, examples are picked
    uniformly from a stream derived from (seed, label rank). Output keeps
    the original relative order and is deterministic in (d, n, seed).
    """
    if n < 1:
        raise ValueError(f"subset size must be >= 1, got {n}")
    if n > len(d):
        raise SubsetTooLargeError(f"requested {n} of {len(d)} examples")

    labels = d.labels
    positions: dict[str, list[int]] = {lab: [] for lab in labels}
    for idx, ex in enumerate(d.examples):
        positions[ex.label].append(idx)

    total = len(d)
    exact = {lab: len(positions[lab]) * n / total for lab in labels}
    quota = {lab: math.floor(exact[lab]) for lab in labels}
    shortfall = n - sum(quota.values())
    # Largest remainder; ties broken by label order for determinism.
    by_remainder = sorted(labels, key=lambda lab: (-(exact[lab] - quota[lab]), lab))
    for lab in by_remainder[:shortfall]:
        quota[lab] += 1

    chosen: list[int] = []
    for rank, lab in enumerate(labels):
        want = quota[lab]
        if want == 0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence(seed % 2**63, spawn_key=(rank,)))
        picks = rng.choice(len(positions[lab]), size=want, replace=False)
        chosen.extend(positions[lab][i] for i in picks)
    chosen.sort()
    subset = tuple(d.examples[i] for i in chosen)
    return Dataset(name=f"{d.name}[n={n}]", examples=subset, label_set=d.label_set)


def save_augmented(path: str | Path, items: Sequence[AugmentedExample]) -> None:
    """Write augmented examples as JSONL; loss is omitted when absent."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as f:
            for item in items:
                record: dict = {
                    "orig_id": item.orig_id,
                    "method": item.method,
                    "text": item.text,
                    "label": item.label,
                }
                if item.loss is not None:
                    record["loss"] = item.loss
                f.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
                f.write("\n")
    except OSError as e:
        raise OSError(f"cannot write augmented file {path}: {e}") from e


def load_augmented(path: str | Path) -> list[AugmentedExample]:
    """Read augmented examples back; inverse of save_augmented."""
    path = Path(path)
    items: list[AugmentedExample] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(line_no, f"invalid JSON: {e.msg}") from e
            try:
                items.append(
                    AugmentedExample(
                        orig_id=int(obj["orig_id"]),
                        method=obj["method"],
                        text=obj["text"],
                        label=obj["label"],
                        loss=obj.get("loss"),
                    )
                )
            except (KeyError, TypeError, ValueError) as e:
                raise SchemaError(line_no, str(e)) from e
    return items


def dataset_from_rows(name: str, rows: Iterable[tuple[str, str]]) -> Dataset:
    """Build a dataset from (text, label) rows, assigning sequential ids."""
    examples = tuple(
        Example(id=i, text=text, label=label) for i, (text, label) in enumerate(rows)
    )
    if not examples:
        raise EmptyDatasetError(f"dataset {name!r} has no rows")
    return Dataset(name=name, examples=examples)
