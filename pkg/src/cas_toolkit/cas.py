"""Compositional attribute scarcity: frequency tables, dense ranks, and
per-image scores.

For every (scope, primary) group the assigned secondaries are counted
and ranked by descending frequency with dense ranks: the most frequent
secondary has rank 1, ties share a rank, and the next distinct count
gets the next integer.  An image's CAS is the sum of its secondaries'
ranks across all primaries, so higher CAS means a rarer attribute
combination.  Scope is per-class by default; global scoring pools every
class into one group.
"""

from dataclasses import dataclass, field

import numpy as np

from ._util import atomic_write_text, dump_json, read_jsonl, write_jsonl
from .errors import FormatError, ScopeMismatchError, ValidationError

SCOPE_PER_CLASS = "per-class"
SCOPE_GLOBAL = "global"
_GLOBAL_KEY = "*"


def _scope_key(scope, class_label):
    return class_label if scope == SCOPE_PER_CLASS else _GLOBAL_KEY


@dataclass
class FrequencyTable:
    """Secondary-attribute counts and dense ranks per (scope, primary)."""

    scope: str
    counts: dict
    ranks: dict

    def __post_init__(self):
        if self.scope not in (SCOPE_PER_CLASS, SCOPE_GLOBAL):
            raise ValidationError(f"unknown scope {self.scope!r}")

    def rank(self, class_label, primary, secondary):
        key = (_scope_key(self.scope, class_label), primary, secondary)
        try:
            return self.ranks[key]
        except KeyError:
            raise ScopeMismatchError(
                f"no rank for secondary {secondary!r} of primary {primary!r} "
                f"in scope {key[0]!r}"
            ) from None

    def count(self, class_label, primary, secondary):
        key = (_scope_key(self.scope, class_label), primary, secondary)
        try:
            return self.counts[key]
        except KeyError:
            raise ScopeMismatchError(
                f"no count for secondary {secondary!r} of primary {primary!r} "
                f"in scope {key[0]!r}"
            ) from None


@dataclass(frozen=True)
class CasScore:
    """Scarcity score for one image: per-primary ranks and their sum."""

    image_id: str
    class_label: str
    components: dict
    cas: int


@dataclass(frozen=True)
class CasStatistics:
    mean: float
    std: float
    n: int


def build_frequency_table(annotations, scope=SCOPE_PER_CLASS):
    """Count assigned secondaries and derive dense descending ranks."""
    if scope not in (SCOPE_PER_CLASS, SCOPE_GLOBAL):
        raise ValidationError(f"unknown scope {scope!r}")
    if len(annotations) == 0:
        raise ValidationError("cannot build a frequency table from zero annotations")
    counts = {}
    for image in annotations:
        key_base = _scope_key(scope, image.class_label)
        for primary, secondary in image.attributes.items():
            key = (key_base, primary, secondary)
            counts[key] = counts.get(key, 0) + 1
    grouped = {}
    for (scope_key, primary, secondary), count in counts.items():
        grouped.setdefault((scope_key, primary), {})[secondary] = count
    ranks = {}
    for (scope_key, primary), per_secondary in grouped.items():
        distinct = sorted(set(per_secondary.values()), reverse=True)
        rank_of_count = {count: position + 1 for position, count in enumerate(distinct)}
        for secondary, count in per_secondary.items():
            ranks[(scope_key, primary, secondary)] = rank_of_count[count]
    return FrequencyTable(scope=scope, counts=counts, ranks=ranks)


def score_image(image, table):
    """Score one annotated image against a frequency table."""
    components = {}
    total = 0
    for primary, secondary in image.attributes.items():
        rank = table.rank(image.class_label, primary, secondary)
        components[primary] = rank
        total += rank
    return CasScore(
        image_id=image.image_id,
        class_label=image.class_label,
        components=components,
        cas=total,
    )


def cas_of(annotations, table):
    """Score every annotated image, preserving dataset order."""
    return [score_image(image, table) for image in annotations]


def cas_statistics(scores):
    """Mean and population standard deviation of the CAS values."""
    if not scores:
        raise ValidationError("cannot compute statistics of zero scores")
    values = np.array([score.cas for score in scores], dtype=np.float64)
    return CasStatistics(
        mean=float(values.mean()), std=float(values.std(ddof=0)), n=len(scores)
    )


def write_cas_scores(scores, path):
    rows = [
        {
            "image_id": score.image_id,
            "class_label": score.class_label,
            "cas": score.cas,
            "components": {k: int(v) for k, v in score.components.items()},
        }
        for score in scores
    ]
    write_jsonl(path, rows)


def read_cas_scores(path):
    rows = read_jsonl(path, FormatError)
    scores = []
    seen = set()
    for k, row in enumerate(rows):
        if not isinstance(row, dict):
            raise FormatError(f"{path}: entry {k} is not a JSON object")
        unknown = set(row) - {"image_id", "class_label", "cas", "components"}
        if unknown:
            raise FormatError(f"{path}: entry {k} has unknown keys {sorted(unknown)}")
        image_id = row.get("image_id")
        class_label = row.get("class_label")
        cas = row.get("cas")
        components = row.get("components")
        if not isinstance(image_id, str) or not image_id:
            raise FormatError(f"{path}: entry {k}: bad image_id")
        if image_id in seen:
            raise FormatError(f"{path}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        if not isinstance(class_label, str) or not class_label:
            raise FormatError(f"{path}: entry {k}: bad class_label")
        if not isinstance(components, dict) or not components:
            raise FormatError(f"{path}: entry {k}: 'components' must be a non-empty object")
        clean = {}
        for primary, rank in components.items():
            if not isinstance(rank, int) or isinstance(rank, bool) or rank < 1:
                raise FormatError(
                    f"{path}: entry {k}: component {primary!r} must be a rank >= 1"
                )
            clean[primary] = rank
        if not isinstance(cas, int) or isinstance(cas, bool) or cas != sum(clean.values()):
            raise FormatError(
                f"{path}: entry {k}: cas must equal the sum of its components"
            )
        scores.append(
            CasScore(image_id=image_id, class_label=class_label, components=clean, cas=cas)
        )
    return scores


def write_statistics(statistics, path, taxonomy_fingerprint=None):
    document = {"mean": statistics.mean, "std": statistics.std, "n": statistics.n}
    if taxonomy_fingerprint is not None:
        document["taxonomy_fingerprint"] = taxonomy_fingerprint
    atomic_write_text(path, dump_json(document) + "\n")


def read_statistics(path):
    """Returns (CasStatistics, taxonomy_fingerprint_or_None)."""
    import json

    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(document, dict):
        raise FormatError(f"{path}: statistics must be a JSON object")
    unknown = set(document) - {"mean", "std", "n", "taxonomy_fingerprint"}
    if unknown:
        raise FormatError(f"{path}: unknown keys {sorted(unknown)}")
    try:
        mean = float(document["mean"])
        std = float(document["std"])
        n = document["n"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: statistics need numeric 'mean', 'std', 'n'") from exc
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise FormatError(f"{path}: 'n' must be a positive integer")
    fingerprint = document.get("taxonomy_fingerprint")
    if fingerprint is not None and (
        not isinstance(fingerprint, str) or len(fingerprint) != 64
    ):
        raise FormatError(f"{path}: 'taxonomy_fingerprint' must be a sha256 hex digest")
    return CasStatistics(mean=mean, std=std, n=n), fingerprint
