"""Reporting: scarcity partitions, CAS histograms, attribute frequency
tables, and before/after comparisons, written as JSON or CSV.
"""

import csv
import io
import json
from dataclasses import dataclass

from ._util import atomic_write_text
from .cas import SCOPE_GLOBAL, SCOPE_PER_CLASS
from .errors import ValidationError

DEFAULT_BINS = 10


@dataclass
class CasPartition:
    """Image ids split into high / middle / low scarcity subsets."""

    high: list
    middle: list
    low: list

    def sizes(self):
        return {"high": len(self.high), "middle": len(self.middle), "low": len(self.low)}


def partition_by_cas(scores):
    """Split scores into the top 40%, next 30%, and remaining 30% by CAS.

    Images are ordered by descending CAS with ties broken by ascending
    image id.  Subset sizes are exact: the high subset takes
    ``ceil(0.4 * N)`` images, the middle takes ``ceil(0.3 * N)`` of the
    remainder (never more than remain), and the low subset takes the
    rest.  The ceilings are computed in integer arithmetic, so no float
    rounding can shift a boundary.
    """
    if not scores:
        raise ValidationError("cannot partition zero scores")
    ordered = sorted(scores, key=lambda score: (-score.cas, score.image_id))
    total = len(ordered)
    high_n = (2 * total + 4) // 5
    middle_n = min((3 * total + 9) // 10, total - high_n)
    ids = [score.image_id for score in ordered]
    return CasPartition(
        high=ids[:high_n],
        middle=ids[high_n : high_n + middle_n],
        low=ids[high_n + middle_n :],
    )


@dataclass
class CasBinning:
    """Equal-width histogram of CAS values with per-bin summaries.

    ``edges`` has ``bins + 1`` entries; bin i covers
    ``[edges[i], edges[i+1])`` except the last bin, which is closed on
    the right.  ``assignments`` holds the 0-based bin of each input
    score, in input order.
    """

    edges: list
    counts: list
    means: list
    assignments: list


def bin_cas(scores, bins=DEFAULT_BINS):
    """Assign every score to one of ``bins`` equal-width CAS bins.

    When every CAS value is identical the width is zero and all images
    land in the first bin.
    """
    if not scores:
        raise ValidationError("cannot bin zero scores")
    if bins < 1:
        raise ValidationError(f"bin count must be positive, got {bins}")
    values = [score.cas for score in scores]
    lo = min(values)
    hi = max(values)
    if hi == lo:
        edges = [float(lo)] * (bins + 1)
        assignments = [0] * len(values)
    else:
        width = (hi - lo) / bins
        edges = [lo + k * width for k in range(bins)] + [float(hi)]
        assignments = []
        for value in values:
            # upper-bound search, then clamp so value == hi stays in the last bin
            k = 0
            while k < bins and value >= edges[k + 1]:
                k += 1
            assignments.append(min(k, bins - 1))
    counts = [0] * bins
    sums = [0] * bins
    for value, bin_k in zip(values, assignments):
        counts[bin_k] += 1
        sums[bin_k] += value
    means = [
        (sums[k] / counts[k]) if counts[k] else None for k in range(bins)
    ]
    return CasBinning(edges=edges, counts=counts, means=means, assignments=assignments)


def attribute_distribution(annotations, scope=SCOPE_PER_CLASS):
    """Flattened frequency rows: scope key, primary, secondary, count.

    Within each (scope, primary) group rows are sorted by descending
    count, ties by ascending secondary name.  Scope keys are sorted;
    primaries keep their first-seen (taxonomy) order.
    """
    if scope not in (SCOPE_PER_CLASS, SCOPE_GLOBAL):
        raise ValidationError(f"unknown scope {scope!r}")
    if len(annotations) == 0:
        raise ValidationError("cannot summarize zero annotations")
    counts = {}
    primary_order = []
    for image in annotations:
        scope_key = image.class_label if scope == SCOPE_PER_CLASS else "*"
        for primary, secondary in image.attributes.items():
            if primary not in primary_order:
                primary_order.append(primary)
            key = (scope_key, primary, secondary)
            counts[key] = counts.get(key, 0) + 1
    scope_keys = sorted({key[0] for key in counts})
    rows = []
    for scope_key in scope_keys:
        for primary in primary_order:
            group = [
                (secondary, count)
                for (sk, p, secondary), count in counts.items()
                if sk == scope_key and p == primary
            ]
            group.sort(key=lambda item: (-item[1], item[0]))
            for secondary, count in group:
                rows.append(
                    {
                        "scope": scope_key,
                        "primary": primary,
                        "secondary": secondary,
                        "count": count,
                    }
                )
    return rows


def compare_cas(before, after, fingerprint_before=None, fingerprint_after=None):
    """Before/after statistics with deltas.

    When both sides carry a taxonomy fingerprint the fingerprints must
    match; comparing scores produced under different taxonomies is a
    hard error rather than a misleading number.
    """
    if (
        fingerprint_before is not None
        and fingerprint_after is not None
        and fingerprint_before != fingerprint_after
    ):
        raise ValidationError(
            "cannot compare: CAS statistics come from different taxonomies "
            f"({fingerprint_before[:12]}... vs {fingerprint_after[:12]}...)"
        )
    return {
        "before": {"mean": before.mean, "std": before.std, "n": before.n},
        "after": {"mean": after.mean, "std": after.std, "n": after.n},
        "delta": {"mean": after.mean - before.mean, "std": after.std - before.std},
    }


def partition_rows(partition, scores):
    """Report rows: one (image_id, cas, subset) per image, high to low."""
    cas_of_id = {score.image_id: score.cas for score in scores}
    return [
        {"image_id": image_id, "cas": cas_of_id[image_id], "subset": subset}
        for subset, ids in (
            ("high", partition.high),
            ("middle", partition.middle),
            ("low", partition.low),
        )
        for image_id in ids
    ]


def binning_rows(binning, class_label="*"):
    """Report rows: one per bin, 1-based indices; empty bins have no mean."""
    rows = []
    for k, count in enumerate(binning.counts):
        rows.append(
            {
                "class": class_label,
                "bin": k + 1,
                "lo": binning.edges[k],
                "hi": binning.edges[k + 1],
                "count": count,
                "mean_cas": binning.means[k],
            }
        )
    return rows


def compare_rows(record):
    """Flatten a compare_cas record into before/after/delta rows."""
    return [
        {"which": "before", **record["before"]},
        {"which": "after", **record["after"]},
        {"which": "delta", **record["delta"], "n": None},
    ]


def write_report(path, fmt, columns, rows):
    """Write rows as CSV or as JSON that mirrors the CSV field-for-field.

    Every row must supply exactly the named columns; JSON uses null where
    CSV leaves a cell empty.
    """
    for row in rows:
        if set(row) != set(columns):
            raise ValidationError(
                f"report row keys {sorted(row)} do not match columns {list(columns)}"
            )
    if fmt == "json":
        ordered = [{key: row[key] for key in columns} for row in rows]
        atomic_write_text(path, json.dumps({"rows": ordered}, indent=2) + "\n")
    elif fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                ["" if row[key] is None else row[key] for key in columns]
            )
        atomic_write_text(path, buffer.getvalue())
    else:
        raise ValidationError(f"unknown report format {fmt!r}")


PARTITION_COLUMNS = ("image_id", "cas", "subset")
BINNING_COLUMNS = ("class", "bin", "lo", "hi", "count", "mean_cas")
DISTRIBUTION_COLUMNS = ("scope", "primary", "secondary", "count")
COMPARE_COLUMNS = ("which", "mean", "std", "n")
