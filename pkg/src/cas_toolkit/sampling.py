"""Scarcity-weighted sampling: power-transformed CAS scores become a
categorical distribution over the dataset.

Each image's weight is ``cas ** power`` and its probability is the
weight normalized over the dataset.  ``power`` > 1 sharpens the tilt
toward rare compositions; values below 1 soften it.  Draws are with
replacement via an inverse-CDF lookup on a deterministic seeded stream,
so a schedule plus a seed fully determines every batch.
"""

import json
from dataclasses import dataclass

import numpy as np

from ._util import atomic_write_text
from .errors import FormatError, ValidationError
from .rng import SeedStream

DEFAULT_POWER = 1.2


@dataclass
class SamplingSchedule:
    """Frozen sampling distribution for one dataset and power setting."""

    image_ids: list
    cas: list
    weights: np.ndarray
    probabilities: np.ndarray
    power: float
    seed: int

    def __post_init__(self):
        if len(self.image_ids) == 0:
            raise ValidationError("schedule has no items")
        if len(set(self.image_ids)) != len(self.image_ids):
            raise ValidationError("schedule image ids must be unique")
        if not (
            len(self.cas)
            == len(self.image_ids)
            == self.weights.shape[0]
            == self.probabilities.shape[0]
        ):
            raise ValidationError("schedule arrays must have equal length")
        if not np.isfinite(self.weights).all() or not np.isfinite(self.probabilities).all():
            raise ValidationError("schedule weights or probabilities are not finite")
        if (self.probabilities < 0.0).any():
            raise ValidationError("schedule probabilities must be non-negative")
        total = float(self.probabilities.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"schedule probabilities sum to {total!r}, not 1")

    def __len__(self):
        return len(self.image_ids)

    def cumulative(self):
        return np.cumsum(self.probabilities)


def compute_schedule(scores, power=DEFAULT_POWER, seed=0):
    """Build a sampling schedule from CAS scores.

    Weights are ``cas ** power`` in float64; every CAS value is at least
    1 (each component rank is), so weights are positive for any power and
    the normalization never divides by zero.
    """
    if not scores:
        raise ValidationError("cannot build a schedule from zero scores")
    power = float(power)
    if not np.isfinite(power) or power <= 0.0:
        raise ValidationError(f"power must be finite and positive, got {power!r}")
    for score in scores:
        if score.cas < 1:
            raise ValidationError(
                f"image {score.image_id!r} has CAS {score.cas}; ranks start at 1"
            )
    values = np.array([score.cas for score in scores], dtype=np.float64)
    with np.errstate(over="ignore"):
        weights = np.power(values, power)
    if not np.isfinite(weights).all():
        raise ValidationError("weights overflowed; lower the power")
    probabilities = weights / weights.sum()
    return SamplingSchedule(
        image_ids=[score.image_id for score in scores],
        cas=[score.cas for score in scores],
        weights=weights,
        probabilities=probabilities,
        power=power,
        seed=int(seed),
    )


def draw(schedule, count, seed=None):
    """Draw ``count`` indices with replacement from the schedule.

    Uses the schedule's stored seed unless one is given.  Draws are
    prefix-stable: the first k of ``draw(s, n)`` equal ``draw(s, k)``.
    """
    if count < 0:
        raise ValidationError("draw count must be non-negative")
    stream = SeedStream(schedule.seed if seed is None else seed)
    return draw_with_stream(schedule, count, stream)


def draw_with_stream(schedule, count, stream):
    """Like :func:`draw` but consuming an existing stream."""
    if count < 0:
        raise ValidationError("draw count must be non-negative")
    return [int(k) for k in stream.categorical(schedule.cumulative(), count)]


def draw_ids(schedule, count, seed=None):
    """Draw ``count`` image ids with replacement."""
    ids = schedule.image_ids
    return [ids[k] for k in draw(schedule, count, seed=seed)]


def save_schedule(schedule, path):
    document = {
        "power": schedule.power,
        "seed": schedule.seed,
        "items": [
            {
                "image_id": image_id,
                "cas": cas,
                "weight": float(weight),
                "p": float(p),
            }
            for image_id, cas, weight, p in zip(
                schedule.image_ids, schedule.cas, schedule.weights, schedule.probabilities
            )
        ],
    }
    atomic_write_text(path, json.dumps(document, indent=2) + "\n")


def load_schedule(path):
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(document, dict):
        raise FormatError(f"{path}: schedule must be a JSON object")
    unknown = set(document) - {"power", "seed", "items"}
    if unknown:
        raise FormatError(f"{path}: unknown keys {sorted(unknown)}")
    items = document.get("items")
    if not isinstance(items, list) or not items:
        raise FormatError(f"{path}: 'items' must be a non-empty list")
    power = document.get("power")
    seed = document.get("seed")
    if not isinstance(power, (int, float)) or isinstance(power, bool):
        raise FormatError(f"{path}: 'power' must be a number")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise FormatError(f"{path}: 'seed' must be an integer")
    image_ids, cas_values, weights, probabilities = [], [], [], []
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise FormatError(f"{path}: item {k} is not a JSON object")
        unknown = set(item) - {"image_id", "cas", "weight", "p"}
        if unknown:
            raise FormatError(f"{path}: item {k} has unknown keys {sorted(unknown)}")
        image_id = item.get("image_id")
        cas = item.get("cas")
        weight = item.get("weight")
        p = item.get("p")
        if not isinstance(image_id, str) or not image_id:
            raise FormatError(f"{path}: item {k}: bad image_id")
        if not isinstance(cas, int) or isinstance(cas, bool) or cas < 1:
            raise FormatError(f"{path}: item {k}: 'cas' must be an integer >= 1")
        for name, value in (("weight", weight), ("p", p)):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise FormatError(f"{path}: item {k}: {name!r} must be a number")
        image_ids.append(image_id)
        cas_values.append(cas)
        weights.append(float(weight))
        probabilities.append(float(p))
    try:
        return SamplingSchedule(
            image_ids=image_ids,
            cas=cas_values,
            weights=np.array(weights, dtype=np.float64),
            probabilities=np.array(probabilities, dtype=np.float64),
            power=float(power),
            seed=seed,
        )
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc
