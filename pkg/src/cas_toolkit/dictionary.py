"""Attribute dictionary: embedding keys for every taxonomy pair, plus
annotation of image embeddings against those keys.

Construction matches each rendered attribute prompt to its most similar
reference image embedding (cosine, ties broken toward the lowest
reference row), so every key is a real image embedding rather than a
text embedding.  Annotation assigns, independently per primary, the
secondary whose key is most similar to the image; there is no threshold,
every primary always gets exactly one secondary.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._util import atomic_write_text, read_jsonl, worker_count, write_jsonl
from .errors import FormatError, ValidationError
from .store import EmbeddingMatrix, l2_normalize, read_embeddings, write_embeddings
from .taxonomy import render_prompts

_UNIT_TOL = 1e-3


def pair_id(primary, secondary):
    return f"{primary}/{secondary}"


@dataclass
class AttributeDictionary:
    """Per-pair embedding keys with their (primary, secondary) labels.

    ``keys`` rows are unit-norm float32 and row k corresponds to
    ``values[k]``; rows of one primary are consecutive and follow
    taxonomy order.
    """

    keys: EmbeddingMatrix
    values: list
    taxonomy_fingerprint: str
    _slices: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        values = [(str(p), str(s)) for p, s in self.values]
        if len(values) != self.keys.count:
            raise ValidationError(
                f"value count {len(values)} does not match key count {self.keys.count}"
            )
        if self.keys.count == 0:
            raise ValidationError("dictionary has no keys")
        for k, (primary, secondary) in enumerate(values):
            expected = pair_id(primary, secondary)
            if self.keys.ids[k] != expected:
                raise ValidationError(
                    f"key id {self.keys.ids[k]!r} does not match value {expected!r}"
                )
        norms = np.linalg.norm(self.keys.rows.astype(np.float64), axis=1)
        off = np.flatnonzero(np.abs(norms - 1.0) > _UNIT_TOL)
        if off.size:
            raise ValidationError(
                f"dictionary key {self.keys.ids[int(off[0])]!r} is not unit-norm"
            )
        if not isinstance(self.taxonomy_fingerprint, str) or len(self.taxonomy_fingerprint) != 64:
            raise ValidationError("taxonomy_fingerprint must be a 64-char sha256 hex digest")
        # group rows into consecutive per-primary slices
        slices = []
        seen = set()
        start = 0
        for k in range(1, len(values) + 1):
            if k == len(values) or values[k][0] != values[start][0]:
                primary = values[start][0]
                if primary in seen:
                    raise ValidationError(
                        f"rows for primary {primary!r} are not consecutive"
                    )
                seen.add(primary)
                slices.append((primary, start, k))
                start = k
        self.values = values
        self._slices = slices

    @property
    def dim(self):
        return self.keys.dim

    def primary_names(self):
        return [primary for primary, _, _ in self._slices]

    def primary_slices(self):
        """(primary, start, stop) row ranges, in taxonomy order."""
        return list(self._slices)


@dataclass
class AttributeAssignment:
    """Annotation result for a single image embedding."""

    assigned: list

    def attributes(self):
        return {primary: secondary for primary, secondary, _ in self.assigned}

    def similarities(self):
        return {primary: similarity for primary, _, similarity in self.assigned}


@dataclass(frozen=True)
class AnnotatedImage:
    image_id: str
    class_label: str
    attributes: dict
    similarities: dict


@dataclass
class AnnotatedDataset:
    """Ordered annotations with unique image ids."""

    images: list
    _by_id: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        by_id = {}
        for image in self.images:
            if image.image_id in by_id:
                raise ValidationError(f"duplicate annotated image_id {image.image_id!r}")
            by_id[image.image_id] = image
        self._by_id = by_id

    def __len__(self):
        return len(self.images)

    def __iter__(self):
        return iter(self.images)

    def get(self, image_id):
        try:
            return self._by_id[image_id]
        except KeyError:
            raise ValidationError(f"image_id {image_id!r} has no annotation") from None


def build_dictionary(text_embeddings, reference_images, taxonomy):
    """Match each attribute prompt embedding to its closest reference image.

    ``text_embeddings`` must be row-aligned with ``render_prompts(taxonomy)``
    and carry ids of the form ``primary/secondary``.  Cosine similarity is
    computed on unit-normalized rows; for each prompt the single most
    similar reference image becomes that pair's key (ties pick the lowest
    reference row index).  A reference image may serve as the key for any
    number of pairs.
    """
    prompts = render_prompts(taxonomy)
    if text_embeddings.count != len(prompts):
        raise ValidationError(
            f"text embedding rows ({text_embeddings.count}) do not match "
            f"taxonomy pair count ({len(prompts)})"
        )
    expected_ids = [pair_id(primary, secondary) for primary, secondary, _ in prompts]
    if text_embeddings.ids != expected_ids:
        for got, want in zip(text_embeddings.ids, expected_ids):
            if got != want:
                raise ValidationError(
                    f"text embedding id {got!r} does not match taxonomy order "
                    f"(expected {want!r})"
                )
    if reference_images.count == 0:
        raise ValidationError("reference corpus is empty")
    if reference_images.dim != text_embeddings.dim:
        raise ValidationError(
            f"dimension mismatch: text {text_embeddings.dim}, "
            f"references {reference_images.dim}"
        )
    text_unit = l2_normalize(text_embeddings).rows.astype(np.float64)
    refs_unit = l2_normalize(reference_images).rows.astype(np.float64)
    similarities = text_unit @ refs_unit.T
    matches = np.argmax(similarities, axis=1)
    keys = EmbeddingMatrix(
        rows=refs_unit[matches].astype(np.float32), ids=expected_ids
    )
    values = [(primary, secondary) for primary, secondary, _ in prompts]
    return AttributeDictionary(
        keys=keys, values=values, taxonomy_fingerprint=taxonomy.fingerprint()
    )


def _assign_rows(dictionary, unit_rows):
    """Per-primary argmax for each row of a unit-normalized block."""
    keys64 = dictionary.keys.rows.astype(np.float64)
    sims = unit_rows @ keys64.T
    results = []
    for row in sims:
        assigned = []
        for primary, start, stop in dictionary.primary_slices():
            local = int(np.argmax(row[start:stop]))
            k = start + local
            similarity = float(min(1.0, max(-1.0, row[k])))
            assigned.append((primary, dictionary.values[k][1], similarity))
        results.append(assigned)
    return results


def annotate_image(dictionary, embedding):
    """Assign one secondary per primary to a single image embedding.

    Within each primary the most similar key wins; ties resolve to the
    secondary that comes first in taxonomy order.  The assignment is
    invariant to positive rescaling of ``embedding``.
    """
    vector = np.asarray(embedding, dtype=np.float64).reshape(-1)
    if vector.shape[0] != dictionary.dim:
        raise ValidationError(
            f"embedding has dimension {vector.shape[0]}, dictionary expects {dictionary.dim}"
        )
    if not np.isfinite(vector).all():
        raise ValidationError("embedding contains NaN or Inf")
    norm = float(np.sqrt((vector * vector).sum()))
    if norm == 0.0:
        raise ValidationError("cannot annotate a zero-norm embedding")
    assigned = _assign_rows(dictionary, (vector / norm)[None, :])[0]
    return AttributeAssignment(assigned=assigned)


def annotate_dataset(dictionary, images, manifest):
    """Annotate every row of ``images``; all ids must appear in the manifest.

    Rows are processed in chunks across worker threads (bounded by
    CAS_TOOLKIT_THREADS); the output order and content are independent of
    the worker count.
    """
    for image_id in images.ids:
        if not manifest.has(image_id):
            raise ValidationError(f"image_id {image_id!r} not in manifest")
    if images.dim != dictionary.dim:
        raise ValidationError(
            f"image embeddings have dimension {images.dim}, "
            f"dictionary expects {dictionary.dim}"
        )
    unit = l2_normalize(images).rows.astype(np.float64)
    total = images.count
    workers = worker_count(total)
    chunk = max(1, -(-total // workers)) if total else 1
    spans = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
    if len(spans) <= 1:
        assignments = _assign_rows(dictionary, unit)
    else:
        assignments = [None] * total
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_assign_rows, dictionary, unit[lo:hi]): (lo, hi)
                for lo, hi in spans
            }
            for future, (lo, hi) in futures.items():
                assignments[lo:hi] = future.result()
    annotated = []
    for image_id, assigned in zip(images.ids, assignments):
        entry = manifest.get(image_id)
        annotated.append(
            AnnotatedImage(
                image_id=image_id,
                class_label=entry.class_label,
                attributes={p: s for p, s, _ in assigned},
                similarities={p: sim for p, _, sim in assigned},
            )
        )
    return AnnotatedDataset(images=annotated)


def save_dictionary(dictionary, keys_path, sidecar_path):
    """Persist keys as a CASE file plus a JSON sidecar with labels."""
    write_embeddings(dictionary.keys, keys_path)
    sidecar = {
        "taxonomy_fingerprint": dictionary.taxonomy_fingerprint,
        "values": [[primary, secondary] for primary, secondary in dictionary.values],
    }
    atomic_write_text(sidecar_path, json.dumps(sidecar, indent=2) + "\n")


def load_dictionary(keys_path, sidecar_path):
    keys = read_embeddings(keys_path)
    with open(sidecar_path, "r", encoding="utf-8") as handle:
        try:
            sidecar = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{sidecar_path}: invalid JSON ({exc})") from exc
    if not isinstance(sidecar, dict):
        raise FormatError(f"{sidecar_path}: sidecar must be a JSON object")
    unknown = set(sidecar) - {"taxonomy_fingerprint", "values"}
    if unknown:
        raise FormatError(f"{sidecar_path}: unknown keys {sorted(unknown)}")
    values = sidecar.get("values")
    if not isinstance(values, list) or not all(
        isinstance(v, list) and len(v) == 2 for v in values
    ):
        raise FormatError(f"{sidecar_path}: 'values' must be a list of [primary, secondary]")
    fingerprint = sidecar.get("taxonomy_fingerprint")
    if not isinstance(fingerprint, str):
        raise FormatError(f"{sidecar_path}: missing 'taxonomy_fingerprint'")
    try:
        return AttributeDictionary(
            keys=keys,
            values=[(p, s) for p, s in values],
            taxonomy_fingerprint=fingerprint,
        )
    except ValidationError as exc:
        raise FormatError(f"{sidecar_path}: {exc}") from exc


def write_annotations(dataset, path):
    rows = [
        {
            "image_id": image.image_id,
            "class_label": image.class_label,
            "attributes": dict(image.attributes),
            "similarities": {k: float(v) for k, v in image.similarities.items()},
        }
        for image in dataset
    ]
    write_jsonl(path, rows)


def read_annotations(path):
    rows = read_jsonl(path, FormatError)
    images = []
    for k, row in enumerate(rows):
        if not isinstance(row, dict):
            raise FormatError(f"{path}: entry {k} is not a JSON object")
        unknown = set(row) - {"image_id", "class_label", "attributes", "similarities"}
        if unknown:
            raise FormatError(f"{path}: entry {k} has unknown keys {sorted(unknown)}")
        image_id = row.get("image_id")
        class_label = row.get("class_label")
        attributes = row.get("attributes")
        similarities = row.get("similarities")
        if not isinstance(image_id, str) or not image_id:
            raise FormatError(f"{path}: entry {k}: bad image_id")
        if not isinstance(class_label, str) or not class_label:
            raise FormatError(f"{path}: entry {k}: bad class_label")
        if not isinstance(attributes, dict) or not attributes:
            raise FormatError(f"{path}: entry {k}: 'attributes' must be a non-empty object")
        if not isinstance(similarities, dict) or set(similarities) != set(attributes):
            raise FormatError(
                f"{path}: entry {k}: 'similarities' keys must match 'attributes'"
            )
        for primary, secondary in attributes.items():
            if not isinstance(secondary, str):
                raise FormatError(f"{path}: entry {k}: attribute {primary!r} is not a string")
        clean_sims = {}
        for primary, value in similarities.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise FormatError(f"{path}: entry {k}: similarity {primary!r} is not a number")
            clean_sims[primary] = float(value)
        images.append(
            AnnotatedImage(
                image_id=image_id,
                class_label=class_label,
                attributes=dict(attributes),
                similarities=clean_sims,
            )
        )
    try:
        return AnnotatedDataset(images=images)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc
