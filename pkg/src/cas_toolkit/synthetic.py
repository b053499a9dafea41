"""Deterministic synthetic dataset for tests, demos, and benchmarks.

The fixture plants a known attribute structure and embeds it so that
annotation provably recovers the plan:

* each (primary, secondary) pair owns one standard-basis direction, so
  attribute directions are exactly orthogonal;
* an image embedding is the normalized sum of its assigned directions
  plus a noise vector of norm ``noise`` (default 0.02, far below the
  smallest margin that could flip an argmax);
* class 0 is homogeneous: every image uses secondary 0 everywhere, so
  its per-class ranks are all 1;
* the remaining classes draw secondaries from a fixed skewed categorical
  distribution, and the first few images of each such class additionally
  carry one rare secondary on a designated primary.

The resulting CAS distribution has a tight low-CAS cluster (class 0)
next to a broad high-CAS bulk, which is the shape scarcity-weighted
sampling is meant to rebalance.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import save_image
from .rng import SeedStream
from .store import DatasetManifest, EmbeddingMatrix, ManifestEntry, write_manifest, write_embeddings
from .taxonomy import AttributeTaxonomy, PrimaryAttribute, save_taxonomy

# skewed draw over the five common secondaries of every primary
_COMMON_PROBS = (0.30, 0.25, 0.20, 0.15, 0.10)


@dataclass
class SyntheticFixture:
    taxonomy: AttributeTaxonomy
    text_embeddings: EmbeddingMatrix
    reference_images: EmbeddingMatrix
    images: EmbeddingMatrix
    manifest: DatasetManifest
    planted: dict


def build_fixture(seed=7, classes=5, per_class=40, primaries=10, noise=0.02,
                  rare_per_class=3):
    """Build the synthetic dataset in memory.

    ``planted`` maps image_id -> {primary: secondary} ground truth.
    """
    if classes < 2 or per_class < rare_per_class or primaries < 1:
        raise ValueError("fixture needs >= 2 classes and enough images per class")
    secondaries = len(_COMMON_PROBS) + 1
    taxonomy = AttributeTaxonomy(
        primaries=tuple(
            PrimaryAttribute(
                name=f"attr{p:02d}",
                secondaries=tuple(f"val{s}" for s in range(secondaries)),
            )
            for p in range(primaries)
        )
    )
    dim = primaries * secondaries
    pair_rows = np.eye(dim, dtype=np.float32)
    pair_ids = [f"{p}/{s}" for p, s in taxonomy.pairs()]
    text_embeddings = EmbeddingMatrix(rows=pair_rows.copy(), ids=list(pair_ids))

    # references: the pair directions plus a few two-direction mixtures
    # that can never out-match a pure direction
    stream = SeedStream(seed)
    ref_rows = [pair_rows]
    ref_ids = [f"ref_{pid.replace('/', '_')}" for pid in pair_ids]
    distractors = np.zeros((5, dim), dtype=np.float32)
    for k in range(5):
        a = stream.randbelow(dim)
        b = (a + 1 + stream.randbelow(dim - 1)) % dim
        distractors[k, a] = 0.7071067811865476
        distractors[k, b] = 0.7071067811865476
        ref_ids.append(f"distractor_{k}")
    ref_rows.append(distractors)
    reference_images = EmbeddingMatrix(rows=np.vstack(ref_rows), ids=ref_ids)

    cum = np.cumsum(np.array(_COMMON_PROBS, dtype=np.float64))
    planted = {}
    entries = []
    image_rows = np.zeros((classes * per_class, dim), dtype=np.float64)
    image_ids = []
    index = 0
    for c in range(classes):
        class_label = f"class_{c}"
        rare_primary = (c - 1) % primaries
        for k in range(per_class):
            image_id = f"img_{index:04d}"
            if c == 0:
                assigned = [0] * primaries
            else:
                assigned = [int(v) for v in stream.categorical(cum, primaries)]
                if k < rare_per_class:
                    # the rare slot: the otherwise-unused last secondary
                    assigned[rare_primary] = secondaries - 1
            attributes = {}
            vector = np.zeros(dim, dtype=np.float64)
            for p, s in enumerate(assigned):
                attributes[f"attr{p:02d}"] = f"val{s}"
                vector[p * secondaries + s] = 1.0
            jitter = stream.normals(dim)
            jitter_norm = float(np.sqrt((jitter * jitter).sum()))
            if jitter_norm > 0.0:
                vector = vector + jitter * (noise / jitter_norm)
            vector = vector / float(np.sqrt((vector * vector).sum()))
            image_rows[index] = vector
            image_ids.append(image_id)
            planted[image_id] = attributes
            entries.append(
                ManifestEntry(
                    image_id=image_id,
                    class_label=class_label,
                    source_path=f"images/{image_id}.png",
                )
            )
            index += 1
    images = EmbeddingMatrix(rows=image_rows.astype(np.float32), ids=image_ids)
    manifest = DatasetManifest(entries=entries)
    return SyntheticFixture(
        taxonomy=taxonomy,
        text_embeddings=text_embeddings,
        reference_images=reference_images,
        images=images,
        manifest=manifest,
        planted=planted,
    )


def write_fixture(fixture, out_dir, image_size=16, image_seed=11):
    """Write the fixture to disk; returns a dict of the created paths.

    Pixel data is a seeded uniform field per image, independent of the
    embedding content; it exists so the augmentation pipeline has real
    files to read.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "images").mkdir(exist_ok=True)
    paths = {
        "taxonomy": out / "taxonomy.json",
        "text_embeddings": out / "text_embeddings.case",
        "reference_images": out / "reference_images.case",
        "images": out / "images.case",
        "manifest": out / "manifest.jsonl",
        "image_dir": out / "images",
    }
    save_taxonomy(fixture.taxonomy, paths["taxonomy"])
    write_embeddings(fixture.text_embeddings, paths["text_embeddings"])
    write_embeddings(fixture.reference_images, paths["reference_images"])
    write_embeddings(fixture.images, paths["images"])
    write_manifest(fixture.manifest, paths["manifest"])
    stream = SeedStream(image_seed)
    for entry in fixture.manifest:
        pixels = stream.uniforms(image_size * image_size * 3).reshape(
            image_size, image_size, 3
        )
        save_image(pixels, out / entry.source_path)
    return paths
