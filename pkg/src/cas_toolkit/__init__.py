"""cas-toolkit: attribute-imbalance analysis and scarcity-weighted
augmentation sampling for image datasets.

The pipeline: build an attribute dictionary from prompt and reference
embeddings, annotate image embeddings with one secondary attribute per
primary, rank attribute frequencies into per-image Compositional
Attribute Scarcity (CAS) scores, convert scores into a power-weighted
sampling schedule, and drive CutMix/FMix/SaliencyMix augmentation from
deterministic seeded draws.
"""

from .augment import (
    DEFAULT_ALPHA,
    DEFAULT_DECAY,
    METHODS,
    MixResult,
    cutmix_box,
    cutmix_box_at,
    fmix_mask,
    load_image,
    make_mix,
    make_pairs,
    mask_from_box,
    saliency_peak,
    sample_lambda,
    save_image,
)
from .cas import (
    SCOPE_GLOBAL,
    SCOPE_PER_CLASS,
    CasScore,
    CasStatistics,
    FrequencyTable,
    build_frequency_table,
    cas_of,
    cas_statistics,
    read_cas_scores,
    read_statistics,
    score_image,
    write_cas_scores,
    write_statistics,
)
from .dictionary import (
    AnnotatedDataset,
    AnnotatedImage,
    AttributeAssignment,
    AttributeDictionary,
    annotate_dataset,
    annotate_image,
    build_dictionary,
    load_dictionary,
    read_annotations,
    save_dictionary,
    write_annotations,
)
from .errors import (
    CasToolkitError,
    FormatError,
    ScopeMismatchError,
    TaxonomyError,
    ValidationError,
)
from .report import (
    CasBinning,
    CasPartition,
    attribute_distribution,
    bin_cas,
    compare_cas,
    partition_by_cas,
)
from .rng import SeedStream, backend_name, derive_seed
from .sampling import (
    DEFAULT_POWER,
    SamplingSchedule,
    compute_schedule,
    draw,
    draw_ids,
    load_schedule,
    save_schedule,
)
from .store import (
    DatasetManifest,
    EmbeddingMatrix,
    ManifestEntry,
    l2_normalize,
    read_embeddings,
    read_manifest,
    write_embeddings,
    write_manifest,
)
from .taxonomy import (
    AttributeTaxonomy,
    PrimaryAttribute,
    load_default_taxonomy,
    load_taxonomy,
    render_prompts,
    save_taxonomy,
)

__version__ = "0.1.0"
