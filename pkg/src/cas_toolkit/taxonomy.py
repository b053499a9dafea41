"""Attribute taxonomy: ordered primaries, each with ordered secondaries.

The taxonomy fixes the vocabulary for every downstream stage.  Order is
semantic: prompt rendering, dictionary rows, and annotation tie-breaks
all follow taxonomy order, and the fingerprint hashes the document in
order so any edit produces a new identity.
"""

import hashlib
import importlib.resources
import json
from dataclasses import dataclass, field

from ._util import atomic_write_text, dump_json
from .errors import TaxonomyError

DEFAULT_PROMPT_TEMPLATE = "The photo is {attribute}"
_PLACEHOLDER = "{attribute}"


def _check_name(kind, name):
    if not isinstance(name, str) or not name:
        raise TaxonomyError(f"{kind} name must be a non-empty string, got {name!r}")
    if "/" in name:
        # "/" is reserved: attribute ids are written "primary/secondary"
        raise TaxonomyError(f"{kind} name {name!r} must not contain '/'")


@dataclass(frozen=True)
class PrimaryAttribute:
    """One primary attribute and its ordered secondary values."""

    name: str
    secondaries: tuple = ()

    def __post_init__(self):
        _check_name("primary", self.name)
        object.__setattr__(self, "secondaries", tuple(self.secondaries))
        if not self.secondaries:
            raise TaxonomyError(f"primary {self.name!r} has no secondaries")
        seen = set()
        for secondary in self.secondaries:
            _check_name("secondary", secondary)
            if secondary in seen:
                raise TaxonomyError(
                    f"duplicate secondary {secondary!r} under primary {self.name!r}"
                )
            seen.add(secondary)


@dataclass(frozen=True)
class AttributeTaxonomy:
    """Full attribute vocabulary plus the prompt template used to embed it."""

    primaries: tuple = ()
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "primaries", tuple(self.primaries))
        if not self.primaries:
            raise TaxonomyError("taxonomy has no primary attributes")
        if _PLACEHOLDER not in self.prompt_template:
            raise TaxonomyError(
                f"prompt template must contain {_PLACEHOLDER!r}: {self.prompt_template!r}"
            )
        index = {}
        for position, primary in enumerate(self.primaries):
            if not isinstance(primary, PrimaryAttribute):
                raise TaxonomyError("primaries must be PrimaryAttribute instances")
            if primary.name in index:
                raise TaxonomyError(f"duplicate primary {primary.name!r}")
            index[primary.name] = position
        object.__setattr__(self, "_index", index)

    @property
    def primary_names(self):
        return [primary.name for primary in self.primaries]

    def primary(self, name):
        try:
            return self.primaries[self._index[name]]
        except KeyError:
            raise TaxonomyError(f"unknown primary {name!r}") from None

    def secondary_count(self):
        """Total number of (primary, secondary) pairs."""
        return sum(len(primary.secondaries) for primary in self.primaries)

    def pairs(self):
        """All (primary, secondary) pairs in taxonomy order."""
        return [
            (primary.name, secondary)
            for primary in self.primaries
            for secondary in primary.secondaries
        ]

    def to_document(self):
        return {
            "prompt_template": self.prompt_template,
            "primaries": [
                {"name": primary.name, "secondaries": list(primary.secondaries)}
                for primary in self.primaries
            ],
        }

    @classmethod
    def from_document(cls, document):
        if not isinstance(document, dict):
            raise TaxonomyError("taxonomy document must be a JSON object")
        unknown = set(document) - {"prompt_template", "primaries"}
        if unknown:
            raise TaxonomyError(f"unknown taxonomy keys: {sorted(unknown)}")
        raw_primaries = document.get("primaries")
        if not isinstance(raw_primaries, list):
            raise TaxonomyError("taxonomy 'primaries' must be a list")
        primaries = []
        for entry in raw_primaries:
            if not isinstance(entry, dict):
                raise TaxonomyError("each primary must be a JSON object")
            if set(entry) != {"name", "secondaries"}:
                raise TaxonomyError(
                    f"primary entry must have exactly 'name' and 'secondaries': {sorted(entry)}"
                )
            secondaries = entry["secondaries"]
            if not isinstance(secondaries, list):
                raise TaxonomyError("'secondaries' must be a list")
            primaries.append(PrimaryAttribute(entry["name"], secondaries))
        template = document.get("prompt_template", DEFAULT_PROMPT_TEMPLATE)
        if not isinstance(template, str):
            raise TaxonomyError("'prompt_template' must be a string")
        return cls(primaries=tuple(primaries), prompt_template=template)

    def fingerprint(self):
        """sha256 hex digest of the canonical taxonomy document.

        Sensitive to order, names, and the prompt template; two
        taxonomies agree on every downstream artifact iff their
        fingerprints match.
        """
        payload = dump_json(self.to_document()).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def render_prompts(taxonomy):
    """Ordered (primary, secondary, prompt) triples for every pair.

    Row k of a text-embedding matrix is expected to embed the prompt of
    triple k; everything downstream relies on this ordering.
    """
    template = taxonomy.prompt_template
    return [
        (primary, secondary, template.replace(_PLACEHOLDER, secondary))
        for primary, secondary in taxonomy.pairs()
    ]


def load_taxonomy(path):
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise TaxonomyError(f"{path}: invalid JSON ({exc})") from exc
    return AttributeTaxonomy.from_document(document)


def save_taxonomy(taxonomy, path):
    atomic_write_text(path, json.dumps(taxonomy.to_document(), indent=2) + "\n")


def load_default_taxonomy():
    """The built-in visual-attribute taxonomy (20 primaries, 302 pairs)."""
    source = importlib.resources.files("cas_toolkit.data") / "default_taxonomy.json"
    return AttributeTaxonomy.from_document(json.loads(source.read_text("utf-8")))
