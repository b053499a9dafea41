"""Exception types shared across the toolkit."""


class CasToolkitError(Exception):
    """Base class for all toolkit errors."""


class TaxonomyError(CasToolkitError):
    """Invalid taxonomy document or prompt template."""


class FormatError(CasToolkitError):
    """Malformed embedding file, manifest, or other on-disk artifact."""


class ValidationError(CasToolkitError):
    """Input violates a documented precondition or invariant."""


class ScopeMismatchError(CasToolkitError):
    """Annotation refers to a (scope, primary, secondary) with no rank."""
