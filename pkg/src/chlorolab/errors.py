"""Exception types shared across the pipeline."""


class ChlorolabError(Exception):
    """Base class for pipeline failures."""


class CaptureFormatError(ChlorolabError):
    """Capture directory is missing bands, malformed, or inconsistent."""


class DegenerateSeriesError(ChlorolabError):
    """A statistic is undefined because an input series has no variance."""


class FitError(ChlorolabError):
    """A generative model could not be fitted on the given data."""


class ConditioningError(ChlorolabError):
    """Conditioning point lies outside the fitted model's support."""


class SpecInfeasibleError(ChlorolabError):
    """Synthetic-field parameters cannot produce valid reflectance data."""


class TrainingError(ChlorolabError):
    """Neural training aborted (bad inputs or non-finite loss)."""
