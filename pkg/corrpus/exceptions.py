class CorrpusError(Exception):
    """Base class for every error raised by the corrpus package."""
