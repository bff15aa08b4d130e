"""Exception types shared across the toolchain."""


class VulnvecError(Exception):
    """Base class for all toolchain errors."""


class UnparsableSource(VulnvecError):
    """No function definition could be recognized in the input text."""


class NoLeaves(VulnvecError):
    """Syntax tree has fewer than two leaves; no path contexts exist."""


class EmptyCorpus(VulnvecError):
    """An operation that requires at least one function got none."""


class EmptyBag(VulnvecError):
    """Attention pooling requires at least one context vector."""


class NonFiniteLoss(VulnvecError):
    """Training produced a NaN or infinite loss; aborted with diagnostics."""


class DimensionMismatch(VulnvecError):
    """Vector or matrix dimensions do not agree."""


class EmptyModule(VulnvecError):
    """Module aggregate requires at least one member vector."""


class MixedModelVersions(VulnvecError):
    """Vectors from different model versions cannot be combined."""


class EmptyTrainSet(VulnvecError):
    """Classifier training requires a non-empty labeled set."""


class EmptyValidatedSet(VulnvecError):
    """Fine-tuning requires a non-empty validated set."""


class FineTuneRegression(VulnvecError):
    """Fine-tuning degraded previously learned labels beyond the gate."""


class ZeroVector(VulnvecError):
    """Cosine distance is undefined for an all-zero vector."""


class EmptyIndex(VulnvecError):
    """Nearest-neighbor query against an index with no entries."""


class TooFewEntries(VulnvecError):
    """Clustering requested more clusters than index entries."""


class CoincidentVectors(VulnvecError):
    """Feedback move is undefined when source and target coincide."""


class UnknownFunction(VulnvecError):
    """A vote or query referenced a function id the store does not know."""


class IoFailure(VulnvecError):
    """Artifact could not be written or read."""


class ManifestConflict(VulnvecError):
    """Concurrent writer detected via the manifest generation counter."""


class MissingManifest(VulnvecError):
    """Store root has no manifest.json."""


class HashMismatch(VulnvecError):
    """Artifact content does not match the hash recorded in the manifest."""

    def __init__(self, names):
        self.names = list(names)
        super().__init__("hash mismatch: " + ", ".join(self.names))


class MissingPrerequisite(VulnvecError):
    """A pipeline stage requires an artifact that is not in the store."""
