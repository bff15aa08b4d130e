"""vulnvec: code-vector based vulnerability prediction with similarity
search and a developer feedback loop."""

__version__ = "0.1.0"
