"""Item-retrieval alignment toolkit: catalogs, task synthesis, contrastive encoder, evaluation."""

__version__ = "0.1.0"

# On-disk format versions, bumped independently of the tool version.
FORMAT_VERSIONS = {"catalog": 1, "dataset": 1, "model": 1, "report": 1}
