"""Road-scene view planning, label compositing, and annotation vote tooling."""

__version__ = "0.1.0"
