from .node import ChainNode  # noqa: F401
