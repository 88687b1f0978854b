"""Distributed digital-identity platform: HTTP identity API, JWT auth,
document store, and a locally simulated identity-anchoring blockchain."""

__version__ = "0.1.0"
