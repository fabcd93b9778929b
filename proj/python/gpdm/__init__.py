"""Gaussian-process dialogue policies: training, committees, adaptation."""

import json as _json

from ._core import (
    __version__,
    bcm_combine,
    builtin_domains,
    domain_info_json,
    match_info_json,
    run_config,
)


def domain_info(name):
    """Slot inventory of a built-in domain with entropies and ranks."""
    return _json.loads(domain_info_json(name))


def match_info(a, b, mode="auto"):
    """Cross-domain slot matching between two built-in domains."""
    return _json.loads(match_info_json(a, b, mode))


__all__ = [
    "__version__",
    "bcm_combine",
    "builtin_domains",
    "domain_info",
    "domain_info_json",
    "match_info",
    "match_info_json",
    "run_config",
]
