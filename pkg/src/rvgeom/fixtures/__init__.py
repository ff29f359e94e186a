"""Shipped instance files."""

import json
from importlib import resources

from ..instance import loads

APPENDIX_A = ("mdp_2s3a", "mdp_3s2a", "rmdp_agreement", "rmdp_conic", "rmdp_srect", "rmdp_sarect", "rmdp_nonstar")


def fixture_text(name):
    return resources.files(__package__).joinpath("appendix_a", f"{name}.json").read_text(encoding="utf-8")


def load_fixture(name):
    """Load one of :data:`APPENDIX_A` by name."""
    if name not in APPENDIX_A:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(APPENDIX_A)}")
    return loads(fixture_text(name))


def load_witness(name):
    """Stored witness record (decoded JSON) for fixture ``name``."""
    text = resources.files(__package__).joinpath("witnesses", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)
