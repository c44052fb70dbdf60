"""JSON Schemas for the machine-readable CLI outputs."""

import json
from importlib import resources

SHIPPED = ("impedance", "events", "alpha")


def load(name: str) -> dict:
    if name not in SHIPPED:
        raise KeyError(f"no schema {name!r}; shipped: {', '.join(SHIPPED)}")
    with resources.files(__name__).joinpath(f"{name}.json").open() as f:
        return json.load(f)
