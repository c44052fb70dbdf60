"""Bundled emulator scenarios for the validation experiments."""

from importlib import resources

from ..emulator import Scenario

BUNDLED = ("alpha-test", "blink-4321", "chew-4321", "impedance-sweep")


def load(name: str) -> Scenario:
    """Load a bundled scenario by name (without the .json suffix)."""
    if name not in BUNDLED:
        raise KeyError(f"no bundled scenario {name!r}; have {BUNDLED}")
    ref = resources.files(__package__) / f"{name}.json"
    import json
    return Scenario.from_dict(json.loads(ref.read_text()))
