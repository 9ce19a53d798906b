"""Example topology documents shipped with the package."""

import json
from importlib import resources

BUILTIN = ("minimal_two_vm", "ims_dual_segment", "three_tier_web", "two_tenant_pair")


def builtin_topology(name: str) -> dict:
    if name not in BUILTIN:
        raise KeyError(f"unknown builtin topology {name!r}; have {BUILTIN}")
    text = resources.files(__package__).joinpath(f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)
