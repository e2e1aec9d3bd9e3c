"""Access to the bundled .jkb example knowledge bases."""

from __future__ import annotations

from importlib import resources

CORPUS_NAMES = (
    "qos_policy",
    "qos_policy_hierarchical",
    "adjust_qos_policy",
    "adjust_qos_policy_hierarchical",
    "link_fault",
    "link_fault_with_lock_check",
)

# Default experiment fixture: one shared datum, one justification to flip.
DEFAULT_FIXTURE = "qos_policy"
DEFAULT_TARGET_DATUM = "qos_pol"
DEFAULT_CHANGED_JUSTIFICATION = "async_sig"


def corpus_text(name: str) -> str:
    """Return the text of a bundled knowledge base by short name."""
    if name not in CORPUS_NAMES:
        raise KeyError(f"no bundled knowledge base named {name!r}")
    return (
        resources.files(__package__)
        .joinpath("corpus", f"{name}.jkb")
        .read_text(encoding="utf-8")
    )
