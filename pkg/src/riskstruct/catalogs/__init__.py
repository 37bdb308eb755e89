"""Bundled example catalogs (the tunnel-exit scenario in two increments)."""

from importlib import resources
from pathlib import Path

NAMES = ("tunnel-exit-r2", "tunnel-exit-r3", "tunnel-exit-r2-drops")


def catalog_path(name: str) -> Path:
    """Filesystem path of a bundled catalog, by stem or file name."""
    if not name.endswith(".json"):
        name += ".json"
    path = resources.files(__package__) / name
    with resources.as_file(path) as p:
        return Path(p)
