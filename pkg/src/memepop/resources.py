"""Access to bundled default config files (and user-supplied overrides)."""

from __future__ import annotations

import os
from importlib import resources

from memepop.errors import ConfigError


def read_config_text(path: str | os.PathLike | None, default_name: str) -> str:
    """Read a user override file, or the bundled default when path is None."""
    if path is None:
        return (
            resources.files("memepop.data").joinpath(default_name).read_text(encoding="utf-8")
        )
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
