"""LOD ground states of the Gross-Pitaevskii equation.

Configurations use the same INI text as the ``lodgpe`` command line tool;
``overrides`` are ``"section.key=value"`` strings.
"""

from pathlib import Path

from ._lodgpe import ConfigError, fit_rate, resolve_config, set_threads, solve, study, thread_count

__all__ = [
    "ConfigError",
    "fit_rate",
    "load",
    "resolve_config",
    "set_threads",
    "solve",
    "study",
    "thread_count",
]


def load(path):
    """Config text of a file, for passing to solve/study."""
    return Path(path).read_text()
