"""Run configuration: defaults, config file, environment, flag precedence.

Config files are plain-text section/key pairs (INI syntax).  A ``[global]``
section carries seed/out/cache/verbose; per-subcommand sections such as
``[search.run]`` carry keys named after the long flags.  Resolution order is
flag > file > default, except the cache path where the GAIA_CACHE environment
variable sits between file and default.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

DEFAULT_SEED = 2021
DEFAULT_OUT = "gaia_out"
CACHE_ENV = "GAIA_CACHE"


@dataclass
class RunConfig:
    seed: int = DEFAULT_SEED
    out: Path = Path(DEFAULT_OUT)
    cache: Path | None = None
    verbose: bool = False
    sections: Mapping[str, Mapping[str, str]] = field(default_factory=dict)

    def get(self, section: str, key: str, default: Any = None,
            cast: Callable[[str], Any] = str) -> Any:
        sec = self.sections.get(section)
        if sec is None or key not in sec:
            return default
        return cast(sec[key])


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config_file(path: Path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ValueError(f"bad config file {path}: {exc}") from exc
    return {name: dict(parser[name]) for name in parser.sections()}


def build_run_config(config_path: Path | None, *, seed: int | None = None,
                     out: str | None = None, cache: str | None = None,
                     verbose: bool | None = None,
                     env: Mapping[str, str] | None = None) -> RunConfig:
    """Merge explicit flag values over a config file over environment/defaults."""
    env = os.environ if env is None else env
    sections: dict[str, dict[str, str]] = {}
    if config_path is not None:
        sections = read_config_file(config_path)
    glob = sections.get("global", {})

    if seed is None:
        seed = int(glob["seed"]) if "seed" in glob else DEFAULT_SEED
    if out is None:
        out = glob.get("out", DEFAULT_OUT)
    if cache is None:
        cache = glob.get("cache", env.get(CACHE_ENV))
    if verbose is None:
        verbose = _parse_bool(glob["verbose"]) if "verbose" in glob else False
    return RunConfig(seed=int(seed), out=Path(out),
                     cache=None if cache in (None, "") else Path(cache),
                     verbose=bool(verbose), sections=sections)
