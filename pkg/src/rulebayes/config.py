"""INI experiment configuration with typed accessors.

A config names its experiment in ``[experiment] name``; the packaged
defaults for that experiment are loaded first and the user's file is layered
on top, so every value in effect can be echoed back with ``dumps``.
"""

from __future__ import annotations

import configparser
import fnmatch
import io
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .bayes import Exponential, HalfCauchy, Normal, PriorSpec, SamplerConfig
from .errors import ConfigError

EXPERIMENTS = ("linear", "advection", "emissions", "powerplant")


def resource_path(*parts) -> Path:
    return Path(str(resources.files("rulebayes").joinpath("resources", *parts)))


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    p.optionxform = str  # keep case: prior names and variant labels
    return p


class ExperimentConfig:
    """Resolved configuration for one experiment run."""

    def __init__(self, parser: configparser.ConfigParser, base_dir: Optional[Path] = None):
        self.parser = parser
        self.base_dir = base_dir
        name = self.get("experiment", "name")
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
        self.name = name

    # -- loading -----------------------------------------------------------

    @classmethod
    def load(cls, source) -> "ExperimentConfig":
        """From a packaged experiment name or an INI file path."""
        if str(source) in EXPERIMENTS:
            return cls.packaged(str(source))
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        user = _parser()
        try:
            user.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not user.has_option("experiment", "name"):
            raise ConfigError(f"{path}: [experiment] name is required")
        name = user.get("experiment", "name")
        if name not in EXPERIMENTS:
            raise ConfigError(f"{path}: unknown experiment {name!r}")
        merged = cls.packaged(name).parser
        # variant tables replace rather than merge
        if user.has_section("variants"):
            merged.remove_section("variants")
        for section in user.sections():
            if not merged.has_section(section):
                merged.add_section(section)
            for key, value in user.items(section):
                merged.set(section, key, value)
        return cls(merged, path.parent)

    @classmethod
    def packaged(cls, name: str) -> "ExperimentConfig":
        path = resource_path("configs", f"{name}.ini")
        if not path.is_file():
            raise ConfigError(f"no packaged config for {name!r}")
        p = _parser()
        p.read(path, encoding="utf-8")
        return cls(p, None)

    # -- typed access ------------------------------------------------------

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key) and self.parser.get(section, key).strip() != ""

    def get(self, section: str, key: str, default=None) -> str:
        if self.has(section, key):
            return self.parser.get(section, key).strip()
        if default is None:
            raise ConfigError(f"missing config value [{section}] {key}")
        return default

    def _typed(self, fn, section, key, default):
        raw = self.get(section, key, None if default is None else str(default))
        try:
            return fn(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {fn.__name__}") from None

    def getint(self, section, key, default=None) -> int:
        return self._typed(int, section, key, default)

    def getfloat(self, section, key, default=None) -> float:
        return self._typed(float, section, key, default)

    def getbool(self, section, key, default=None) -> bool:
        raw = self.get(section, key, None if default is None else str(default)).lower()
        if raw in ("1", "yes", "true", "on"):
            return True
        if raw in ("0", "no", "false", "off"):
            return False
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a boolean")

    def set(self, section: str, key: str, value):
        if not self.parser.has_section(section):
            self.parser.add_section(section)
        self.parser.set(section, key, str(value))

    @property
    def seed(self) -> int:
        return self.getint("experiment", "seed", 0)

    def path(self, section: str, key: str) -> Optional[Path]:
        """A file path value, resolved against the config file's folder or
        the packaged resources; ``None`` when unset."""
        if not self.has(section, key):
            return None
        raw = Path(self.get(section, key))
        candidates = [raw]
        if not raw.is_absolute():
            if self.base_dir is not None:
                candidates.insert(0, self.base_dir / raw)
            candidates.append(resource_path("grammars", raw.name))
            candidates.append(resource_path("data", raw.name))
        for c in candidates:
            if c.is_file():
                return c
        raise ConfigError(f"[{section}] {key}: file not found: {raw}")

    def prior(self, names: Sequence[str]) -> PriorSpec:
        """Priors from ``[prior]``; keys may be glob patterns, first match wins."""
        if not self.parser.has_section("prior"):
            raise ConfigError("missing [prior] section")
        entries = list(self.parser.items("prior"))
        dists = []
        for name in names:
            for pattern, text in entries:
                if fnmatch.fnmatchcase(name, pattern):
                    dists.append(parse_distribution(text))
                    break
            else:
                raise ConfigError(f"no prior matches parameter {name!r}")
        return PriorSpec(tuple(names), tuple(dists))

    def sampler(self, paper_scale: bool = False) -> dict:
        s = "paper_scale" if paper_scale and self.parser.has_section("paper_scale") else "sampler"

        def pick(key, default):
            if s == "paper_scale" and self.has(s, key):
                return self.getint(s, key)
            return self.getint("sampler", key, default)

        return {
            "n_chains": pick("n_chains", 2),
            "n_iterations": pick("n_iterations", 30000),
            "burn_in": pick("burn_in", 5000),
            "thinning": pick("thinning", 25),
            "adapt": self.get("sampler", "adapt", "scale"),
            "proposal_factor": self.getfloat("sampler", "proposal_factor", 1.0),
        }

    def variants(self) -> list:
        """``[(label, penalty_text)]`` in file order."""
        if not self.parser.has_section("variants"):
            raise ConfigError("missing [variants] section")
        return [(k, v.strip()) for k, v in self.parser.items("variants")]

    def dumps(self) -> str:
        buf = io.StringIO()
        self.parser.write(buf)
        return buf.getvalue()


def parse_distribution(text: str):
    parts = text.split()
    try:
        kind, args = parts[0].lower(), [float(a) for a in parts[1:]]
        if kind == "normal" and len(args) == 2:
            return Normal(*args)
        if kind == "exponential" and len(args) == 1:
            return Exponential(*args)
        if kind == "halfcauchy" and len(args) == 1:
            return HalfCauchy(*args)
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad distribution {text!r}: {exc}") from None
    raise ConfigError(f"bad distribution {text!r}; use 'normal m s', 'exponential r' or 'halfcauchy s'")


def sampler_config(settings: dict, prior: PriorSpec, seed: int, log_params=()) -> SamplerConfig:
    sd = prior.proposal_scales() * settings["proposal_factor"]
    return SamplerConfig(
        n_chains=settings["n_chains"],
        n_iterations=settings["n_iterations"],
        burn_in=settings["burn_in"],
        thinning=settings["thinning"],
        proposal_sd=tuple(sd),
        seed=seed,
        adapt=settings["adapt"],
        log_params=tuple(log_params),
    )
