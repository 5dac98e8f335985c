"""Flat dotted-key configuration with a committed reference file of defaults.

Keys look like ``retina.activation_fraction``. Values are typed after the
reference default, so a user file can only override known keys.
"""
from __future__ import annotations

import configparser
import os
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Mapping

ENV_PREFIX = "GAZESNN__"
_SECTION = "gazesnn"


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; raised before a run starts."""

    def __init__(self, module: str, message: str):
        self.module = module
        super().__init__(f"[{module}] {message}")


def _parse_text(text: str, origin: str) -> dict[str, str]:
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",),
        delimiters=("=",), empty_lines_in_values=False,
    )
    parser.optionxform = str.lower
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=origin)
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse {origin}: {exc}") from exc
    return dict(parser[_SECTION])


def _coerce(key: str, raw: Any, default: Any) -> Any:
    if not isinstance(raw, str):
        raw_str = None
    else:
        raw_str = raw.strip()
    try:
        if isinstance(default, bool):
            if raw_str is None:
                return bool(raw)
            low = raw_str.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw) if raw_str is None else int(raw_str)
        if isinstance(default, float):
            return float(raw) if raw_str is None else float(raw_str)
    except (TypeError, ValueError):
        raise ConfigError(key.split(".")[0], f"bad value for {key}: {raw!r}") from None
    return raw if raw_str is None else raw_str


def _guess(raw: str) -> Any:
    low = raw.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw.strip()


def _load_defaults() -> dict[str, Any]:
    text = resources.files("gazesnn").joinpath("defaults.cfg").read_text()
    return {k: _guess(v) for k, v in _parse_text(text, "defaults.cfg").items()}


class Config(Mapping[str, Any]):
    """Immutable mapping of every known key to its typed value."""

    def __init__(self, values: Mapping[str, Any] | None = None):
        self._defaults = _load_defaults()
        self._values = dict(self._defaults)
        if values:
            self._update(values)

    def _update(self, values: Mapping[str, Any]) -> None:
        for key, raw in values.items():
            key = key.lower()
            if key not in self._defaults:
                raise ConfigError(key.split(".")[0], f"unknown key {key}")
            self._values[key] = _coerce(key, raw, self._defaults[key])

    def __getitem__(self, key: str) -> Any:
        return self._values[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def replace(self, **overrides: Any) -> "Config":
        """Copy with overrides; keyword ``a__b`` stands for key ``a.b``."""
        new = Config.__new__(Config)
        new._defaults = self._defaults
        new._values = dict(self._values)
        new._update({k.replace("__", "."): v for k, v in overrides.items()})
        return new

    def updated(self, values: Mapping[str, Any]) -> "Config":
        new = self.replace()
        new._update(values)
        return new

    def section(self, prefix: str) -> dict[str, Any]:
        """Keys under ``prefix.`` with the prefix stripped."""
        p = prefix + "."
        return {k[len(p):]: v for k, v in self._values.items() if k.startswith(p)}

    def to_text(self) -> str:
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self._values.items())


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.upper().startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower().replace("__", ".")
            out[key] = value
    return out


def load_config(path: str | os.PathLike | None = None,
                overrides: Mapping[str, Any] | None = None,
                environ: Mapping[str, str] | None = None) -> Config:
    """Defaults <- file <- environment <- explicit overrides."""
    cfg = Config()
    if path is not None:
        p = Path(path)
        if not p.exists() or p.is_dir():
            raise ConfigError("config", f"config file not found: {p}")
        cfg = cfg.updated(_parse_text(p.read_text(), str(p)))
    cfg = cfg.updated(env_overrides(environ))
    if overrides:
        cfg = cfg.updated(overrides)
    return cfg
