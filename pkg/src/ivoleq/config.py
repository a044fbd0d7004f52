"""Economy configuration files.

Two on-disk formats describe the same schema and are auto-detected by
content: a JSON document, or flat ``key = value`` lines with dotted paths.

JSON::

    {
      "vol": {"mu_v": 0.05, "kappa_v": -0.7, "sigma_v": -0.3, "v0": 1.0},
      "horizon_T": 1.0,
      "investors": [
        {"tau": 0.5, "mu_Y": 0.0, "kappa_Y": 0.0,
         "sigma_Y": 0.3, "beta_Y": 0.2, "Y0": 0.0, "X0": 0.1},
        ...
      ]
    }

A homogeneous economy may replace the ``investors`` list with a single
``investor`` template plus ``"replicate": N``; the template is expanded into
N identical investors, each with ``X0 = 0``.

Flat format, one assignment per line, ``#`` starts a comment::

    vol.mu_v = 0.05
    vol.kappa_v = -0.7
    vol.sigma_v = -0.3
    vol.v0 = 1.0
    horizon_T = 1.0
    replicate = 2
    investor.tau = 0.5
    investor.sigma_Y = 0.3
    investor.beta_Y = 0.2

Explicit lists use indexed paths: ``investors.0.tau = 0.5`` and so on.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from ivoleq.model import EconomyParams, InvestorParams, VolParams, replicate_investor

__all__ = ["ConfigError", "load_config", "parse_config_text"]

_VOL_KEYS = {"mu_v", "kappa_v", "sigma_v", "v0"}
_INVESTOR_KEYS = {"tau", "mu_Y", "kappa_Y", "sigma_Y", "beta_Y", "Y0", "X0"}
_TOP_KEYS = {"vol", "horizon_T", "investors", "investor", "replicate"}


class ConfigError(ValueError):
    """The configuration could not be parsed into an economy."""


def load_config(path: str | Path) -> EconomyParams:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def parse_config_text(text: str) -> EconomyParams:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    else:
        raw = _parse_flat(text)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return _build_economy(raw)


def _parse_flat(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines into the nested JSON structure."""
    root: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        _assign_path(root, key.strip().split("."), value.strip(), lineno)
    # investors arrive as {"0": {...}, "1": {...}}; order by index
    if "investors" in root:
        entries = root["investors"]
        if not isinstance(entries, dict):
            raise ConfigError("flat investors entries need indexed keys")
        try:
            order = sorted(entries, key=int)
        except ValueError as exc:
            raise ConfigError(f"non-numeric investor index: {exc}") from exc
        if order != [str(i) for i in range(len(order))]:
            raise ConfigError("investor indices must be 0..n-1 without gaps")
        root["investors"] = [entries[k] for k in order]
    return root


def _assign_path(
    root: dict[str, Any], parts: list[str], value: str, lineno: int
) -> None:
    node = root
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"line {lineno}: path conflict at {part!r}")
    leaf = parts[-1]
    if leaf in node:
        raise ConfigError(f"line {lineno}: duplicate key {'.'.join(parts)!r}")
    node[leaf] = value


def _to_float(value: Any, where: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected a number, got {value!r}") from exc


def _to_int(value: Any, where: str) -> int:
    f = _to_float(value, where)
    if f != int(f):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return int(f)


def _check_keys(mapping: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _build_investor(raw: Any, where: str) -> InvestorParams:
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{where}: expected a mapping")
    _check_keys(raw, _INVESTOR_KEYS, where)
    if "tau" not in raw:
        raise ConfigError(f"{where}: missing required key 'tau'")
    kwargs = {k: _to_float(v, f"{where}.{k}") for k, v in raw.items()}
    try:
        return InvestorParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _build_economy(raw: Mapping[str, Any]) -> EconomyParams:
    _check_keys(raw, _TOP_KEYS, "config")
    for key in ("vol", "horizon_T"):
        if key not in raw:
            raise ConfigError(f"config: missing required key {key!r}")

    vol_raw = raw["vol"]
    if not isinstance(vol_raw, Mapping):
        raise ConfigError("vol: expected a mapping")
    _check_keys(vol_raw, _VOL_KEYS, "vol")
    missing = _VOL_KEYS - set(vol_raw)
    if missing:
        raise ConfigError(f"vol: missing keys {sorted(missing)}")
    try:
        vol = VolParams(**{k: _to_float(v, f"vol.{k}") for k, v in vol_raw.items()})
    except ValueError as exc:
        raise ConfigError(f"vol: {exc}") from exc

    horizon = _to_float(raw["horizon_T"], "horizon_T")
    if not horizon > 0.0:
        raise ConfigError(f"horizon_T must be positive, got {horizon}")

    has_list = "investors" in raw
    has_template = "investor" in raw or "replicate" in raw
    if has_list and has_template:
        raise ConfigError("give either 'investors' or 'investor'+'replicate', not both")

    if has_template:
        if "investor" not in raw or "replicate" not in raw:
            raise ConfigError("'investor' and 'replicate' must appear together")
        template = _build_investor(raw["investor"], "investor")
        count = _to_int(raw["replicate"], "replicate")
        try:
            investors = replicate_investor(template, count)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    elif has_list:
        entries = raw["investors"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("investors: expected a nonempty list")
        investors = tuple(
            _build_investor(entry, f"investors.{i}") for i, entry in enumerate(entries)
        )
    else:
        raise ConfigError("config: missing 'investors' (or 'investor'+'replicate')")

    try:
        return EconomyParams(vol=vol, horizon=horizon, investors=investors)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
