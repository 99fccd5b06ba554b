"""Run configuration: ``key = value`` files merged with command-line overrides."""

from __future__ import annotations

import os
from typing import Any, Callable, Dict, Iterable, Optional

from .decoder import DecoderConfig
from .tuning import ProConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("none", "inf", "unlimited") else int(text)


def _list(text: str):
    return tuple(x.strip() for x in text.split(",") if x.strip())


PATH_KEYS = ("phrase_table", "pblr_table", "hr_table", "lm", "weights", "top_words")

KEYS: Dict[str, Callable[[str], Any]] = {
    **{k: str for k in PATH_KEYS},
    "features": _list,
    "wall_tags": _list,
    "beam_size": _opt_int,
    "distortion_limit": _opt_int,
    "use_pblr": _bool,
    "use_hr": _bool,
    "ds_future": _bool,
    "nbest_size": int,
    "mbr": _bool,
    "mbr_scale": float,
    "max_phrase_len": int,
    "pass_through": _bool,
    "pass_through_score": float,
    "path_max_len": int,
    "table_limit": int,
    "pro_samples": int,
    "pro_keep": int,
    "pro_min_gap": float,
    "pro_interpolation": float,
    "pro_iterations": int,
    "pro_l2": float,
    "seed": int,
    "jobs": int,
}

DEFAULTS: Dict[str, Any] = {
    "features": (),
    "wall_tags": ("PU",),
    "table_limit": 20,
    "seed": 1,
    "jobs": 1,
}


class RunConfig:
    def __init__(self, values: Optional[Dict[str, Any]] = None, base_dir: str = "."):
        self.values: Dict[str, Any] = dict(DEFAULTS)
        self.base_dir = base_dir
        for k, v in (values or {}).items():
            self.set(k, v)

    @classmethod
    def load(cls, path: Optional[str], overrides: Iterable[str] = ()) -> "RunConfig":
        cfg = cls(base_dir=os.path.dirname(os.path.abspath(path)) if path else os.getcwd())
        if path:
            with open(path, encoding="utf-8") as f:
                for lineno, line in enumerate(f, 1):
                    line = line.split("#", 1)[0].strip()
                    if not line:
                        continue
                    if "=" not in line:
                        raise ConfigError(f"{path}:{lineno}: expected key = value")
                    key, value = (x.strip() for x in line.split("=", 1))
                    try:
                        cfg.set(key, value)
                    except ConfigError as e:
                        raise ConfigError(f"{path}:{lineno}: {e}") from None
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, value = item.split("=", 1)
            cfg.set(key.strip(), value.strip(), relative_to=os.getcwd())
        return cfg

    def set(self, key: str, value, relative_to: Optional[str] = None) -> None:
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, str):
            try:
                value = KEYS[key](value)
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {e}") from None
            if key in PATH_KEYS:
                value = os.path.join(relative_to or self.base_dir, value)
        self.values[key] = value

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def __contains__(self, key):
        return key in self.values

    def validate(self, required=()) -> None:
        for key in required:
            if key not in self.values:
                raise ConfigError(f"missing required config key {key!r}")
        for key in PATH_KEYS:
            if key in self.values and not os.path.exists(self.values[key]):
                raise ConfigError(f"{key}: no such file {self.values[key]}")

    def decoder_config(self) -> DecoderConfig:
        cfg = DecoderConfig()
        for key in ("beam_size", "distortion_limit", "use_pblr", "use_hr", "ds_future", "nbest_size",
                    "mbr", "mbr_scale", "max_phrase_len", "pass_through", "pass_through_score",
                    "path_max_len"):
            if key in self.values:
                setattr(cfg, key, self.values[key])
        try:
            cfg.set_features(self.values["features"])
            cfg.__post_init__()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        return cfg

    def pro_config(self) -> ProConfig:
        kwargs = {}
        for key in ("samples", "keep", "min_gap", "interpolation", "iterations", "l2"):
            if "pro_" + key in self.values:
                kwargs[key] = self.values["pro_" + key]
        try:
            return ProConfig(seed=self.values["seed"], **kwargs)
        except ValueError as e:
            raise ConfigError(str(e)) from None
