"""Server configuration: defaults, JSON config file, environment, flags.

Precedence (lowest to highest): built-in defaults, config file, BTRS_*
environment variables, command-line flags.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .estimation import DEFAULT_COEFFICIENTS, MODES

DEFAULT_BIND = "127.0.0.1"  # loopback-only unless explicitly overridden
DEFAULT_PORT = 8430


@dataclass(frozen=True)
class ServerConfig:
    bind: str = DEFAULT_BIND
    port: int = DEFAULT_PORT
    data_dir: str = "data"
    ui_dir: Optional[str] = None
    token_ttl_hours: float = 12.0
    password_iterations: int = 100_000
    init_admin_password: Optional[str] = None
    cocomo: dict = field(default_factory=lambda: {
        mode: DEFAULT_COEFFICIENTS[mode] for mode in MODES})


def _read_config_file(path: str) -> dict:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return raw


def load_config(config_file: Optional[str] = None,
                env: Optional[dict] = None, **overrides) -> ServerConfig:
    """Build a ServerConfig. ``overrides`` are flag values (None = unset)."""
    env = os.environ if env is None else env
    config = ServerConfig()

    if config_file:
        raw = _read_config_file(config_file)
        cocomo = dict(config.cocomo)
        for mode, coeffs in raw.get("cocomo", {}).items():
            key = mode.upper().replace("-", "_")
            if key not in MODES:
                raise ValueError(f"config: unknown cocomo mode {mode!r}")
            cocomo[key] = (float(coeffs["a"]), float(coeffs["b"]))
        config = replace(
            config,
            bind=raw.get("bind", config.bind),
            port=int(raw.get("port", config.port)),
            data_dir=raw.get("data_dir", config.data_dir),
            ui_dir=raw.get("ui_dir", config.ui_dir),
            token_ttl_hours=float(raw.get("token_ttl_hours", config.token_ttl_hours)),
            password_iterations=int(raw.get("password_iterations",
                                            config.password_iterations)),
            cocomo=cocomo,
        )

    if env.get("BTRS_BIND"):
        config = replace(config, bind=env["BTRS_BIND"])
    if env.get("BTRS_PORT"):
        config = replace(config, port=int(env["BTRS_PORT"]))
    if env.get("BTRS_DATA_DIR"):
        config = replace(config, data_dir=env["BTRS_DATA_DIR"])

    cleaned = {k: v for k, v in overrides.items() if v is not None}
    if cleaned:
        config = replace(config, **cleaned)
    return config
