from pathlib import Path
from typing import Any

from dynaconf import Dynaconf
from loguru import logger

from nssm_unc.core.exceptions import ConfigError

DEFAULT_SETTINGS_FILE = Path(__file__).resolve().parent.parent / "settings.toml"
ENVVAR_PREFIX = "NSSM_UNC"

settings = Dynaconf(
    envvar_prefix=ENVVAR_PREFIX,
    settings_files=[str(DEFAULT_SETTINGS_FILE)],
    environments=True,
    env_switcher="NSSM_UNC_PROFILE",
    merge_enabled=True,
)


def load_settings(config_path: str | Path | None = None, fast: bool = False) -> dict[str, Any]:
    """Bundled defaults, optionally the `fast` profile, then the user file on top.

    The user file is plain TOML (`[data]`, `[train]`, ... and a top-level `seed`).
    Tables merge key by key; scalars and lists replace. `NSSM_UNC_<SECTION>__<KEY>`
    environment variables apply on both layers.
    """
    active = settings.from_env("fast" if fast else "default")
    merged = _lower_keys(active.as_dict())

    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = Dynaconf(
                settings_files=[str(path)], environments=False, envvar_prefix=ENVVAR_PREFIX
            )
            overrides = _lower_keys(user.as_dict())
        except Exception as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
        merged = deep_merge(merged, overrides)

    return merged


def deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _lower_keys(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k).lower(): _lower_keys(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_lower_keys(v) for v in value]
    return value


def log_active_profile(active: dict[str, Any], fast: bool) -> None:
    """Logs which profile and run dir are in use."""
    profile = "fast" if fast else "default"
    run_dir = (active.get("paths") or {}).get("run_dir")
    logger.info(f"profile={profile} run_dir={run_dir} seed={active.get('seed')}")
