"""Flat key=value run configuration with typed coercion.

Config files hold one `key=value` per line ('#' comments and blank lines
allowed); CLI `--set key=value` flags override file values. Resolution
collects every problem (unknown key, bad value) into one ConfigError so
the user sees the full list at once.
"""

from __future__ import annotations

from .errors import ConfigError

# Every addressable key and its scalar type. Path-valued keys stay str.
CONFIG_SCHEMA: dict[str, type] = {
    # file paths
    "train_corpus": str,
    "val_corpus": str,
    "vocab": str,
    "tagger": str,
    "out_dir": str,
    # model architecture
    "d": int,
    "b": int,
    "e": int,
    "num_encoder_layers": int,
    "encoder_heads": int,
    "encoder_ffn_dim": int,
    "num_fusion_layers": int,
    "fusion_heads": int,
    "fusion_ffn_dim": int,
    "dropout": float,
    "pos_source": str,
    "loss_mask": str,
    # tokenizer and sampler
    "nontail_pos": str,
    "seq_len": int,
    "sampler": str,
    # optimization
    "learning_rate": float,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "grad_clip_norm": float,
    "batch_size": int,
    "max_epochs": int,
    "patience": int,
    "seed": int,
}

MODEL_KEYS = (
    "d", "b", "e", "num_encoder_layers", "encoder_heads", "encoder_ffn_dim",
    "num_fusion_layers", "fusion_heads", "fusion_ffn_dim", "dropout",
    "pos_source", "loss_mask",
)
TRAIN_KEYS = (
    "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
    "grad_clip_norm", "batch_size", "max_epochs", "patience", "seed",
    "sampler", "seq_len",
)


def parse_kv_text(text: str, origin: str) -> dict[str, str]:
    """Parse key=value lines; later assignments win."""
    out: dict[str, str] = {}
    problems: list[str] = []
    for line_number, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            problems.append(f"{origin}:{line_number}: expected key=value")
            continue
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    if problems:
        raise ConfigError(problems)
    return out


def load_config_file(path: str) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_text(fh.read(), path)


def apply_overrides(raw: dict[str, str], overrides: list[str]) -> dict[str, str]:
    """Merge `--set key=value` flags over the file values."""
    merged = dict(raw)
    problems: list[str] = []
    for item in overrides:
        if "=" not in item:
            problems.append(f"--set {item!r}: expected key=value")
            continue
        key, _, value = item.partition("=")
        merged[key.strip()] = value.strip()
    if problems:
        raise ConfigError(problems)
    return merged


def coerce_config(raw: dict[str, str]) -> dict:
    """Validate keys against the schema and convert values to their types."""
    out: dict = {}
    problems: list[str] = []
    for key, value in raw.items():
        if key not in CONFIG_SCHEMA:
            problems.append(f"unknown config key {key!r}")
            continue
        typ = CONFIG_SCHEMA[key]
        try:
            out[key] = typ(value)
        except ValueError:
            problems.append(
                f"config key {key!r}: cannot parse {value!r} as {typ.__name__}"
            )
    if problems:
        raise ConfigError(problems)
    return out


def require_keys(cfg: dict, keys: list[str]) -> None:
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError([f"missing required config key {k!r}" for k in missing])
