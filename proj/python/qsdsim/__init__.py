"""Python bindings for the qsd sampler."""

from ._core import (
    AllAbsorbed,
    ConfigError,
    QsdError,
    RegimeError,
    RegionExtinct,
    UnsupportedOracle,
    combine_split,
    decode_immunity,
    encode_immunity,
    multinomial,
    normalize_config,
    oracle_config,
    pure_death_lcd,
    run_config,
    ti_alpha,
    tv_distance,
    wf_lcd,
)

__all__ = [
    "AllAbsorbed",
    "ConfigError",
    "QsdError",
    "RegimeError",
    "RegionExtinct",
    "UnsupportedOracle",
    "combine_split",
    "decode_immunity",
    "encode_immunity",
    "multinomial",
    "normalize_config",
    "oracle_config",
    "pure_death_lcd",
    "run_config",
    "ti_alpha",
    "tv_distance",
    "wf_lcd",
]
