"""Python access to the mvhom toolkit: configs, cell tensors, ladders and the CLI."""

from ._core import (
    Config,
    MvhomError,
    __version__,
    cell_tensor,
    coefficient_csv,
    increment_scaling,
    ladder,
    load_config,
    parse_config,
    run_cli,
    sha256_hex,
    wasserstein2_1d,
)

__all__ = [
    "Config",
    "MvhomError",
    "__version__",
    "cell_tensor",
    "coefficient_csv",
    "increment_scaling",
    "ladder",
    "load_config",
    "parse_config",
    "run_cli",
    "sha256_hex",
    "wasserstein2_1d",
]
