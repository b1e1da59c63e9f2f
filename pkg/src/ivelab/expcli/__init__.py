from .config import ConfigError, RunConfig, load_config, parse_config
from .heatmap import heatmap_text, read_heatmap, write_heatmap

__all__ = [
    "ConfigError",
    "RunConfig",
    "heatmap_text",
    "load_config",
    "parse_config",
    "read_heatmap",
    "write_heatmap",
]
