"""Pipeline configuration: defaults, file loading, validation.

The config file is a flat UTF-8 YAML key-value document whose keys match
the PipelineConfig field names. Absent fields take the defaults below;
out-of-range values raise ValidationError naming the field.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

import yaml

from .errors import ParseError, ValidationError

ENV_PROXY = "ONIONLENS_PROXY"
ENV_CONFIG = "ONIONLENS_CONFIG"

DEFAULT_PROXY = "socks5h://127.0.0.1:9050"
DEFAULT_USER_AGENT = "Mozilla/5.0 (Windows NT 10.0; rv:109.0) Gecko/20100101 Firefox/115.0"


@dataclass
class PipelineConfig:
    # proxy / fetch policy
    proxy_url: str = DEFAULT_PROXY
    allow_clearnet: bool = False
    user_agent: str = DEFAULT_USER_AGENT
    # crawl limits
    max_pages: int = 25
    max_depth: int = 2
    per_host_delay_ms: int = 500
    timeout_ms: int = 15000
    retries: int = 3
    retry_backoff_ms: int = 500
    crawl_workers: int = 4
    max_page_bytes: int = 2 * 1024 * 1024
    # image handling
    max_image_bytes: int = 5 * 1024 * 1024
    max_images_per_scan: int = 50
    dedup_threshold: int = 4
    min_side: int = 64
    # keyword extraction
    keyword_k: int = 10
    ngram_max: int = 2
    mmr_lambda: float = 0.5
    min_similarity: float = 0.15
    # artifact paths
    model_path: str | None = None
    embeddings_path: str | None = None
    prototypes_path: str | None = None
    stopwords_path: str | None = None
    job_store_path: str | None = None
    # service
    scan_workers: int = 2

    def validate(self) -> "PipelineConfig":
        positive = (
            "max_pages", "max_depth", "per_host_delay_ms", "timeout_ms", "retries",
            "retry_backoff_ms", "crawl_workers", "max_page_bytes", "max_image_bytes",
            "max_images_per_scan", "min_side", "keyword_k", "ngram_max", "scan_workers",
        )
        for name in positive:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ValidationError(name, f"must be a strictly positive integer, got {value!r}")
        if not isinstance(self.dedup_threshold, int) or isinstance(self.dedup_threshold, bool) \
                or not 0 <= self.dedup_threshold <= 64:
            raise ValidationError("dedup_threshold", f"must be an integer in [0, 64], got {self.dedup_threshold!r}")
        if not isinstance(self.mmr_lambda, (int, float)) or isinstance(self.mmr_lambda, bool) \
                or not 0.0 <= float(self.mmr_lambda) <= 1.0:
            raise ValidationError("mmr_lambda", f"must be in [0, 1], got {self.mmr_lambda!r}")
        if not isinstance(self.min_similarity, (int, float)) or isinstance(self.min_similarity, bool) \
                or not -1.0 <= float(self.min_similarity) <= 1.0:
            raise ValidationError("min_similarity", f"must be in [-1, 1], got {self.min_similarity!r}")
        if not isinstance(self.allow_clearnet, bool):
            raise ValidationError("allow_clearnet", f"must be a boolean, got {self.allow_clearnet!r}")
        for name in ("proxy_url", "user_agent"):
            if not isinstance(getattr(self, name), str) or not getattr(self, name):
                raise ValidationError(name, "must be a non-empty string")
        self.mmr_lambda = float(self.mmr_lambda)
        self.min_similarity = float(self.min_similarity)
        return self


_FIELD_NAMES = {f.name for f in fields(PipelineConfig)}


def load_config(path: str) -> PipelineConfig:
    """Load a config file; absent fields take defaults, unknown keys fail.

    Raises ParseError for unreadable/malformed files and ValidationError
    (naming the field) for unknown keys or out-of-range values.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed config {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParseError(f"config {path} must be a key-value document")
    return config_from_mapping(raw)


def config_from_mapping(raw: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    if ENV_PROXY in os.environ and "proxy_url" not in raw:
        cfg.proxy_url = os.environ[ENV_PROXY]
    for key, value in raw.items():
        if key not in _FIELD_NAMES:
            raise ValidationError(key, "unknown config field")
        setattr(cfg, key, value)
    return cfg.validate()


def default_config() -> PipelineConfig:
    return config_from_mapping({})
