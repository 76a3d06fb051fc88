"""Shared fixtures: paths, mock onion infrastructure, scan configuration."""

from __future__ import annotations

import pathlib
import sys

import pytest

TESTS = pathlib.Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))
sys.path.insert(0, str(TESTS / "tools"))

from mockinfra import MockSite, MockSocksProxy  # noqa: E402

FIXTURES = TESTS / "fixtures"
ONION_HOST = "darkmarket7xk2.onion"


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the jit kernels once so timed tests measure math, not numba."""
    from onionlens import kernels

    kernels.warmup()
    return kernels.backend()


@pytest.fixture
def mock_site():
    site = MockSite(root=FIXTURES / "site").start()
    yield site
    site.stop()


@pytest.fixture
def mock_proxy(mock_site):
    proxy = MockSocksProxy(routes={ONION_HOST: ("127.0.0.1", mock_site.port)}).start()
    yield proxy
    proxy.stop()


@pytest.fixture
def onion_url() -> str:
    return f"http://{ONION_HOST}/index.html"


@pytest.fixture
def scan_config(mock_proxy):
    """Config pointed at the fixture model/embeddings through the mock proxy."""
    from onionlens.config import default_config

    cfg = default_config()
    cfg.proxy_url = f"socks5h://127.0.0.1:{mock_proxy.port}"
    cfg.model_path = str(FIXTURES / "models" / "scanmodel.onnx")
    cfg.embeddings_path = str(FIXTURES / "nlp" / "vectors_toy.txt")
    cfg.per_host_delay_ms = 20
    cfg.timeout_ms = 8000
    cfg.retries = 2
    cfg.retry_backoff_ms = 50
    return cfg.validate()


@pytest.fixture
def artifacts(scan_config):
    from onionlens.pipeline import load_artifacts

    return load_artifacts(scan_config)
