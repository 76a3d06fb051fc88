"""Exception types shared across the package."""

from __future__ import annotations


class OnionLensError(Exception):
    """Base class for all package-specific errors."""


class UnknownLabel(OnionLensError):
    """A label string does not resolve to any of the five categories."""


class ParseError(OnionLensError):
    """A file could not be parsed at all (config, embeddings, ...)."""


class ValidationError(OnionLensError):
    """A parsed value is out of range or otherwise unacceptable."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class NonOnionHost(OnionLensError):
    """Target host is not a .onion address and clearnet mode is off."""


class ProxyUnreachable(OnionLensError):
    """The SOCKS proxy could not be reached or refused the handshake."""


class FetchTimeout(OnionLensError):
    """A fetch did not complete within the configured timeout/retries."""


class HttpError(OnionLensError):
    """HTTP status >= 400 from the target."""

    def __init__(self, status: int, url: str = ""):
        self.status = status
        self.url = url
        super().__init__(f"HTTP {status}" + (f" for {url}" if url else ""))


class TooLarge(OnionLensError):
    """A download exceeded the configured byte cap."""


class AllSeedsFailed(OnionLensError):
    """A crawl fetched zero pages."""


class SchemaError(OnionLensError):
    """A structured file (manifest, embeddings, prototypes) violates its schema."""


class UnsupportedOperator(OnionLensError):
    """Model file contains an operator outside the supported subset."""

    def __init__(self, op_type: str, detail: str = ""):
        self.op_type = op_type
        super().__init__(f"{op_type}" + (f": {detail}" if detail else ""))


class ShapeMismatch(OnionLensError):
    """Tensor shapes are inconsistent at some graph node."""

    def __init__(self, node: str, detail: str = ""):
        self.node = node
        super().__init__(f"node {node!r}" + (f": {detail}" if detail else ""))


class MissingMetadata(OnionLensError):
    """Model file lacks required metadata (class order or preprocessing)."""


class NonFiniteValue(OnionLensError):
    """A forward pass produced NaN or Inf at some node."""

    def __init__(self, node: str):
        self.node = node
        super().__init__(f"non-finite values at node {node!r}")
