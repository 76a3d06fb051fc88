"""Page fetching and crawling through a SOCKS5 proxy.

All target connections tunnel through the proxy with remote hostname
resolution (the socks5h flavor), so onion names are handed to the proxy
verbatim and never touch local DNS. The crawler is a bounded
breadth-first traversal restricted to the seed hosts, polite per host,
with individual failures recorded rather than raised.
"""

from __future__ import annotations

import html.parser
import http.client
import posixpath
import socket
import ssl
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from urllib.parse import urljoin, urlsplit, urlunsplit

from .config import PipelineConfig
from .errors import (
    FetchTimeout,
    HttpError,
    NonOnionHost,
    ProxyUnreachable,
    TooLarge,
    ValidationError,
)

_CHUNK = 65536
_MAX_REDIRECTS = 5

_SOCKS_REPLIES = {
    1: "general failure",
    2: "connection not allowed",
    3: "network unreachable",
    4: "host unreachable",
    5: "connection refused",
    6: "TTL expired",
    7: "command not supported",
    8: "address type not supported",
}


@dataclass(frozen=True)
class PageSnapshot:
    """One fetched page: raw bytes plus everything extracted from them."""

    url: str
    final_url: str
    status: int
    html: bytes
    text: str
    image_refs: tuple[str, ...]
    out_links: tuple[str, ...]
    fetched_at: str = ""
    depth: int = 0
    truncated: bool = False


@dataclass
class CrawlResult:
    pages: list[PageSnapshot] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    @property
    def pages_fetched(self) -> int:
        return len(self.pages)


class _TransientFetchError(Exception):
    """Internal: transport-level failure worth retrying."""


# ---------------------------------------------------------------------------
# URL handling
# ---------------------------------------------------------------------------

def _remove_dot_segments(path: str) -> str:
    if not path:
        return ""
    out: list[str] = []
    for seg in path.split("/"):
        if seg == ".":
            continue
        if seg == "..":
            if len(out) > 1:
                out.pop()
        else:
            out.append(seg)
    norm = "/".join(out)
    if path.endswith(("/.", "/..")) and not norm.endswith("/"):
        norm += "/"
    return norm


def normalize_url(url: str, base: str | None = None) -> str:
    """Canonical form: lowercase scheme/host, no fragment, no default
    port, dot segments resolved, empty http(s) path becomes "/"."""
    if base:
        url = urljoin(base, url)
    parts = urlsplit(url)
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    netloc = host
    if parts.port is not None:
        default = {"http": 80, "https": 443}.get(scheme)
        if parts.port != default:
            netloc = f"{host}:{parts.port}"
    path = _remove_dot_segments(parts.path)
    if not path and scheme in ("http", "https"):
        path = "/"
    return urlunsplit((scheme, netloc, path, parts.query, ""))


def parse_proxy(proxy_url: str) -> tuple[str, int]:
    parts = urlsplit(proxy_url)
    if parts.scheme not in ("socks5h", "socks5"):
        raise ValidationError("proxy_url", f"unsupported proxy scheme {parts.scheme!r}")
    if not parts.hostname:
        raise ValidationError("proxy_url", "proxy host missing")
    return parts.hostname, parts.port or 9050


# ---------------------------------------------------------------------------
# SOCKS5 client
# ---------------------------------------------------------------------------

def _socks_connect(proxy: tuple[str, int], host: str, port: int,
                   timeout: float) -> socket.socket:
    """Open a TCP tunnel to host:port through the proxy.

    The hostname goes to the proxy as-is (address type DOMAIN), which is
    what makes onion resolution work.
    """
    try:
        sock = socket.create_connection(proxy, timeout=timeout)
    except OSError as exc:
        raise ProxyUnreachable(f"cannot connect to proxy {proxy[0]}:{proxy[1]}: {exc}") from exc
    try:
        sock.sendall(b"\x05\x01\x00")  # version 5, one method: no auth
        reply = _recv_exact(sock, 2)
        if reply != b"\x05\x00":
            raise ProxyUnreachable(f"proxy refused authentication negotiation: {reply!r}")
        host_b = host.encode("idna") if not host.isascii() else host.encode("ascii")
        if len(host_b) > 255:
            raise ValidationError("url", "hostname longer than 255 bytes")
        req = b"\x05\x01\x00\x03" + bytes([len(host_b)]) + host_b + struct.pack(">H", port)
        sock.sendall(req)
        head = _recv_exact(sock, 4)
        if head[0] != 5:
            raise ProxyUnreachable(f"bad SOCKS version in reply: {head[0]}")
        if head[1] != 0:
            reason = _SOCKS_REPLIES.get(head[1], f"code {head[1]}")
            raise _TransientFetchError(f"proxy could not reach {host}:{port}: {reason}")
        atyp = head[3]
        if atyp == 1:
            _recv_exact(sock, 4 + 2)
        elif atyp == 3:
            ln = _recv_exact(sock, 1)[0]
            _recv_exact(sock, ln + 2)
        elif atyp == 4:
            _recv_exact(sock, 16 + 2)
        else:
            raise ProxyUnreachable(f"bad address type in reply: {atyp}")
        return sock
    except (OSError, _TransientFetchError, ProxyUnreachable, ValidationError):
        sock.close()
        raise


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ProxyUnreachable("proxy closed the connection mid-handshake")
        buf += chunk
    return buf


class _SocksHTTPConnection(http.client.HTTPConnection):
    def __init__(self, host: str, port: int, proxy: tuple[str, int], timeout: float):
        super().__init__(host, port, timeout=timeout)
        self._proxy = proxy

    def connect(self):
        self.sock = _socks_connect(self._proxy, self.host, self.port, self.timeout)
        self.sock.settimeout(self.timeout)


class _SocksHTTPSConnection(_SocksHTTPConnection):
    def connect(self):
        super().connect()
        # onion services are self-authenticating; certificates are not
        ctx = ssl.create_default_context()
        ctx.check_hostname = False
        ctx.verify_mode = ssl.CERT_NONE
        self.sock = ctx.wrap_socket(self.sock, server_hostname=self.host)


# ---------------------------------------------------------------------------
# politeness
# ---------------------------------------------------------------------------

class Throttle:
    """Per-host minimum spacing between request starts, across threads."""

    def __init__(self, delay_ms: int):
        self._delay = delay_ms / 1000.0
        self._next: dict[str, float] = {}
        self._lock = threading.Lock()

    def wait(self, host: str) -> None:
        if self._delay <= 0:
            return
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next.get(host, now))
            self._next[host] = start + self._delay
        delay = start - time.monotonic()
        if delay > 0:
            time.sleep(delay)


# ---------------------------------------------------------------------------
# HTML parsing
# ---------------------------------------------------------------------------

class _PageParser(html.parser.HTMLParser):
    """Single pass collecting visible text, hrefs and image sources."""

    _SKIP = {"script", "style"}

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.hrefs: list[str] = []
        self.img_srcs: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._skip_depth += 1
            return
        amap = dict(attrs)
        if tag == "a" and amap.get("href"):
            self.hrefs.append(amap["href"])
        if tag == "img" and amap.get("src"):
            self.img_srcs.append(amap["src"])
        if tag == "img" and amap.get("alt"):
            self.parts.append(amap["alt"])
        if amap.get("title"):
            self.parts.append(amap["title"])

    def handle_endtag(self, tag):
        if tag in self._SKIP and self._skip_depth:
            self._skip_depth -= 1

    def handle_data(self, data):
        if not self._skip_depth and data.strip():
            self.parts.append(data)

    def text(self) -> str:
        return " ".join(" ".join(self.parts).split())


def _parse_page(raw: bytes) -> _PageParser:
    parser = _PageParser()
    parser.feed(raw.decode("utf-8", errors="replace"))
    parser.close()
    return parser


def extract_text(raw: bytes) -> str:
    """Visible text in document order, whitespace-normalized.

    Script/style/comment content is dropped; img alt and any title
    attributes are appended at their tag position.
    """
    return _parse_page(raw).text()


# ---------------------------------------------------------------------------
# fetching
# ---------------------------------------------------------------------------

def _check_host(url: str, config: PipelineConfig) -> tuple[str, str, int]:
    parts = urlsplit(url)
    if parts.scheme not in ("http", "https"):
        raise ValidationError("url", f"unsupported scheme {parts.scheme!r} in {url!r}")
    host = (parts.hostname or "").lower()
    if not host:
        raise ValidationError("url", f"no host in {url!r}")
    if not host.endswith(".onion") and not config.allow_clearnet:
        raise NonOnionHost(f"{host!r} is not a .onion host")
    port = parts.port or (443 if parts.scheme == "https" else 80)
    return parts.scheme, host, port


def _single_request(url: str, config: PipelineConfig, cap: int,
                    truncate: bool) -> tuple[int, dict, bytes, bool]:
    """One GET through the proxy. Returns (status, headers, body, truncated)."""
    scheme, host, port = _check_host(url, config)
    proxy = parse_proxy(config.proxy_url)
    timeout = config.timeout_ms / 1000.0
    cls = _SocksHTTPSConnection if scheme == "https" else _SocksHTTPConnection
    conn = cls(host, port, proxy, timeout)
    parts = urlsplit(url)
    path = parts.path or "/"
    if parts.query:
        path += "?" + parts.query
    try:
        conn.request("GET", path, headers={
            "User-Agent": config.user_agent,
            "Accept": "*/*",
            "Connection": "close",
        })
        resp = conn.getresponse()
        status = resp.status
        headers = {k.lower(): v for k, v in resp.getheaders()}
        body = b""
        truncated = False
        while True:
            chunk = resp.read(_CHUNK)
            if not chunk:
                break
            body += chunk
            if len(body) > cap:
                if truncate:
                    body = body[:cap]
                    truncated = True
                    break
                raise TooLarge(f"{url} exceeds {cap} bytes")
        return status, headers, body, truncated
    except socket.timeout as exc:
        raise _TransientFetchError(f"timeout talking to {host}: {exc}") from exc
    except (http.client.HTTPException, OSError, ssl.SSLError) as exc:
        raise _TransientFetchError(f"transport error for {url}: {exc}") from exc
    finally:
        conn.close()


def _request_with_retries(url: str, config: PipelineConfig, cap: int, truncate: bool,
                          throttle: Throttle | None = None) -> tuple[int, dict, bytes, bool, str]:
    """GET with redirects and retry-on-transport-error.

    Returns (status, headers, body, truncated, final_url).
    """
    attempts = max(1, config.retries)
    backoff = config.retry_backoff_ms / 1000.0
    last_err: Exception | None = None
    for attempt in range(attempts):
        if attempt:
            time.sleep(backoff * (2 ** (attempt - 1)))
        try:
            current = url
            for _ in range(_MAX_REDIRECTS + 1):
                if throttle is not None:
                    throttle.wait(urlsplit(current).hostname or "")
                status, headers, body, trunc = _single_request(current, config, cap, truncate)
                if status in (301, 302, 303, 307, 308) and headers.get("location"):
                    current = normalize_url(headers["location"], base=current)
                    continue
                return status, headers, body, trunc, current
            raise _TransientFetchError(f"too many redirects from {url}")
        except _TransientFetchError as exc:
            last_err = exc
    raise FetchTimeout(f"{url}: giving up after {attempts} attempts: {last_err}")


def fetch_page(url: str, config: PipelineConfig,
               throttle: Throttle | None = None, depth: int = 0) -> PageSnapshot:
    """Fetch one page and extract text, image references and links."""
    url = normalize_url(url)
    status, _, body, truncated, final_url = _request_with_retries(
        url, config, config.max_page_bytes, truncate=True, throttle=throttle)
    if status >= 400:
        raise HttpError(status, url)
    parser = _parse_page(body)
    image_refs = tuple(dict.fromkeys(
        normalize_url(src, base=final_url) for src in parser.img_srcs
        if urlsplit(urljoin(final_url, src)).scheme in ("http", "https")))
    out_links = tuple(dict.fromkeys(
        normalize_url(href, base=final_url) for href in parser.hrefs
        if urlsplit(urljoin(final_url, href)).scheme in ("http", "https")))
    return PageSnapshot(
        url=url, final_url=final_url, status=status, html=body,
        text=parser.text(), image_refs=image_refs, out_links=out_links,
        fetched_at=datetime.now(timezone.utc).isoformat(),
        depth=depth, truncated=truncated)


def download_image(url: str, config: PipelineConfig,
                   throttle: Throttle | None = None) -> tuple[bytes, str]:
    """Fetch raw image bytes (capped) and the reported content type."""
    url = normalize_url(url)
    status, headers, body, _, _ = _request_with_retries(
        url, config, config.max_image_bytes, truncate=False, throttle=throttle)
    if status >= 400:
        raise HttpError(status, url)
    return body, headers.get("content-type", "")


# ---------------------------------------------------------------------------
# crawling
# ---------------------------------------------------------------------------

def crawl(seeds: list[str], config: PipelineConfig) -> "CrawlResult":
    """Breadth-first crawl from the seeds, same hosts only.

    Pages are fetched in deterministic wave order; failures go to the
    errors list. AllSeedsFailed is raised only if nothing at all could
    be fetched.
    """
    from .errors import AllSeedsFailed

    if not seeds:
        raise ValidationError("seeds", "at least one seed URL is required")
    result = CrawlResult()
    throttle = Throttle(config.per_host_delay_ms)
    allowed_hosts: set[str] = set()
    frontier: list[tuple[str, int]] = []
    visited: set[str] = set()

    for seed in seeds:
        try:
            norm = normalize_url(seed)
            _check_host(norm, config)
        except (ValidationError, NonOnionHost) as exc:
            result.errors.append({"url": str(seed), "error": str(exc)})
            continue
        host = urlsplit(norm).hostname or ""
        allowed_hosts.add(host)
        if norm not in visited:
            visited.add(norm)
            frontier.append((norm, 0))

    with ThreadPoolExecutor(max_workers=config.crawl_workers) as pool:
        while frontier and len(result.pages) < config.max_pages:
            budget = config.max_pages - len(result.pages)
            wave, frontier = frontier[:budget], frontier[budget:]
            futures = [(u, d, pool.submit(fetch_page, u, config, throttle, d))
                       for u, d in wave]
            next_wave: list[tuple[str, int]] = []
            for u, d, fut in futures:
                try:
                    page = fut.result()
                except Exception as exc:  # noqa: BLE001 - recorded, never fatal
                    result.errors.append({"url": u, "error": str(exc)})
                    continue
                result.pages.append(page)
                if d < config.max_depth:
                    for link in page.out_links:
                        if urlsplit(link).hostname in allowed_hosts and link not in visited:
                            visited.add(link)
                            next_wave.append((link, d + 1))
            frontier = frontier + next_wave
    if not result.pages:
        raise AllSeedsFailed(f"no page could be fetched from {len(seeds)} seed(s)")
    return result
