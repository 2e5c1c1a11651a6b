"""Name resolution and single HTTP exchanges under a throttle."""
from __future__ import annotations

import http.client
import socket
import ssl
from dataclasses import dataclass
from email.message import Message
from urllib.parse import urljoin, urlsplit

from ..corpus import url_registrable_domain
from .policy import ScanPolicy
from .throttle import HostThrottle


class ResolveError(OSError):
    pass


def resolve(host: str, policy: ScanPolicy) -> str:
    """Address for ``host``, honouring the policy's pinned hosts."""
    host = host.lower().rstrip(".")
    if host in policy.hosts:
        return policy.hosts[host]
    try:
        infos = socket.getaddrinfo(host, None, type=socket.SOCK_STREAM)
    except (socket.gaierror, UnicodeError) as exc:
        raise ResolveError(f"cannot resolve {host}: {exc}") from exc
    # prefer IPv4 for stable throttle keys
    infos.sort(key=lambda i: i[0] != socket.AF_INET)
    return infos[0][4][0]


def _tls_context() -> ssl.SSLContext:
    # we record what the server sends, valid certificate or not
    ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
    ctx.check_hostname = False
    ctx.verify_mode = ssl.CERT_NONE
    return ctx


@dataclass(frozen=True)
class Exchange:
    url: str
    status: int
    headers: tuple
    body: str
    tls: bool

    @property
    def location(self):
        if not 300 <= self.status < 400:
            return None
        for n, v in self.headers:
            if n.lower() == "location" and v.strip():
                return urljoin(self.url, v.strip())
        return None


def _decode(raw: bytes, content_type) -> str:
    msg = Message()
    msg["content-type"] = content_type or "text/html"
    charset = msg.get_content_charset() or "utf-8"
    try:
        return raw.decode(charset, errors="replace")
    except LookupError:
        return raw.decode("utf-8", errors="replace")


def default_port(scheme: str, policy: ScanPolicy) -> int:
    return policy.https_port if scheme == "https" else policy.http_port


def http_exchange(url: str, policy: ScanPolicy, throttle: HostThrottle, address=None,
                  method="GET") -> Exchange:
    """One request, no redirect following.

    Raises ``OSError`` subclasses on connection problems, including
    ``TimeoutError``.
    """
    parts = urlsplit(url)
    host = parts.hostname
    use_tls = parts.scheme == "https"
    port = parts.port or default_port(parts.scheme, policy)
    addr = address or resolve(host, policy)
    timeout = policy.timeout_s
    if use_tls:
        conn = http.client.HTTPSConnection(host, port, timeout=timeout, context=_tls_context())
    else:
        conn = http.client.HTTPConnection(host, port, timeout=timeout)

    def connect(_addr, *args, **kw):
        return socket.create_connection((addr, port), *args, **kw)

    conn._create_connection = connect
    path = parts.path or "/"
    if parts.query:
        path += "?" + parts.query
    with throttle.slot(addr):
        try:
            conn.request(method, path, headers={
                "Host": parts.netloc.rsplit("@", 1)[-1],
                "User-Agent": policy.user_agent,
                "Accept": "text/html,application/xhtml+xml,*/*;q=0.8",
                "Connection": "close",
            })
            resp = conn.getresponse()
            headers = tuple((n, v) for n, v in resp.getheaders())
            raw = resp.read(policy.max_body_bytes)
        except socket.timeout as exc:
            raise TimeoutError(f"timed out fetching {url}") from exc
        except (http.client.HTTPException, ssl.SSLError) as exc:
            raise ConnectionError(f"protocol error fetching {url}: {exc}") from exc
        finally:
            conn.close()
    ctype = next((v for n, v in headers if n.lower() == "content-type"), None)
    return Exchange(url, resp.status, headers, _decode(raw, ctype), use_tls)


def follow(url: str, policy: ScanPolicy, throttle: HostThrottle):
    """Fetch ``url`` and follow same-site redirects up to the policy depth.

    Returns ``(exchange, chain)``. ``chain`` lists the URLs requested
    before the returned exchange; a redirect that would leave the site is
    not followed and its target is appended instead.
    """
    target = url_registrable_domain(url)
    chain = []
    ex = http_exchange(url, policy, throttle)
    for _ in range(policy.max_redirects):
        nxt = ex.location
        if nxt is None:
            break
        if urlsplit(nxt).scheme not in ("http", "https") or url_registrable_domain(nxt) != target:
            chain.append(nxt)
            break
        chain.append(ex.url)
        ex = http_exchange(nxt, policy, throttle)
    return ex, tuple(chain)
