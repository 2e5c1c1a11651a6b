"""Per-domain measurement: page crawl, admin probes, SSH banner, TLS versions."""
from __future__ import annotations

import logging
import socket
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Optional
from urllib.parse import urlsplit

from ..corpus import DomainRecord, PageCapture, PortProbe, registrable_domain, url_registrable_domain
from ..features.html import page_links, parse_html
from .net import ResolveError, follow, resolve
from .policy import ScanPolicy
from .throttle import HostThrottle
from .tls import probe_tls_protocols

log = logging.getLogger(__name__)

SSH_BANNER_MAX = 255


def _canon(url: str) -> str:
    parts = urlsplit(url)
    return parts._replace(fragment="", path=parts.path or "/").geturl()


def _capture(ex, chain) -> Optional[PageCapture]:
    if not 100 <= ex.status <= 599:
        return None
    return PageCapture(ex.url, ex.tls, ex.status, ex.headers, ex.body, chain)


def fetch_domain_pages(domain: str, policy: ScanPolicy, throttle: HostThrottle = None,
                       errors: list = None) -> list[PageCapture]:
    """Breadth-first crawl from the home page, staying on the domain's site.

    Each level of the traversal is visited in lexicographic URL order. A
    page that times out or fails is skipped and noted in ``errors``. An
    unresolvable domain gives an empty list and a ``dns`` error tag.
    """
    throttle = throttle or HostThrottle(policy.delay_s)
    errors = errors if errors is not None else []
    site = registrable_domain(domain)
    try:
        resolve(domain, policy)
    except ResolveError as exc:
        errors.append(f"dns: {exc}")
        return []

    pages: list[PageCapture] = []
    seen = set()
    level = [f"http://{domain}/"]
    home = True
    while level and len(pages) < policy.page_limit:
        nxt = set()
        for url in sorted(level):
            if len(pages) >= policy.page_limit:
                break
            seen.add(url)
            try:
                ex, chain = follow(url, policy, throttle)
            except ResolveError as exc:
                errors.append(f"dns: {exc}")
                continue
            except TimeoutError:
                errors.append(f"timeout: {url}")
                continue
            except OSError as exc:
                if home:
                    # no plain HTTP listener; the site may be HTTPS only
                    try:
                        ex, chain = follow(f"https://{domain}/", policy, throttle)
                    except OSError as exc2:
                        errors.append(f"fetch: {url}: {exc}; https: {exc2}")
                        home = False
                        continue
                else:
                    errors.append(f"fetch: {url}: {exc}")
                    continue
            home = False
            final = _canon(ex.url)
            if final != url and final in seen:
                continue
            seen.add(final)
            cap = _capture(ex, chain)
            if cap is None:
                continue
            pages.append(cap)
            for link in page_links(parse_html(ex.body, ex.url)):
                link = _canon(link)
                if link not in seen and url_registrable_domain(link) == site:
                    nxt.add(link)
        level = sorted(nxt - seen)
    return pages


def _probe(url: str, port: int, path, policy, throttle, retry_url=None) -> PortProbe:
    try:
        ex, chain = follow(url, policy, throttle)
    except ConnectionRefusedError:
        return PortProbe(port, "closed", path=path)
    except TimeoutError:
        return PortProbe(port, "timeout", path=path)
    except ConnectionError:
        # wrong protocol for the port; one retry with the other scheme
        if retry_url:
            return _probe(retry_url, port, path, policy, throttle)
        return PortProbe(port, "closed", path=path)
    except OSError:
        return PortProbe(port, "closed", path=path)
    return PortProbe(port, "response", ex.headers, ex.body[:policy.excerpt_bytes], chain, path)


def probe_admin_ports(domain: str, policy: ScanPolicy, throttle: HostThrottle = None,
                      errors: list = None) -> list[PortProbe]:
    """One probe per admin port plus each shorthand path on the web ports.

    Ports listed in ``tls_admin_ports`` are tried over TLS first. A reply
    in the wrong protocol triggers a single retry with the other scheme.
    """
    throttle = throttle or HostThrottle(policy.delay_s)
    try:
        resolve(domain, policy)
    except ResolveError as exc:
        if errors is not None:
            errors.append(f"dns: {exc}")
        return []
    out = []
    for port in policy.admin_ports:
        first, other = ("https", "http") if port in policy.tls_admin_ports else ("http", "https")
        out.append(_probe(f"{first}://{domain}:{port}/", port, None, policy, throttle,
                          retry_url=f"{other}://{domain}:{port}/"))
    for path in policy.admin_paths:
        path = path if path.startswith("/") else "/" + path
        for scheme, port in (("http", policy.http_port), ("https", policy.https_port)):
            out.append(_probe(f"{scheme}://{domain}{path}", port, path, policy, throttle))
    return out


def grab_ssh_banner(domain: str, policy: ScanPolicy, throttle: HostThrottle = None) -> Optional[str]:
    """First line the SSH port sends, capped at 255 bytes; no authentication."""
    throttle = throttle or HostThrottle(policy.delay_s)
    try:
        addr = resolve(domain, policy)
    except ResolveError:
        return None
    buf = b""
    with throttle.slot(addr):
        try:
            with socket.create_connection((addr, policy.ssh_port), timeout=policy.timeout_s) as sock:
                while len(buf) < SSH_BANNER_MAX and b"\n" not in buf:
                    chunk = sock.recv(SSH_BANNER_MAX - len(buf))
                    if not chunk:
                        break
                    buf += chunk
        except OSError:
            if not buf:
                return None
    line = buf.split(b"\n", 1)[0][:SSH_BANNER_MAX].rstrip(b"\r")
    return line.decode("utf-8", errors="replace") or None


@dataclass(frozen=True)
class ScanResult:
    record: DomainRecord
    errors: tuple = ()


def scan_domain(domain: str, provider_id: str, policy: ScanPolicy,
                throttle: HostThrottle = None) -> ScanResult:
    throttle = throttle or HostThrottle(policy.delay_s)
    errors: list = []
    pages = fetch_domain_pages(domain, policy, throttle, errors)
    if any(e.startswith("dns:") for e in errors) and not pages:
        return ScanResult(DomainRecord(domain, provider_id), tuple(errors))
    probes = probe_admin_ports(domain, policy, throttle, errors)
    banner = grab_ssh_banner(domain, policy, throttle)
    tls = probe_tls_protocols(domain, policy, throttle, errors=errors) if policy.probe_tls else None
    rec = DomainRecord(domain, provider_id, tuple(pages), tuple(probes), banner, tls)
    return ScanResult(rec, tuple(errors))


def scan_many(targets, policy: ScanPolicy, collector=None, throttle: HostThrottle = None):
    """Scan ``(domain, provider_id)`` pairs concurrently.

    Up to ``max_parallel_hosts`` domains run at once; one shared throttle
    keeps each server to a single connection at a time. ``collector`` is
    called from the calling thread as results arrive. Returns results in
    input order.
    """
    targets = list(targets)
    throttle = throttle or HostThrottle(policy.delay_s)
    results = [None] * len(targets)
    with ThreadPoolExecutor(max_workers=policy.max_parallel_hosts) as pool:
        futures = {pool.submit(scan_domain, d, pid, policy, throttle): i for i, (d, pid) in enumerate(targets)}
        for fut in as_completed(futures):
            i = futures[fut]
            try:
                res = fut.result()
            except Exception as exc:  # keep the batch alive
                d, pid = targets[i]
                log.error("scan of %s failed: %s", d, exc)
                res = ScanResult(DomainRecord(d, pid), (f"crash: {exc}",))
            results[i] = res
            if collector is not None:
                collector(res)
    return results


def read_targets(path):
    """``domain,provider_id`` lines; blank lines and ``#`` comments skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.replace("\t", ",").split(",")]
            if len(parts) != 2 or not all(parts):
                raise ValueError(f"{path}:{no}: expected domain,provider_id")
            out.append((parts[0].lower(), parts[1]))
    return out
