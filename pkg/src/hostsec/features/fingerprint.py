"""Software fingerprinting for the web stack, CMSes and admin panels."""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

from ..corpus import header_value, header_values
from .html import parse_html

log = logging.getLogger(__name__)

EVIDENCE = ("basic_scan", "comprehensive_scan", "header", "banner", "probe")


@dataclass(frozen=True)
class SoftwareFingerprint:
    product: Optional[str] = None
    version: Optional[str] = None
    evidence: Optional[str] = None

    def __post_init__(self):
        if self.version is not None and self.product is None:
            raise ValueError("version without product")
        if self.evidence is not None and self.evidence not in EVIDENCE:
            raise ValueError(f"unknown evidence {self.evidence!r}")

    @property
    def present(self) -> bool:
        return self.product is not None


ABSENT = SoftwareFingerprint()

_VERSION_START = re.compile(r"^\d")
_BUILD_CUT = re.compile(r"[\s(]")
_PKG_CUT = re.compile(r"[-+~]")


def normalize_version(raw: Optional[str], keep_package_suffix: bool = False) -> Optional[str]:
    """Reduce a raw version token to its upstream release string.

    Build suffixes after the first space or parenthesis are dropped, and
    unless ``keep_package_suffix`` is set so is a distribution suffix
    introduced by ``-``, ``+`` or ``~`` (``5.5.9-1ubuntu4.20`` -> ``5.5.9``).
    OpenSSH portable suffixes such as ``p2`` are part of the version and kept.
    """
    if not raw:
        return None
    v = _BUILD_CUT.split(raw.strip(), 1)[0]
    if not keep_package_suffix:
        v = _PKG_CUT.split(v, 1)[0]
    v = v.rstrip(".,;")
    if not v or not _VERSION_START.match(v):
        return None
    return v


def canonical_version(v: str) -> str:
    """Drop trailing zero components so ``10.0`` equals ``10``."""
    parts = v.split(".")
    while len(parts) > 1 and parts[-1] == "0":
        parts.pop()
    return ".".join(parts)


# -- HTTP server / PHP / SSH --------------------------------------------------

_SERVER_PRODUCTS = (
    (re.compile(r"^apache(?:/(\S+))?", re.I), "apache"),
    (re.compile(r"^nginx(?:/(\S+))?", re.I), "nginx"),
    (re.compile(r"^microsoft-iis(?:/(\S+))?", re.I), "iis"),
)
_PHP_TOKEN = re.compile(r"\bphp(?:/(\S+))?", re.I)
_OPENSSH = re.compile(r"^SSH-[\d.]+-OpenSSH(?:_(\S+))?", re.I)


def parse_server_header(value: str) -> SoftwareFingerprint:
    value = value.strip()
    for rx, product in _SERVER_PRODUCTS:
        m = rx.match(value)
        if m:
            return SoftwareFingerprint(product, normalize_version(m.group(1)), "header")
    return ABSENT


def parse_php_token(value: str) -> SoftwareFingerprint:
    m = _PHP_TOKEN.search(value)
    if not m:
        return ABSENT
    return SoftwareFingerprint("php", normalize_version(m.group(1)), "header")


def parse_ssh_banner(banner: Optional[str]) -> SoftwareFingerprint:
    if not banner:
        return ABSENT
    m = _OPENSSH.match(banner.strip())
    if not m:
        return ABSENT
    return SoftwareFingerprint("openssh", normalize_version(m.group(1), keep_package_suffix=True), "banner")


def fingerprint_stack(pages, ssh_banner=None):
    """Fingerprint the HTTP server, PHP and SSH server.

    Returns ``(http, php, ssh)`` fingerprints. The first page that sends a
    ``Server`` header decides the HTTP server; servers other than Apache,
    nginx and IIS are reported absent with a warning. PHP comes from
    ``X-Powered-By`` and falls back to a ``PHP/x`` token in ``Server``.
    """
    http = ABSENT
    for page in pages:
        server = header_value(page.response_headers, "Server")
        if server is None:
            continue
        http = parse_server_header(server)
        if not http.present and server.strip():
            log.warning("unrecognized HTTP server %r on %s; scored as absent", server, page.url)
        break

    php = ABSENT
    for page in pages:
        for value in header_values(page.response_headers, "X-Powered-By"):
            fp = parse_php_token(value)
            if fp.present:
                php = fp
                break
        if php.present:
            break
    if not php.present:
        for page in pages:
            for value in header_values(page.response_headers, "Server"):
                fp = parse_php_token(value)
                if fp.present:
                    php = fp
                    break
            if php.present:
                break

    return http, php, parse_ssh_banner(ssh_banner)


# -- CMS ---------------------------------------------------------------------

_GENERATORS = (
    (re.compile(r"\bwordpress\b\s*(\d+(?:\.\d+)+)?", re.I), "wordpress"),
    (re.compile(r"\bjoomla!?\s*(\d+(?:\.\d+)+)?", re.I), "joomla"),
    (re.compile(r"\bdrupal\b\s*(\d+(?:\.\d+)+)?", re.I), "drupal"),
)


@dataclass(frozen=True)
class SignatureRule:
    product: str
    where: str
    pattern: re.Pattern
    header: Optional[str] = None

    def matches(self, page) -> bool:
        if self.where == "body":
            return bool(self.pattern.search(page.body or ""))
        return any(self.pattern.search(v) for v in header_values(page.response_headers, self.header))


def signatures_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "cms_signatures.json"


@lru_cache(maxsize=None)
def load_signatures(path=None):
    """Load the comprehensive-scan rule file; returns ``(version, rules)``."""
    with open(path or signatures_path(), encoding="utf-8") as fh:
        doc = json.load(fh)
    rules = []
    for r in doc["rules"]:
        if r["where"] not in ("body", "header"):
            raise ValueError(f"bad rule location {r['where']!r}")
        rules.append(SignatureRule(r["product"], r["where"], re.compile(r["pattern"], re.I), r.get("header")))
    return doc["version"], tuple(rules)


def parse_generator(content: str) -> SoftwareFingerprint:
    """Read a ``<meta name="generator">`` value.

    Only dotted versions count; a bare major number such as ``Drupal 7``
    names a branch, not a release, and is treated as hidden.
    """
    for rx, product in _GENERATORS:
        m = rx.search(content or "")
        if m:
            return SoftwareFingerprint(product, m.group(1), "basic_scan")
    return ABSENT


def fingerprint_cms(pages, rules=None) -> SoftwareFingerprint:
    """Two-phase CMS detection: generator tag first, signature rules second."""
    basic = []
    for page in pages:
        for content in parse_html(page.body, page.url).generators:
            fp = parse_generator(content)
            if fp.present:
                basic.append(fp)
    if basic:
        with_version = [fp for fp in basic if fp.version]
        return with_version[0] if with_version else basic[0]

    if rules is None:
        rules = load_signatures()[1]
    for page in pages:
        for rule in rules:
            if rule.matches(page):
                return SoftwareFingerprint(rule.product, None, "comprehensive_scan")
    return ABSENT


# -- admin panels ------------------------------------------------------------

_PANEL_PORTS = {2082: "cpanel", 2083: "cpanel", 2086: "cpanel", 2087: "cpanel",
                2222: "directadmin", 8443: "plesk", 8880: "plesk", 10000: "virtualmin"}

_PANEL_SERVER = (
    (re.compile(r"^cpsrvd(?:/(\S+))?", re.I), "cpanel"),
    (re.compile(r"^directadmin(?:\s+daemon)?(?:[/\s]+v?(\d\S*))?", re.I), "directadmin"),
    (re.compile(r"^miniserv(?:/(\S+))?", re.I), "virtualmin"),
)
_PANEL_BODY = (
    (re.compile(r"\bplesk(?:\s+onyx)?\s+v?(\d+(?:\.\d+)+)", re.I), "plesk"),
    (re.compile(r"\bvirtualmin\b", re.I), "virtualmin"),
    (re.compile(r"\bwebmin\b", re.I), "virtualmin"),
    (re.compile(r"\bdirectadmin\b", re.I), "directadmin"),
    (re.compile(r"\bplesk\b", re.I), "plesk"),
    (re.compile(r"\bcpanel\b|\bwhm\b|\bcpsess", re.I), "cpanel"),
)
_PANEL_REDIRECT = (
    (re.compile(r":208[23](?:/|$)|/cpanel\b", re.I), "cpanel"),
    (re.compile(r":208[67](?:/|$)|/whm\b", re.I), "cpanel"),
    (re.compile(r":2222(?:/|$)", re.I), "directadmin"),
    (re.compile(r":8443(?:/|$)", re.I), "plesk"),
    (re.compile(r":10000(?:/|$)", re.I), "virtualmin"),
)


def _probe_fingerprint(probe) -> SoftwareFingerprint:
    headers = probe.response_headers or ()
    for value in header_values(headers, "Server"):
        for rx, product in _PANEL_SERVER:
            m = rx.match(value.strip())
            if m:
                version = normalize_version(m.group(1))
                return SoftwareFingerprint(product, version, "header" if version else "probe")
    for value in header_values(headers, "X-Powered-By"):
        if re.search(r"\bplesk", value, re.I):
            return SoftwareFingerprint("plesk", None, "probe")
    body = probe.body_excerpt or ""
    for rx, product in _PANEL_BODY:
        m = rx.search(body)
        if m:
            version = normalize_version(m.group(1)) if m.groups() else None
            return SoftwareFingerprint(product, version, "probe")
    for url in probe.redirect_chain:
        for rx, product in _PANEL_REDIRECT:
            if rx.search(url):
                return SoftwareFingerprint(product, None, "probe")
    return ABSENT


def fingerprint_admin_panel(probes) -> SoftwareFingerprint:
    """Identify cPanel, Plesk, DirectAdmin or Virtualmin from probe responses.

    A response only counts when a header, body or redirect marker names the
    panel; an answering port by itself is not evidence. A probe that exposes
    a version wins over one that only shows presence.
    """
    found = []
    for probe in probes:
        if probe.outcome != "response":
            continue
        fp = _probe_fingerprint(probe)
        if fp.present:
            found.append(fp)
    if not found:
        return ABSENT
    with_version = [fp for fp in found if fp.version]
    return with_version[0] if with_version else found[0]
