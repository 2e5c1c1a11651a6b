"""Header and page-content security indicators."""
from __future__ import annotations

from dataclasses import dataclass

from ..corpus import PageCapture, header_values
from .html import ParsedPage, parse_html, resolved_scheme


@dataclass(frozen=True)
class HeaderIndicators:
    csp: bool = False
    x_frame_options: bool = False
    x_content_type_options: bool = False
    hsts: bool = False
    httponly_cookie: bool = False
    secure_cookie: bool = False
    weak_xss_protection: bool = False


def cookie_attributes(set_cookie: str) -> set[str]:
    """Lower-cased attribute names of one Set-Cookie value (name=value excluded)."""
    parts = set_cookie.split(";")[1:]
    return {p.split("=", 1)[0].strip().lower() for p in parts if p.strip()}


def xss_protection_disabled(value: str) -> bool:
    """True for an X-XSS-Protection value that switches the filter off (``0``)."""
    return value.strip().split(";", 1)[0].strip() == "0"


def extract_header_indicators(pages) -> HeaderIndicators:
    """Domain-level header flags, each true if any page carries it."""
    flags = dict.fromkeys(HeaderIndicators.__dataclass_fields__, False)
    for page in pages:
        h = page.response_headers
        flags["csp"] |= bool(header_values(h, "Content-Security-Policy"))
        flags["x_frame_options"] |= bool(header_values(h, "X-Frame-Options"))
        flags["x_content_type_options"] |= bool(header_values(h, "X-Content-Type-Options"))
        flags["hsts"] |= bool(header_values(h, "Strict-Transport-Security"))
        for cookie in header_values(h, "Set-Cookie"):
            attrs = cookie_attributes(cookie)
            flags["httponly_cookie"] |= "httponly" in attrs
            flags["secure_cookie"] |= "secure" in attrs
        flags["weak_xss_protection"] |= any(
            xss_protection_disabled(v) for v in header_values(h, "X-XSS-Protection"))
    return HeaderIndicators(**flags)


def _mixed(page: PageCapture, parsed: ParsedPage) -> bool:
    if not page.loaded_over_tls:
        return False
    refs = parsed.scripts + parsed.stylesheets + parsed.images
    return any(resolved_scheme(parsed, ref) == "http" for ref in refs)


def _stripping(page: PageCapture, parsed: ParsedPage) -> bool:
    if page.loaded_over_tls:
        return False
    return any(resolved_scheme(parsed, action) == "https" for action in parsed.form_actions)


def detect_mixed_content(page: PageCapture) -> bool:
    """TLS page that pulls a script, stylesheet or image over plain http."""
    return _mixed(page, parse_html(page.body, page.url))


def detect_ssl_stripping_form(page: PageCapture) -> bool:
    """Plain-http page with a form posting to an https endpoint."""
    return _stripping(page, parse_html(page.body, page.url))
