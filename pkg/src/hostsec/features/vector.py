"""Assembly of the per-domain 15-indicator feature vector."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, fields

from ..corpus import CorpusError, DomainRecord, PatchTable
from .fingerprint import fingerprint_admin_panel, fingerprint_cms, fingerprint_stack
from .html import parse_html
from .indicators import _mixed, _stripping, extract_header_indicators
from .patch import classify_patch_status, classify_ssl, software_status, ssl_status

log = logging.getLogger(__name__)

# canonical column order, shared by every CSV and code matrix
FEATURE_ORDER = (
    "x_content_type_options", "csp", "x_frame_options", "hsts", "mixed_content",
    "weak_xss_protection", "ssl_stripping_form", "httponly_cookie", "secure_cookie",
    "http_server", "ssl_impl", "ssh", "php", "cms", "admin_panel",
)
BOOLEAN_FIELDS = (
    "csp", "x_frame_options", "x_content_type_options", "hsts", "httponly_cookie",
    "secure_cookie", "weak_xss_protection", "mixed_content", "ssl_stripping_form",
)
ORDINAL_FIELDS = ("http_server", "ssl_impl", "ssh", "php", "cms", "admin_panel")
# +1 when presence signals better security, -1 when it signals worse
DIRECTION = {
    "csp": 1, "x_frame_options": 1, "x_content_type_options": 1, "hsts": 1,
    "httponly_cookie": 1, "secure_cookie": 1, "weak_xss_protection": -1,
    "mixed_content": -1, "ssl_stripping_form": -1,
}
SOFTWARE_FIELDS = ("http_server", "ssl_impl", "ssh", "php", "cms", "admin_panel")


class UndescribableDomain(ValueError):
    """A record without any captured page."""


@dataclass(frozen=True)
class FeatureVector:
    csp: bool = False
    x_frame_options: bool = False
    x_content_type_options: bool = False
    hsts: bool = False
    httponly_cookie: bool = False
    secure_cookie: bool = False
    weak_xss_protection: bool = False
    mixed_content: bool = False
    ssl_stripping_form: bool = False
    http_server: int = 2
    ssl_impl: int = 2
    ssh: int = 2
    php: int = 2
    cms: int = 2
    admin_panel: int = 2

    def __post_init__(self):
        for name in ORDINAL_FIELDS:
            if getattr(self, name) not in (0, 1, 2):
                raise ValueError(f"{name} must be 0, 1 or 2")

    def as_row(self) -> list[int]:
        """Values in ``FEATURE_ORDER``, booleans as 0/1."""
        return [int(getattr(self, name)) for name in FEATURE_ORDER]

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _fingerprints(rec: DomainRecord):
    http, php, ssh = fingerprint_stack(rec.pages, rec.ssh_banner)
    return {
        "http_server": http,
        "ssh": ssh,
        "php": php,
        "cms": fingerprint_cms(rec.pages),
        "admin_panel": fingerprint_admin_panel(rec.admin_probes),
    }


def build_feature_vector(rec: DomainRecord, table: PatchTable) -> FeatureVector:
    """Compute every indicator for one domain.

    Raises
    ------
    UndescribableDomain
        If the record holds no page captures.
    """
    if not rec.pages:
        raise UndescribableDomain(f"undescribable domain {rec.domain}: no pages captured")
    headers = extract_header_indicators(rec.pages)
    mixed = stripping = False
    for page in rec.pages:
        parsed = parse_html(page.body, page.url)
        mixed = mixed or _mixed(page, parsed)
        stripping = stripping or _stripping(page, parsed)
    fps = _fingerprints(rec)
    return FeatureVector(
        **{k: getattr(headers, k) for k in headers.__dataclass_fields__},
        mixed_content=mixed,
        ssl_stripping_form=stripping,
        ssl_impl=classify_ssl(rec.tls_info),
        **{k: classify_patch_status(fp, table) for k, fp in fps.items()},
    )


def software_details(rec: DomainRecord, table: PatchTable) -> dict:
    """Four-level status (absent/hidden/patched/unpatched) per software column."""
    out = {k: software_status(fp, table) for k, fp in _fingerprints(rec).items()}
    out["ssl_impl"] = ssl_status(rec.tls_info)
    return {k: out[k] for k in SOFTWARE_FIELDS}


def extract_corpus(records, table: PatchTable):
    """Vectorize many records; returns ``(rows, details, skipped)``.

    ``rows`` pairs each record with its vector. Records without pages are
    skipped with a warning and listed in ``skipped``.
    """
    rows, details, skipped = [], [], []
    for rec in records:
        try:
            vec = build_feature_vector(rec, table)
        except UndescribableDomain as exc:
            log.warning("%s", exc)
            skipped.append(rec.domain)
            continue
        rows.append((rec, vec))
        details.append((rec, software_details(rec, table)))
    return rows, details, skipped


def write_features_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("domain", "provider_id") + FEATURE_ORDER)
        for rec, vec in rows:
            w.writerow([rec.domain, rec.provider_id] + vec.as_row())


def write_details_csv(details, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("domain", "provider_id") + SOFTWARE_FIELDS)
        for rec, d in details:
            w.writerow([rec.domain, rec.provider_id] + [d[k] for k in SOFTWARE_FIELDS])


def read_features_csv(path):
    """Read a features file; returns ``(domains, provider_ids, codes)``.

    ``codes`` is a list of integer rows in ``FEATURE_ORDER``.
    """
    domains, providers, codes = [], [], []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read features file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:2]) != ("domain", "provider_id") or tuple(header[2:]) != FEATURE_ORDER:
            raise CorpusError(f"features file {path}: unexpected header {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [int(v) for v in row[2:]]
            except ValueError as exc:
                raise CorpusError(f"features file {path} row {row_no}: {exc}") from exc
            if len(vals) != len(FEATURE_ORDER):
                raise CorpusError(f"features file {path} row {row_no}: wrong column count")
            domains.append(row[0])
            providers.append(row[1])
            codes.append(vals)
    return domains, providers, codes


__all__ = [
    "FEATURE_ORDER", "BOOLEAN_FIELDS", "ORDINAL_FIELDS", "DIRECTION", "FeatureVector",
    "UndescribableDomain", "build_feature_vector", "software_details", "extract_corpus",
    "write_features_csv", "write_details_csv", "read_features_csv",
]
