"""On-disk data formats: response corpora, patch tables and provider tables.

The corpus is JSON Lines, one domain per line::

    {"domain": "example.com", "provider_id": "P1",
     "pages": [{"url": "https://example.com/", "loaded_over_tls": true,
                "status": 200, "response_headers": [["Server", "nginx"]],
                "body": "<html>...", "redirect_chain": []}],
     "admin_probes": [{"port": 2083, "outcome": "response",
                       "response_headers": [["Server", "cpsrvd"]],
                       "body_excerpt": "...", "redirect_chain": [], "path": null}],
     "ssh_banner": "SSH-2.0-OpenSSH_7.2p2",
     "tls_info": {"has_tls": true, "protocols_supported": ["TLSv1.2"],
                  "vuln_flags": []}}

Header lists keep their order and duplicates.
"""
from __future__ import annotations

import csv
import ipaddress
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional
from urllib.parse import urlsplit

log = logging.getLogger(__name__)

DEFAULT_PAGE_LIMIT = 20

PROTOCOLS = ("SSLv2", "SSLv3", "TLSv1.0", "TLSv1.1", "TLSv1.2", "TLSv1.3")
VULN_FLAGS = ("heartbleed", "ccs_injection", "compression")
PROBE_OUTCOMES = ("closed", "timeout", "response")
PRODUCTS = (
    "apache", "nginx", "iis", "openssh", "php", "wordpress", "joomla", "drupal",
    "cpanel", "plesk", "directadmin", "virtualmin",
)
PROVIDER_COLUMNS = ("provider_id", "ip_count", "domain_count", "phishing_count", "malware_count")

Headers = tuple  # tuple of (name, value) pairs


class CorpusError(ValueError):
    """Fatal problem with an input file."""


def header_values(headers: Iterable, name: str) -> list[str]:
    """All values of header ``name`` (case-insensitive), in order."""
    lname = name.lower()
    return [v for n, v in headers if n.lower() == lname]


def header_value(headers: Iterable, name: str) -> Optional[str]:
    """First value of header ``name`` or ``None``."""
    values = header_values(headers, name)
    return values[0] if values else None


@lru_cache(maxsize=1)
def _extractor():
    import tldextract

    # bundled suffix snapshot only; never fetch
    return tldextract.TLDExtract(suffix_list_urls=(), cache_dir=None)


@lru_cache(maxsize=65536)
def registrable_domain(host: str) -> str:
    """Registrable domain of a hostname (``www.example.co.uk`` -> ``example.co.uk``).

    Hosts under suffixes missing from the public suffix list (``.test``,
    ``.local``) fall back to their last two labels; IP literals and
    single-label hosts are returned unchanged.
    """
    host = host.strip().strip(".").lower()
    if not host:
        return ""
    try:
        ipaddress.ip_address(host.strip("[]"))
        return host
    except ValueError:
        pass
    ext = _extractor()(host)
    if hasattr(ext, "top_domain_under_public_suffix"):
        reg = ext.top_domain_under_public_suffix
    else:  # tldextract < 5.3
        reg = ext.registered_domain
    if reg:
        return reg
    labels = host.split(".")
    return ".".join(labels[-2:])


def url_registrable_domain(url: str) -> str:
    return registrable_domain(urlsplit(url).hostname or "")


@dataclass(frozen=True)
class PageCapture:
    url: str
    loaded_over_tls: bool
    status: int
    response_headers: Headers = ()
    body: str = ""
    redirect_chain: tuple = ()


@dataclass(frozen=True)
class PortProbe:
    port: int
    outcome: str
    response_headers: Optional[Headers] = None
    body_excerpt: Optional[str] = None
    redirect_chain: tuple = ()
    path: Optional[str] = None

    def __post_init__(self):
        if self.outcome not in PROBE_OUTCOMES:
            raise ValueError(f"unknown probe outcome {self.outcome!r}")
        if (self.response_headers is not None) != (self.outcome == "response"):
            raise ValueError("response_headers must be present iff outcome is 'response'")


@dataclass(frozen=True)
class TlsInfo:
    has_tls: bool
    protocols_supported: frozenset = frozenset()
    vuln_flags: frozenset = frozenset()

    def __post_init__(self):
        bad = set(self.protocols_supported) - set(PROTOCOLS)
        if bad:
            raise ValueError(f"unknown protocols {sorted(bad)}")
        bad = set(self.vuln_flags) - set(VULN_FLAGS)
        if bad:
            raise ValueError(f"unknown vulnerability flags {sorted(bad)}")
        if self.vuln_flags and not self.has_tls:
            raise ValueError("vuln_flags set on a domain without TLS")


@dataclass(frozen=True)
class DomainRecord:
    domain: str
    provider_id: str
    pages: tuple = ()
    admin_probes: tuple = ()
    ssh_banner: Optional[str] = None
    tls_info: Optional[TlsInfo] = None

    def validate(self, page_limit: int = DEFAULT_PAGE_LIMIT) -> None:
        """Raise ``ValueError`` if the record breaks a corpus invariant."""
        if not self.domain:
            raise ValueError("empty domain")
        if len(self.pages) > page_limit:
            raise ValueError(f"{len(self.pages)} pages exceeds page limit {page_limit}")
        target = registrable_domain(self.domain)
        for page in self.pages:
            if url_registrable_domain(page.url) != target:
                raise ValueError(f"page URL {page.url} is outside registrable domain {target}")
            if not 100 <= page.status <= 599:
                raise ValueError(f"page {page.url} has invalid status {page.status}")


@dataclass(frozen=True)
class LineError:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


# -- serialization -----------------------------------------------------------

def _headers_in(raw, what) -> Headers:
    if not isinstance(raw, list):
        raise ValueError(f"{what} must be a list of [name, value] pairs")
    out = []
    for item in raw:
        if (not isinstance(item, (list, tuple)) or len(item) != 2
                or not all(isinstance(s, str) for s in item)):
            raise ValueError(f"{what} entry {item!r} is not a [name, value] pair")
        out.append((item[0], item[1]))
    return tuple(out)


def _str_list(raw, what) -> tuple:
    if not isinstance(raw, list) or not all(isinstance(s, str) for s in raw):
        raise ValueError(f"{what} must be a list of strings")
    return tuple(raw)


def _require(obj: dict, key: str, types, what: str):
    if key not in obj:
        raise ValueError(f"{what} is missing field {key!r}")
    value = obj[key]
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ValueError(f"{what}.{key} has wrong type")
    if not isinstance(value, types):
        raise ValueError(f"{what}.{key} has wrong type {type(value).__name__}")
    return value


def page_from_dict(obj: dict) -> PageCapture:
    if not isinstance(obj, dict):
        raise ValueError("page entry must be an object")
    return PageCapture(
        url=_require(obj, "url", str, "page"),
        loaded_over_tls=_require(obj, "loaded_over_tls", bool, "page"),
        status=_require(obj, "status", int, "page"),
        response_headers=_headers_in(obj.get("response_headers", []), "page.response_headers"),
        body=_require(obj, "body", str, "page") if "body" in obj else "",
        redirect_chain=_str_list(obj.get("redirect_chain", []), "page.redirect_chain"),
    )


def probe_from_dict(obj: dict) -> PortProbe:
    if not isinstance(obj, dict):
        raise ValueError("probe entry must be an object")
    headers = obj.get("response_headers")
    return PortProbe(
        port=_require(obj, "port", int, "probe"),
        outcome=_require(obj, "outcome", str, "probe"),
        response_headers=None if headers is None else _headers_in(headers, "probe.response_headers"),
        body_excerpt=obj.get("body_excerpt"),
        redirect_chain=_str_list(obj.get("redirect_chain", []), "probe.redirect_chain"),
        path=obj.get("path"),
    )


def tls_from_dict(obj) -> Optional[TlsInfo]:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ValueError("tls_info must be an object or null")
    return TlsInfo(
        has_tls=_require(obj, "has_tls", bool, "tls_info"),
        protocols_supported=frozenset(_str_list(obj.get("protocols_supported", []), "tls_info.protocols_supported")),
        vuln_flags=frozenset(_str_list(obj.get("vuln_flags", []), "tls_info.vuln_flags")),
    )


def record_from_dict(obj: dict) -> DomainRecord:
    if not isinstance(obj, dict):
        raise ValueError("record must be a JSON object")
    pages = obj.get("pages", [])
    probes = obj.get("admin_probes", [])
    if not isinstance(pages, list) or not isinstance(probes, list):
        raise ValueError("pages and admin_probes must be lists")
    banner = obj.get("ssh_banner")
    if banner is not None and not isinstance(banner, str):
        raise ValueError("ssh_banner must be a string or null")
    return DomainRecord(
        domain=_require(obj, "domain", str, "record"),
        provider_id=str(_require(obj, "provider_id", (str, int), "record")),
        pages=tuple(page_from_dict(p) for p in pages),
        admin_probes=tuple(probe_from_dict(p) for p in probes),
        ssh_banner=banner,
        tls_info=tls_from_dict(obj.get("tls_info")),
    )


def record_to_dict(rec: DomainRecord) -> dict:
    tls = None
    if rec.tls_info is not None:
        tls = {
            "has_tls": rec.tls_info.has_tls,
            "protocols_supported": [p for p in PROTOCOLS if p in rec.tls_info.protocols_supported],
            "vuln_flags": [f for f in VULN_FLAGS if f in rec.tls_info.vuln_flags],
        }
    return {
        "domain": rec.domain,
        "provider_id": rec.provider_id,
        "pages": [
            {
                "url": p.url,
                "loaded_over_tls": p.loaded_over_tls,
                "status": p.status,
                "response_headers": [list(h) for h in p.response_headers],
                "body": p.body,
                "redirect_chain": list(p.redirect_chain),
            }
            for p in rec.pages
        ],
        "admin_probes": [
            {
                "port": q.port,
                "outcome": q.outcome,
                "response_headers": None if q.response_headers is None else [list(h) for h in q.response_headers],
                "body_excerpt": q.body_excerpt,
                "redirect_chain": list(q.redirect_chain),
                "path": q.path,
            }
            for q in rec.admin_probes
        ],
        "ssh_banner": rec.ssh_banner,
        "tls_info": tls,
    }


def dumps_record(rec: DomainRecord) -> str:
    return json.dumps(record_to_dict(rec), ensure_ascii=False, separators=(",", ":"))


def dump_corpus(records: Iterable[DomainRecord], path) -> int:
    """Write records as JSON Lines; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_record(rec))
            fh.write("\n")
            n += 1
    return n


def iter_corpus(path, page_limit: int = DEFAULT_PAGE_LIMIT):
    """Yield ``(line_no, record_or_None, error_or_None)`` for each non-blank line."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = record_from_dict(json.loads(line))
                rec.validate(page_limit)
            except (ValueError, TypeError) as exc:
                yield line_no, None, LineError(line_no, str(exc))
                continue
            yield line_no, rec, None


def load_corpus(path, page_limit: int = DEFAULT_PAGE_LIMIT):
    """Load a JSON Lines corpus.

    Returns
    -------
    records : list of DomainRecord
        Every line that parsed and validated.
    errors : list of LineError
        One entry per rejected line, with its 1-based line number.
    """
    records, errors = [], []
    for _, rec, err in iter_corpus(path, page_limit):
        if err is not None:
            log.warning("corpus %s %s", path, err)
            errors.append(err)
        else:
            records.append(rec)
    return records, errors


# -- patch table -------------------------------------------------------------

@dataclass(frozen=True)
class PatchTable:
    entries: dict = field(default_factory=dict)

    def patched_versions(self, product: str) -> frozenset:
        return self.entries.get(product, frozenset())

    def pairs(self):
        return sorted((p, v) for p, vs in self.entries.items() for v in vs)


def _open_csv(path, what):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {what} {path}: {exc}") from exc


def load_patch_table(path) -> PatchTable:
    """Read a ``software,version`` CSV (header row required)."""
    entries: dict[str, set] = {}
    with _open_csv(path, "patch table") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return PatchTable({})
        if [h.strip().lower() for h in header] != ["software", "version"]:
            raise CorpusError(f"patch table {path}: header must be 'software,version', got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise CorpusError(f"patch table {path} row {row_no}: expected 2 columns, got {row}")
            product, version = row[0].strip().lower(), row[1].strip()
            if product not in PRODUCTS:
                raise CorpusError(f"patch table {path} row {row_no}: unknown product {row[0]!r}")
            if not version:
                raise CorpusError(f"patch table {path} row {row_no}: empty version")
            entries.setdefault(product, set()).add(version)
    return PatchTable({k: frozenset(v) for k, v in entries.items()})


def default_patch_table_path() -> Path:
    return Path(__file__).parent / "data" / "patch_table.csv"


def default_patch_table() -> PatchTable:
    """The patched-version list shipped with the package (November 2016)."""
    return load_patch_table(default_patch_table_path())


# -- provider table ----------------------------------------------------------

@dataclass(frozen=True)
class ProviderRow:
    provider_id: str
    ip_count: int
    domain_count: int
    phishing_count: int
    malware_count: int


@dataclass(frozen=True)
class ProviderTable:
    rows: dict
    flagged: tuple = ()

    def __getitem__(self, provider_id):
        return self.rows[provider_id]

    def __contains__(self, provider_id):
        return provider_id in self.rows

    def __len__(self):
        return len(self.rows)

    def ids(self):
        return list(self.rows)


def _count(value, col, row_no, path):
    try:
        v = int(value)
    except ValueError:
        raise CorpusError(f"provider table {path} row {row_no}: {col} {value!r} is not an integer") from None
    if v < 0:
        raise CorpusError(f"provider table {path} row {row_no}: negative {col} {v}")
    return v


def load_provider_table(path) -> ProviderTable:
    """Read the provider CSV, keyed by provider_id.

    Rows with a zero ``ip_count`` or ``domain_count`` are kept and listed in
    ``flagged``; downstream log transforms guard them with ``max(x, 1)``.
    """
    rows: dict[str, ProviderRow] = {}
    flagged = []
    with _open_csv(path, "provider table") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != list(PROVIDER_COLUMNS):
            raise CorpusError(f"provider table {path}: header must be {','.join(PROVIDER_COLUMNS)}")
        for row_no, row in enumerate(reader, start=2):
            pid = (row["provider_id"] or "").strip()
            if not pid:
                raise CorpusError(f"provider table {path} row {row_no}: empty provider_id")
            if pid in rows:
                raise CorpusError(f"provider table {path} row {row_no}: duplicate provider_id {pid}")
            counts = {c: _count(row[c], c, row_no, path) for c in PROVIDER_COLUMNS[1:]}
            rows[pid] = ProviderRow(pid, **counts)
            if counts["ip_count"] == 0 or counts["domain_count"] == 0:
                log.warning("provider %s has a zero size count", pid)
                flagged.append(pid)
    return ProviderTable(rows, tuple(flagged))


def dump_provider_table(table: ProviderTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROVIDER_COLUMNS)
        for r in table.rows.values():
            w.writerow([r.provider_id, r.ip_count, r.domain_count, r.phishing_count, r.malware_count])
