"""Patch-status classification against a patched-version table."""
from __future__ import annotations

from typing import Optional

from ..corpus import PatchTable, TlsInfo
from .fingerprint import SoftwareFingerprint, canonical_version, normalize_version

UNPATCHED, PATCHED, ABSENT = 0, 1, 2

# four-level status used by the landscape report
STATUS_LEVELS = ("absent", "hidden", "patched", "unpatched")


def is_patched_version(product: str, version: str, table: PatchTable) -> bool:
    keep = product == "openssh"
    v = normalize_version(version, keep_package_suffix=keep) or version
    target = canonical_version(v)
    return any(canonical_version(t) == target for t in table.patched_versions(product))


def classify_patch_status(fp: SoftwareFingerprint, table: PatchTable) -> int:
    """0 unpatched, 1 patched or version hidden, 2 software absent."""
    if not fp.present:
        return ABSENT
    if not fp.version:
        return PATCHED
    return PATCHED if is_patched_version(fp.product, fp.version, table) else UNPATCHED


def software_status(fp: SoftwareFingerprint, table: PatchTable) -> str:
    """Like :func:`classify_patch_status` but keeps hidden versions apart."""
    if not fp.present:
        return "absent"
    if not fp.version:
        return "hidden"
    return "patched" if is_patched_version(fp.product, fp.version, table) else "unpatched"


def classify_ssl(tls: Optional[TlsInfo]) -> int:
    """0 when SSLv2/SSLv3 or a known flaw is present, 1 otherwise, 2 without TLS."""
    if tls is None or not tls.has_tls:
        return ABSENT
    if {"SSLv2", "SSLv3"} & set(tls.protocols_supported) or tls.vuln_flags:
        return UNPATCHED
    return PATCHED


def ssl_status(tls: Optional[TlsInfo]) -> str:
    return ("unpatched", "patched", "absent")[classify_ssl(tls)]
