"""Provider-level aggregation and the descriptive landscape report."""
from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..corpus import CorpusError, ProviderTable
from ..features.vector import BOOLEAN_FIELDS, DIRECTION, SOFTWARE_FIELDS, FEATURE_ORDER

log = logging.getLogger(__name__)

BIN_EDGES = tuple(range(0, 101, 10))
SUMMARY_LABELS = {
    "http_server": "HTTP server",
    "ssl_impl": "SSL",
    "admin_panel": "Admin panel",
    "php": "PHP",
    "ssh": "OpenSSH",
    "cms": "CMS",
    "httponly_cookie": "HttpOnly cookie",
    "x_frame_options": "X-Frame-Options",
    "x_content_type_options": "X-Content-Type-Options",
    "mixed_content": "Mixed-content inclusions",
    "secure_cookie": "Secure cookie",
    "csp": "Content-Security-Policy",
    "hsts": "HTTP Strict-Transport-Security",
    "ssl_stripping_form": "SSL-stripping vulnerable form",
    "weak_xss_protection": "Weak browser XSS protection",
}


def log10_size(count) -> float:
    """Base-10 log with counts below one treated as one."""
    return math.log10(max(count, 1))


@dataclass(frozen=True)
class ProviderAggregate:
    """Per-provider summary.

    ``feature_prevalence`` follows ``FEATURE_ORDER``. Boolean columns
    give the share of domains with the indicator; software columns give the
    share of domains running an unpatched version (code 0).
    """

    provider_id: str
    domain_count_sampled: int
    feature_prevalence: tuple
    mean_scores: tuple
    log10_domains: float
    log10_ips: float
    phishing_count: int
    malware_count: int
    feature_counts: tuple = ()
    software_status: dict = field(default_factory=dict)  # column -> Counter of 4-level status
    ordinal_counts: dict = field(default_factory=dict)  # column -> (n unpatched, n patched/hidden, n absent)


def aggregate_providers(provider_ids, codes, table: ProviderTable, scores=None,
                        details=None, statistic: str = "mean"):
    """Group domain rows by provider.

    Parameters
    ----------
    provider_ids : sequence of str
    codes : (n, 15) array in ``FEATURE_ORDER``
    scores : (n, k) array, optional
    details : sequence of dicts mapping software columns to 4-level status
    statistic : {"mean", "median"}
        How domain scores are combined per provider.

    Raises
    ------
    CorpusError
        Listing every provider id that is missing from ``table``.
    """
    ids = np.asarray(provider_ids)
    codes = np.asarray(codes)
    orphans = sorted(set(ids.tolist()) - set(table.rows))
    if orphans:
        raise CorpusError("feature rows reference unknown providers: " + ", ".join(orphans))
    if statistic not in ("mean", "median"):
        raise ValueError(f"unknown statistic {statistic!r}")
    ind = np.column_stack([
        (codes[:, j] == 0).astype(int) if c in SOFTWARE_FIELDS else codes[:, j].astype(int)
        for j, c in enumerate(FEATURE_ORDER)
    ]) if codes.size else np.zeros((0, len(FEATURE_ORDER)), int)
    groups = defaultdict(list)
    for i, pid in enumerate(ids.tolist()):
        groups[pid].append(i)
    out = []
    for pid in sorted(groups):
        rows = np.asarray(groups[pid])
        cnt = ind[rows].sum(axis=0)
        m = len(rows)
        if scores is not None:
            S = np.asarray(scores)[rows]
            ms = tuple(float(v) for v in (S.mean(axis=0) if statistic == "mean" else np.median(S, axis=0)))
        else:
            ms = ()
        status = {}
        if details is not None:
            for c in SOFTWARE_FIELDS:
                status[c] = Counter(details[i][c] for i in rows)
        ordinal = {c: tuple(int(v) for v in np.bincount(codes[rows, FEATURE_ORDER.index(c)], minlength=3)[:3])
                   for c in SOFTWARE_FIELDS}
        r = table[pid]
        out.append(ProviderAggregate(
            pid, m, tuple(float(v) / m for v in cnt), ms,
            log10_size(r.domain_count), log10_size(r.ip_count),
            r.phishing_count, r.malware_count, tuple(int(v) for v in cnt), status, ordinal,
        ))
    return out


def histogram(rates) -> list[int]:
    """Counts of rates in [0,10%), [10,20%), ..., [90,100%]."""
    pct = np.asarray(rates, dtype=float) * 100.0
    idx = np.minimum(np.floor(pct / 10.0 + 1e-9), 9).astype(int)
    return np.bincount(idx, minlength=10).tolist()


def percent(count, total) -> float:
    return 100.0 * count / total if total else float("nan")


def summary_rows(aggregates):
    """Corpus-level counts in the layout of the landscape summary table.

    Returns ``(rows, total)`` where each row is
    ``(feature, level, count, percent)``; ``level`` is ``""`` for the
    headline row of a software package or for a boolean indicator.
    """
    total = sum(a.domain_count_sampled for a in aggregates)
    rows = []
    have_details = bool(aggregates) and all(a.software_status for a in aggregates)
    for c in SUMMARY_SOFTWARE_ORDER:
        if have_details:
            st = Counter()
            for a in aggregates:
                st.update(a.software_status[c])
            present = total - st["absent"]
            levels = [("no version information", st["hidden"]), ("patched", st["patched"]),
                      ("unpatched", st["unpatched"])]
        else:
            oc = np.sum([a.ordinal_counts[c] for a in aggregates], axis=0)
            present = int(oc[0] + oc[1])
            levels = [("patched or no version information", int(oc[1])), ("unpatched", int(oc[0]))]
        rows.append((c, "", present, percent(present, total)))
        for name, cnt in levels:
            rows.append((c, name, cnt, percent(cnt, total)))
    for c in sorted(BOOLEAN_FIELDS, key=lambda c: -sum(a.feature_counts[FEATURE_ORDER.index(c)] for a in aggregates)):
        cnt = sum(a.feature_counts[FEATURE_ORDER.index(c)] for a in aggregates)
        rows.append((c, "", cnt, percent(cnt, total)))
    return rows, total


SUMMARY_SOFTWARE_ORDER = ("http_server", "ssl_impl", "admin_panel", "php", "ssh", "cms")


def provider_histograms(aggregates):
    """Per-indicator counts of providers in 10%-wide prevalence bins.

    With software details also emits the share of installations that show
    a version (``<col>:version_visible``) and the share of versioned
    installations that are unpatched (``<col>:unpatched_of_versioned``);
    providers without any qualifying installation are left out.
    """
    out = {}
    for j, c in enumerate(FEATURE_ORDER):
        out[c] = histogram([a.feature_prevalence[j] for a in aggregates])
    if aggregates and all(a.software_status for a in aggregates):
        for c in SOFTWARE_FIELDS:
            vis, unp = [], []
            for a in aggregates:
                st = a.software_status[c]
                installed = st["hidden"] + st["patched"] + st["unpatched"]
                versioned = st["patched"] + st["unpatched"]
                if installed:
                    vis.append(versioned / installed)
                if versioned:
                    unp.append(st["unpatched"] / versioned)
            out[f"{c}:version_visible"] = histogram(vis)
            out[f"{c}:unpatched_of_versioned"] = histogram(unp)
    return out


def _label(c, level):
    base = SUMMARY_LABELS[c]
    if c in DIRECTION:
        base += " (+)" if DIRECTION[c] > 0 else " (-)"
    return f"  {level}" if level else base


def landscape_report(aggregates, out_dir) -> dict:
    """Write the corpus summary and provider histograms.

    Files: ``summary.csv`` / ``summary.txt`` and ``histograms.csv`` /
    ``histograms.txt``. Returns the summary rows and histograms.
    """
    if not aggregates:
        raise ValueError("landscape report needs at least one provider")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, total = summary_rows(aggregates)
    hist = provider_histograms(aggregates)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("feature", "level", "domains", "percent"))
        for c, level, cnt, pct in rows:
            w.writerow((c, level, cnt, f"{pct:.2f}"))
    width = max(len(_label(c, lv)) for c, lv, _, _ in rows)
    with open(out / "summary.txt", "w", encoding="utf-8") as fh:
        fh.write(f"{'Feature':<{width}}  {'# of domains':>12}  {'% of domains':>12}\n")
        for c, level, cnt, pct in rows:
            fh.write(f"{_label(c, level):<{width}}  {cnt:>12,}  {pct:>12.2f}\n")
        fh.write(f"{'Total domains':<{width}}  {total:>12,}\n")
    bins = [f"{lo}-{lo + 10}%" for lo in BIN_EDGES[:-1]]
    with open(out / "histograms.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["indicator"] + bins)
        for name, counts in hist.items():
            w.writerow([name] + counts)
    nw = max(len(n) for n in hist)
    with open(out / "histograms.txt", "w", encoding="utf-8") as fh:
        fh.write(f"{'indicator':<{nw}}" + "".join(f"{b:>9}" for b in bins) + "\n")
        for name, counts in hist.items():
            fh.write(f"{name:<{nw}}" + "".join(f"{v:>9}" for v in counts) + "\n")
    return {"summary": rows, "total": total, "histograms": hist}


def write_aggregates_csv(aggregates, path, factor_names=()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["provider_id", "domain_count_sampled", "log10_domains", "log10_ips",
                    "phishing_count", "malware_count"] + [f"prev_{c}" for c in FEATURE_ORDER]
                   + list(factor_names))
        for a in aggregates:
            w.writerow([a.provider_id, a.domain_count_sampled, repr(a.log10_domains), repr(a.log10_ips),
                        a.phishing_count, a.malware_count] + [repr(v) for v in a.feature_prevalence]
                       + [repr(v) for v in a.mean_scores])


def read_aggregates_csv(path):
    """Inverse of :func:`write_aggregates_csv`; returns ``(aggregates, factor_names)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        nfix = 6 + len(FEATURE_ORDER)
        names = tuple(header[nfix:])
        out = []
        for row in reader:
            if not row:
                continue
            prev = tuple(float(v) for v in row[6:nfix])
            m = int(row[1])
            out.append(ProviderAggregate(
                row[0], m, prev, tuple(float(v) for v in row[nfix:]),
                float(row[2]), float(row[3]), int(row[4]), int(row[5]),
                tuple(int(round(v * m)) for v in prev)))
    return out, names
