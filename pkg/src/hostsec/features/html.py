"""Static HTML scanning for links, sub-resources, forms and generator tags."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from html.parser import HTMLParser
from urllib.parse import urljoin, urlsplit

log = logging.getLogger(__name__)

# parse-warning metric, keyed by reason
PARSE_WARNINGS: Counter = Counter()


@dataclass(frozen=True)
class ParsedPage:
    base: str
    anchors: tuple = ()
    scripts: tuple = ()
    stylesheets: tuple = ()
    images: tuple = ()
    form_actions: tuple = ()
    generators: tuple = ()
    ok: bool = True

    def resolve(self, ref: str) -> str:
        return urljoin(self.base, ref.strip())


class _Collector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.base = None
        self.anchors, self.scripts, self.stylesheets = [], [], []
        self.images, self.forms, self.generators = [], [], []

    def handle_starttag(self, tag, attrs):
        a = {k.lower(): (v or "") for k, v in attrs}
        if tag == "a" and "href" in a:
            self.anchors.append(a["href"])
        elif tag == "script" and a.get("src"):
            self.scripts.append(a["src"])
        elif tag == "link" and "stylesheet" in a.get("rel", "").lower().split() and a.get("href"):
            self.stylesheets.append(a["href"])
        elif tag == "img":
            if a.get("src"):
                self.images.append(a["src"])
            for part in a.get("srcset", "").split(","):
                part = part.strip()
                if part:
                    self.images.append(part.split()[0])
        elif tag == "form":
            # missing action submits to the page itself
            self.forms.append(a.get("action", ""))
        elif tag == "meta" and a.get("name", "").lower() == "generator":
            self.generators.append(a.get("content", ""))
        elif tag == "base" and self.base is None and a.get("href"):
            self.base = a["href"]

    handle_startendtag = handle_starttag


def parse_html(body: str, url: str) -> ParsedPage:
    """Collect the references in ``body``; unparseable HTML yields an empty result."""
    col = _Collector()
    try:
        col.feed(body or "")
        col.close()
    except Exception as exc:  # html.parser raises assorted errors on garbage
        PARSE_WARNINGS["unparseable_html"] += 1
        log.warning("could not parse HTML of %s: %s", url, exc)
        return ParsedPage(base=url, ok=False)
    base = urljoin(url, col.base) if col.base else url
    return ParsedPage(
        base=base,
        anchors=tuple(col.anchors),
        scripts=tuple(col.scripts),
        stylesheets=tuple(col.stylesheets),
        images=tuple(col.images),
        form_actions=tuple(col.forms),
        generators=tuple(col.generators),
    )


def resolved_scheme(parsed: ParsedPage, ref: str) -> str:
    return urlsplit(parsed.resolve(ref)).scheme.lower()


def page_links(parsed: ParsedPage) -> list[str]:
    """Absolute http(s) anchor targets with fragments dropped."""
    out = []
    for href in parsed.anchors:
        href = href.strip()
        if not href or href.startswith("#"):
            continue
        absolute = parsed.resolve(href)
        parts = urlsplit(absolute)
        if parts.scheme not in ("http", "https") or not parts.hostname:
            continue
        out.append(parts._replace(fragment="").geturl())
    return out
