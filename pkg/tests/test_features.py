import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hostsec.corpus import DomainRecord
from hostsec.features import html
from hostsec.features.fingerprint import (SoftwareFingerprint, canonical_version, fingerprint_admin_panel,
                                          fingerprint_cms, fingerprint_stack, load_signatures,
                                          normalize_version, parse_generator)
from hostsec.features.indicators import (detect_mixed_content, detect_ssl_stripping_form,
                                         extract_header_indicators)
from hostsec.features.patch import classify_patch_status, classify_ssl, software_status
from hostsec.features.vector import (DIRECTION, FeatureVector, FEATURE_ORDER, UndescribableDomain,
                                     build_feature_vector, extract_corpus, read_features_csv,
                                     software_details, write_features_csv)

from conftest import answered, closed, mkpage, mkrecord, tls_info
from extraction_fixtures import FIXTURES, expected_row


@pytest.mark.parametrize("name,record,diff", FIXTURES, ids=[f[0] for f in FIXTURES])
def test_extraction_fixture(name, record, diff, patch_table):
    assert build_feature_vector(record, patch_table).as_row() == expected_row(diff)


def test_fixture_count():
    assert len(FIXTURES) >= 30


# -- header indicators ---------------------------------------------------------

def test_no_security_headers():
    flags = extract_header_indicators([mkpage(headers=[("Server", "nginx"), ("Set-Cookie", "a=1")])])
    assert not any(vars(flags).values())


@pytest.mark.parametrize("value,weak", [
    ("0", True), (" 0 ", True), ("0; report=x", True), ("1", False), ("1; mode=block", False), ("", False),
])
def test_xss_protection_grammar(value, weak):
    flags = extract_header_indicators([mkpage(headers=[("X-XSS-Protection", value)])])
    assert flags.weak_xss_protection is weak


def test_cookie_attribute_in_value_does_not_count():
    flags = extract_header_indicators([mkpage(headers=[("Set-Cookie", "httponly=secure")])])
    assert not flags.httponly_cookie and not flags.secure_cookie


def test_hsts_counts_without_tls():
    assert extract_header_indicators([mkpage(headers=[("Strict-Transport-Security", "max-age=1")])]).hsts


# -- mixed content and stripping forms ------------------------------------------

@pytest.mark.parametrize("body,expected", [
    ('<script src="http://x.test/a.js"></script>', True),
    ('<link rel="stylesheet" href="http://x.test/a.css">', True),
    ('<img src="http://x.test/a.png">', True),
    ('<img srcset="/a.png 1x, http://x.test/b.png 2x">', True),
    ('<script src="//x.test/a.js"></script>', False),
    ('<script src="/a.js"></script>', False),
    ('<a href="http://x.test/">link</a>', False),
    ('<iframe src="http://x.test/"></iframe>', False),
    ('<base href="http://site.test/"><img src="a.png">', True),
])
def test_mixed_content(body, expected):
    assert detect_mixed_content(mkpage("https://site.test/", body=body)) is expected
    assert detect_mixed_content(mkpage("http://site.test/", body=body)) is False


@pytest.mark.parametrize("url,body,expected", [
    ("http://site.test/", '<form action="https://x.test/login">', True),
    ("http://site.test/", '<FORM ACTION="HTTPS://x.test/login">', True),
    ("http://site.test/", '<form action="/login">', False),
    ("http://site.test/", "<form>", False),
    ("https://site.test/", '<form action="https://x.test/login">', False),
    ("https://site.test/", '<form action="/login">', False),
])
def test_stripping_form(url, body, expected):
    assert detect_ssl_stripping_form(mkpage(url, body=body)) is expected


def test_garbage_html_counts_warning(monkeypatch):
    def boom(self, data):
        raise AssertionError("parser blew up")

    before = html.PARSE_WARNINGS["unparseable_html"]
    monkeypatch.setattr(html._Collector, "feed", boom)
    assert detect_mixed_content(mkpage("https://site.test/", body="<script src='http://x/a.js'>")) is False
    assert html.PARSE_WARNINGS["unparseable_html"] == before + 1


def test_page_links_resolution():
    parsed = html.parse_html('<a href="b#x">1</a><a href="mailto:a@b">2</a><a href="#top">3</a>'
                             '<a href="//www.site.test/c">4</a>', "http://site.test/a/")
    assert html.page_links(parsed) == ["http://site.test/a/b", "http://www.site.test/c"]


# -- fingerprints --------------------------------------------------------------

@pytest.mark.parametrize("raw,expected", [
    ("2.4.18 (Ubuntu)", "2.4.18"), ("5.5.9-1ubuntu4.20", "5.5.9"), ("7.0.13+deb", "7.0.13"),
    ("1.10.3", "1.10.3"), ("", None), (None, None), ("(Unix)", None), ("Ubuntu", None),
])
def test_normalize_version(raw, expected):
    assert normalize_version(raw) == expected


def test_openssh_suffix_kept():
    assert normalize_version("7.2p2", keep_package_suffix=True) == "7.2p2"
    assert normalize_version("6.6.1p1-4", keep_package_suffix=True) == "6.6.1p1-4"


def test_canonical_version():
    assert canonical_version("10.0") == "10" and canonical_version("4.7.0") == "4.7"
    assert canonical_version("1.10") == "1.10" and canonical_version("0") == "0"


@pytest.mark.parametrize("server,product,version", [
    ("Apache/2.4.18 (Ubuntu)", "apache", "2.4.18"), ("Apache", "apache", None),
    ("nginx/1.10.3", "nginx", "1.10.3"), ("Microsoft-IIS/8.5", "iis", "8.5"), ("cloudflare", None, None),
])
def test_stack_server(server, product, version):
    http, _, _ = fingerprint_stack([mkpage(headers=[("Server", server)])])
    assert (http.product, http.version) == (product, version)


def test_first_server_header_wins():
    pages = [mkpage("http://site.test/", headers=[("Server", "nginx/1.10.3")]),
             mkpage("http://site.test/x", headers=[("Server", "Apache/2.2.15")])]
    assert fingerprint_stack(pages)[0].product == "nginx"


def test_ssh_banner_fingerprint():
    _, _, ssh = fingerprint_stack([mkpage()], "SSH-2.0-OpenSSH_6.6.1p1")
    assert ssh == SoftwareFingerprint("openssh", "6.6.1p1", "banner")
    assert fingerprint_stack([mkpage()], None)[2].present is False


def test_cms_basic_scan():
    fp = fingerprint_cms([mkpage(body='<meta name="generator" content="WordPress 4.7">')])
    assert fp == SoftwareFingerprint("wordpress", "4.7", "basic_scan")


def test_cms_absent_on_static_html():
    assert not fingerprint_cms([mkpage(body="<html><body><p>hello</p></body></html>")]).present


def test_cms_comprehensive_scan():
    fp = fingerprint_cms([mkpage(body='<link rel="stylesheet" href="/wp-content/themes/t/style.css">')])
    assert fp == SoftwareFingerprint("wordpress", None, "comprehensive_scan")


def test_cms_versioned_generator_preferred():
    pages = [mkpage("http://site.test/", body='<meta name="generator" content="WordPress">'),
             mkpage("http://site.test/b", body='<meta name="generator" content="WordPress 4.6.1">')]
    assert fingerprint_cms(pages).version == "4.6.1"


def test_signature_file_is_versioned():
    version, rules = load_signatures()
    assert version and {r.product for r in rules} == {"wordpress", "joomla", "drupal"}


def test_generator_major_only_is_hidden():
    assert parse_generator("Drupal 7 (http://drupal.org)") == SoftwareFingerprint("drupal", None, "basic_scan")


def test_admin_panel_examples():
    assert fingerprint_admin_panel([answered(2083, [], "<title>cPanel Login</title>")]) == \
        SoftwareFingerprint("cpanel", None, "probe")
    assert not fingerprint_admin_panel([closed(p) for p in (2082, 2083)]).present
    assert fingerprint_admin_panel([answered(2222, [("Server", "DirectAdmin/1.50.1")])]) == \
        SoftwareFingerprint("directadmin", "1.50.1", "header")


def test_admin_panel_prefers_versioned():
    probes = [answered(2083, [], "cPanel"), answered(10000, [("Server", "MiniServ/1.820")])]
    assert fingerprint_admin_panel(probes) == SoftwareFingerprint("virtualmin", "1.820", "header")


def test_fingerprint_invariant():
    with pytest.raises(ValueError):
        SoftwareFingerprint(None, "1.0")


# -- classification ------------------------------------------------------------

@pytest.mark.parametrize("fp,code", [
    (SoftwareFingerprint("wordpress", "4.7", "basic_scan"), 1),
    (SoftwareFingerprint("wordpress", "4.6.0", "basic_scan"), 0),
    (SoftwareFingerprint("wordpress", None, "comprehensive_scan"), 1),
    (SoftwareFingerprint(), 2),
])
def test_classify_patch_status(fp, code, patch_table):
    assert classify_patch_status(fp, patch_table) == code


def test_software_status_levels(patch_table):
    assert software_status(SoftwareFingerprint("nginx", None, "header"), patch_table) == "hidden"
    assert software_status(SoftwareFingerprint("nginx", "1.10.3", "header"), patch_table) == "patched"
    assert software_status(SoftwareFingerprint("nginx", "1.9.0", "header"), patch_table) == "unpatched"
    assert software_status(SoftwareFingerprint(), patch_table) == "absent"


@pytest.mark.parametrize("tls,code", [
    (tls_info("SSLv3", "TLSv1.2"), 0), (tls_info("SSLv2"), 0), (tls_info("TLSv1.2"), 1),
    (tls_info("TLSv1.2", flags=("compression",)), 0), (tls_info(), 2), (None, 2),
])
def test_classify_ssl(tls, code):
    assert classify_ssl(tls) == code


# -- vectors -------------------------------------------------------------------

def test_zero_pages_undescribable(patch_table):
    with pytest.raises(UndescribableDomain, match="undescribable"):
        build_feature_vector(DomainRecord("site.test", "P1"), patch_table)


def test_locality_of_server_change(patch_table):
    base = mkrecord(mkpage(headers=[("Set-Cookie", "a=1; HttpOnly")]))
    changed = mkrecord(mkpage(headers=[("Set-Cookie", "a=1; HttpOnly"), ("Server", "nginx/1.10.3")]))
    a, b = build_feature_vector(base, patch_table).as_dict(), build_feature_vector(changed, patch_table).as_dict()
    assert {k for k in a if a[k] != b[k]} == {"http_server"}
    assert b["http_server"] == 1


def test_direction_signs():
    assert {k for k, v in DIRECTION.items() if v < 0} == {"weak_xss_protection", "mixed_content",
                                                          "ssl_stripping_form"}
    assert len(DIRECTION) == 9


def test_vector_rejects_bad_ordinal():
    with pytest.raises(ValueError):
        FeatureVector(cms=3)


def test_extract_corpus_and_csv(tmp_path, patch_table):
    recs = [mkrecord(mkpage(headers=[("Server", "nginx/1.10.3")]), domain="a.test"),
            DomainRecord("b.test", "P2"),
            mkrecord(banner="SSH-2.0-OpenSSH_7.2p2", domain="c.test", provider="P3")]
    rows, details, skipped = extract_corpus(recs, patch_table)
    assert skipped == ["b.test"] and len(rows) == 2
    assert details[0][1]["http_server"] == "patched" and details[1][1]["ssh"] == "patched"
    write_features_csv(rows, tmp_path / "f.csv")
    header = (tmp_path / "f.csv").read_text().splitlines()[0].split(",")
    assert header == ["domain", "provider_id"] + list(FEATURE_ORDER)
    domains, pids, codes = read_features_csv(tmp_path / "f.csv")
    assert domains == ["a.test", "c.test"] and pids == ["P1", "P3"]
    assert [list(r) for r in codes] == [v.as_row() for _, v in rows]


def test_software_details_ssl(patch_table):
    assert software_details(mkrecord(tls=tls_info("TLSv1.3")), patch_table)["ssl_impl"] == "patched"


# -- properties ----------------------------------------------------------------

HEADER_POOL = [
    ("Content-Security-Policy", "default-src 'self'"), ("X-Frame-Options", "DENY"),
    ("X-Content-Type-Options", "nosniff"), ("Strict-Transport-Security", "max-age=1"),
    ("Set-Cookie", "a=1; HttpOnly"), ("Set-Cookie", "b=1; Secure"), ("X-XSS-Protection", "0"),
    ("X-XSS-Protection", "1; mode=block"), ("Server", "Apache/2.4.18"), ("Server", "nginx"),
    ("X-Powered-By", "PHP/5.4.45"),
]
BODY_POOL = [
    "", '<script src="http://x.test/a.js"></script>', '<form action="https://x.test/l"></form>',
    '<meta name="generator" content="Joomla! 3.6.4">', '<img src="/a.png">', "<p>plain</p>",
]


@st.composite
def pages(draw, i):
    url = f"{draw(st.sampled_from(['http', 'https']))}://site.test/p{i}"
    return mkpage(url, headers=draw(st.lists(st.sampled_from(HEADER_POOL), max_size=5)),
                  body="".join(draw(st.lists(st.sampled_from(BODY_POOL), max_size=3))))


@st.composite
def records(draw):
    n = draw(st.integers(1, 4))
    return mkrecord(*[draw(pages(i)) for i in range(n)],
                    banner=draw(st.sampled_from([None, "SSH-2.0-OpenSSH_7.2p2", "SSH-2.0-OpenSSH_5.9"])),
                    tls=draw(st.sampled_from([None, tls_info("TLSv1.2"), tls_info("SSLv3")])))


@settings(max_examples=80, deadline=None)
@given(records(), st.data())
def test_monotone_and_pure(patch_table, rec, data):
    v1 = build_feature_vector(rec, patch_table)
    assert v1 == build_feature_vector(rec, patch_table)
    extra = data.draw(pages(99))
    grown = DomainRecord(rec.domain, rec.provider_id, rec.pages + (extra,), rec.admin_probes,
                         rec.ssh_banner, rec.tls_info)
    v2 = build_feature_vector(grown, patch_table)
    for name in DIRECTION:
        assert getattr(v1, name) <= getattr(v2, name)
    for name in ("http_server", "ssl_impl", "ssh", "php", "cms", "admin_panel"):
        assert getattr(v2, name) in (0, 1, 2)
