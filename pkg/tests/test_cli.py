import csv
import json

import pytest

from hostsec.cli import main
from hostsec.corpus import load_corpus
from hostsec.features.vector import FEATURE_ORDER

from servers import Site, banner, free_port, RawServer

HTML = [("Content-Type", "text/html")]


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    assert main(["synth", "--n-domains", "1500", "--n-providers", "40", "--seed", "2", "--out", str(out)]) == 0
    return out


def test_synth_outputs(world):
    with open(world / "features.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["domain", "provider_id"] + list(FEATURE_ORDER)
    assert json.loads((world / "manifest.json").read_text())["seeds"] == {"synth": 2}


def test_analysis_chain(world, tmp_path, capsys):
    model = tmp_path / "model"
    assert main(["fa", "--features", str(world / "features.csv"), "--factors", "4", "--seed", "1",
                 "--out", str(model)]) == 0
    for name in ("loadings.csv", "scores.csv", "variance.csv", "correlation.csv", "manifest.json"):
        assert (model / name).exists()
    manifest = json.loads((model / "manifest.json").read_text())
    assert manifest["tolerances"]["minres_ftol"] == 1e-9 and manifest["seeds"] == {"parallel_analysis": 1}

    assert main(["fe", "--scores", str(model / "scores.csv"), "--out", str(tmp_path / "fe.csv")]) == 0
    assert "MR1: R2 =" in capsys.readouterr().out

    rep = tmp_path / "rep"
    assert main(["report", "--features", str(world / "features.csv"), "--providers", str(world / "providers.csv"),
                 "--scores", str(model / "scores.csv"), "--out", str(rep)]) == 0
    assert "Total domains" in capsys.readouterr().out

    fit = tmp_path / "fit.json"
    assert main(["glm", "--response", "phishing", "--covariates", "log10_domains,log10_ips,MR2",
                 "--features-agg", str(rep / "aggregates.csv"), "--providers", str(world / "providers.csv"),
                 "--out", str(fit)]) == 0
    doc = json.loads(fit.read_text())
    assert doc["names"] == ["(Intercept)", "log10_domains", "log10_ips", "MR2"]
    assert doc["dispersion"] > 0 and len(doc["coefficient_table"]) == 4
    assert fit.with_suffix(".csv").read_text().startswith("term,estimate")


def test_glm_unknown_covariate(world, tmp_path):
    rep = tmp_path / "rep"
    main(["report", "--features", str(world / "features.csv"), "--providers", str(world / "providers.csv"),
          "--out", str(rep)])
    assert main(["glm", "--response", "phishing", "--covariates", "bogus", "--features-agg",
                 str(rep / "aggregates.csv"), "--out", str(tmp_path / "f.json")]) == 2


def test_config_file_and_flag_precedence(world, tmp_path):
    cfg = tmp_path / "fa.cfg"
    cfg.write_text(f"features = {world / 'features.csv'}\nfactors = 2\nreplicates = 5\nout = {tmp_path / 'ignored'}\n")
    assert main(["fa", "--config", str(cfg), "--out", str(tmp_path / "m")]) == 0
    assert (tmp_path / "m" / "loadings.csv").exists() and not (tmp_path / "ignored").exists()
    with open(tmp_path / "m" / "loadings.csv") as fh:
        assert next(csv.reader(fh)) == ["variable", "MR1", "MR2", "uniqueness"]


def test_missing_required_exits_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["fa", "--features", "x.csv"])
    assert err.value.code == 2
    assert "--out" in capsys.readouterr().err


def test_missing_input_exits_1(tmp_path, capsys):
    assert main(["fe", "--scores", str(tmp_path / "none.csv"), "--out", str(tmp_path / "fe.csv")]) == 1
    assert "hostsec fe" in capsys.readouterr().err


def test_pipeline_set_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("synth = true\nsynth_domains = 99999\nreplicates = 5\nfactors = 2\n")
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(cfg), "--set", "synth_domains=1200", "--set", "synth-providers=30",
                 "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["synth_domains"] == "1200" and manifest["config"]["synth_providers"] == "30"


def test_pipeline_failure_exits_1(tmp_path):
    assert main(["pipeline", "--set", "features=/nonexistent.csv", "--set", "providers=/nonexistent.csv",
                 "--out", str(tmp_path / "r")]) == 1


def test_scan_and_extract(tmp_path):
    routes = {"/": (200, HTML + [("Server", "nginx/1.10.3"), ("X-Frame-Options", "DENY")],
                    '<a href="/a">a</a>'), "/a": (200, HTML, "<p>a</p>")}
    with Site(routes) as site, RawServer(banner(b"SSH-2.0-OpenSSH_7.2p2\r\n")) as ssh:
        pol = tmp_path / "policy.cfg"
        pol.write_text(f"hosts = site.test=127.0.0.1\nhttp_port = {site.port}\nhttps_port = {free_port()}\n"
                       f"ssh_port = {ssh.port}\nper_host_delay = 0\ntimeout = 2000\nadmin_ports = {free_port()}\n")
        targets = tmp_path / "targets.txt"
        targets.write_text("site.test,P1\n")
        corpus = tmp_path / "corpus.jsonl"
        assert main(["scan", "--domains", str(targets), "--policy", str(pol), "--out", str(corpus)]) == 0
    (rec,), errors = load_corpus(corpus)
    assert errors == [] and len(rec.pages) == 2 and rec.ssh_banner.startswith("SSH-2.0-OpenSSH_7.2p2")

    feats = tmp_path / "features.csv"
    assert main(["extract", "--corpus", str(corpus), "--out", str(feats)]) == 0
    with open(feats) as fh:
        row = dict(zip(*csv.reader(fh)))
    assert row["http_server"] == "1" and row["x_frame_options"] == "1" and row["ssh"] == "1"
