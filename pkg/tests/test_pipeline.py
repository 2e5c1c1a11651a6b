import json

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtr

from hostsec.corpus import CorpusError, ProviderRow, ProviderTable, dump_provider_table
from hostsec.features.vector import BOOLEAN_FIELDS, FEATURE_ORDER, SOFTWARE_FIELDS
from hostsec.pipeline.landscape import aggregate_providers, histogram, landscape_report, read_aggregates_csv, \
    summary_rows, write_aggregates_csv
from hostsec.pipeline.run import PipelineError, feature_dataset, run_pipeline
from hostsec.pipeline.synth import SynthError, SynthSpec, default_spec, simple_structure, synth_generate
from hostsec.pipeline.validate import match_factors, tucker_congruence
from hostsec.regress import fixed_effects_fit, glm_quasipoisson

from oracles import tucker_bruteforce

CSP = FEATURE_ORDER.index("csp")
HTTPONLY = FEATURE_ORDER.index("httponly_cookie")


def table(*rows):
    return ProviderTable({r[0]: ProviderRow(*r) for r in rows})


def blank_codes(n):
    return np.array([[2 if c in SOFTWARE_FIELDS else 0 for c in FEATURE_ORDER]] * n)


# aggregation

def test_prevalence_quarter():
    codes = blank_codes(4)
    codes[0, CSP] = 1
    (agg,) = aggregate_providers(["P1"] * 4, codes, table(("P1", 10, 100, 3, 1)), np.arange(8.0).reshape(4, 2))
    assert agg.feature_prevalence[CSP] == 0.25
    assert agg.mean_scores == (3.0, 4.0)
    assert agg.log10_domains == 2.0 and agg.log10_ips == 1.0
    assert (agg.phishing_count, agg.malware_count) == (3, 1)


def test_zero_domain_guard():
    (agg,) = aggregate_providers(["P1"], blank_codes(1), table(("P1", 0, 0, 0, 0)))
    assert agg.log10_domains == 0.0 and agg.log10_ips == 0.0


def test_orphans_listed():
    with pytest.raises(CorpusError, match="P7, P9"):
        aggregate_providers(["P1", "P9", "P7"], blank_codes(3), table(("P1", 1, 1, 0, 0)))


def test_software_prevalence_is_unpatched_share():
    codes = blank_codes(4)
    codes[:, FEATURE_ORDER.index("php")] = [0, 1, 2, 0]
    (agg,) = aggregate_providers(["P"] * 4, codes, table(("P", 1, 4, 0, 0)))
    assert agg.feature_prevalence[FEATURE_ORDER.index("php")] == 0.5


def test_median_statistic():
    S = np.array([[0.0], [1.0], [5.0]])
    (agg,) = aggregate_providers(["P"] * 3, blank_codes(3), table(("P", 1, 3, 0, 0)), S, statistic="median")
    assert agg.mean_scores == (1.0,)


def test_synth_marginals():
    spec = default_spec(10_000, 200, seed=1)
    world = synth_generate(spec)
    aggs = aggregate_providers(world.domain_provider, world.dataset.codes, world.providers)
    n = sum(a.domain_count_sampled for a in aggs)
    for j, c in enumerate(FEATURE_ORDER):
        t = spec.thresholds.values[j]
        expected = ndtr(t[0]) if c in SOFTWARE_FIELDS else 1 - ndtr(t[0])
        observed = sum(a.feature_counts[j] for a in aggs) / n
        assert abs(observed - expected) <= 0.02, c


def test_aggregates_csv_round_trip(tmp_path):
    world = synth_generate(default_spec(600, 20, seed=2))
    aggs = aggregate_providers(world.domain_provider, world.dataset.codes, world.providers, world.true_scores)
    write_aggregates_csv(aggs, tmp_path / "a.csv", ("MR1", "MR2", "MR3", "MR4"))
    back, names = read_aggregates_csv(tmp_path / "a.csv")
    assert names == ("MR1", "MR2", "MR3", "MR4")
    for a, b in zip(aggs, back):
        assert (a.provider_id, a.feature_prevalence, a.mean_scores, a.feature_counts) == \
            (b.provider_id, b.feature_prevalence, b.mean_scores, b.feature_counts)


# landscape

def test_headline_percentage(tmp_path):
    n, flagged = 442_684, 57_696
    codes = blank_codes(n)
    codes[:flagged, HTTPONLY] = 1
    ids = np.where(np.arange(n) % 2 == 0, "A", "B")
    aggs = aggregate_providers(ids, codes, table(("A", 1, n, 0, 0), ("B", 1, n, 0, 0)))
    rep = landscape_report(aggs, tmp_path)
    (row,) = [r for r in rep["summary"] if r[0] == "httponly_cookie"]
    assert row[2] == flagged and rep["total"] == n
    assert abs(row[3] - 13.04) <= 0.02
    assert "13.03" in (tmp_path / "summary.txt").read_text()


def test_all_zero_first_bin(tmp_path):
    aggs = aggregate_providers([f"P{i}" for i in range(5)], blank_codes(5),
                               table(*[(f"P{i}", 1, 1, 0, 0) for i in range(5)]))
    hist = landscape_report(aggs, tmp_path)["histograms"]
    for c in BOOLEAN_FIELDS:
        assert hist[c] == [5] + [0] * 9


def test_histogram_edges():
    assert histogram([0.0, 0.0999, 0.1, 0.5, 0.9, 1.0]) == [2, 1, 0, 0, 0, 1, 0, 0, 0, 2]


def test_default_cluster_stands_apart():
    spec = default_spec(50_000, 1000, seed=3, provider_defaults=(("csp", 9, 0.8),))
    world = synth_generate(spec)
    aggs = aggregate_providers(world.domain_provider, world.dataset.codes, world.providers)
    h = histogram([a.feature_prevalence[CSP] for a in aggs])
    assert sum(h[7:]) == 9
    assert h[6] == 0  # an empty bin separates the defaults from the bulk


def test_summary_totals_exact():
    world = synth_generate(default_spec(3000, 40, seed=4))
    codes = np.asarray(world.dataset.codes)
    aggs = aggregate_providers(world.domain_provider, codes, world.providers)
    rows, total = summary_rows(aggs)
    assert total == 3000
    got = {(c, lv): cnt for c, lv, cnt, _ in rows}
    for j, c in enumerate(FEATURE_ORDER):
        if c in SOFTWARE_FIELDS:
            assert got[(c, "unpatched")] == np.sum(codes[:, j] == 0)
            assert got[(c, "")] == np.sum(codes[:, j] < 2)
            assert got[(c, "unpatched")] + got[(c, "patched or no version information")] == got[(c, "")]
        else:
            assert got[(c, "")] == np.sum(codes[:, j])


def test_empty_report_rejected(tmp_path):
    with pytest.raises(ValueError):
        landscape_report([], tmp_path)


# synthetic generator

def uniform_spec(strength, n, G, seed, slopes=(0.0, 0.0), **kw):
    return SynthSpec(n, G, simple_structure(6, 2, 0.7), [(0.0,)] * 6, strength, (0.5, (0.0, 0.0), slopes),
                     seed=seed, **kw)


def test_no_provider_effect_noise_floor():
    world = synth_generate(uniform_spec(0.0, 10_000, 100, seed=5))
    for j in range(2):
        assert fixed_effects_fit(world.true_scores[:, j], world.domain_provider).r_squared <= 0.02


def test_pure_provider_effect():
    world = synth_generate(uniform_spec(1.0, 10_000, 100, seed=6))
    for j in range(2):
        assert fixed_effects_fit(world.true_scores[:, j], world.domain_provider).r_squared >= 0.9


def test_communality_above_one_rejected():
    with pytest.raises(SynthError, match="communality"):
        SynthSpec(100, 10, [[0.8, 0.7]], [(0.0,)], 0.0, (0.0, (0.0, 0.0), (0.0, 0.0)))


def test_generator_reproducible():
    a = synth_generate(default_spec(500, 10, seed=9))
    b = synth_generate(default_spec(500, 10, seed=9))
    assert np.array_equal(a.dataset.codes, b.dataset.codes) and a.providers.rows == b.providers.rows


def provider_glm(world):
    rows = [world.providers[pid] for pid in world.providers.ids()]
    y = np.array([r.phishing_count for r in rows])
    X = np.column_stack([np.ones(len(rows)), np.log10([r.domain_count for r in rows]),
                         np.log10([max(r.ip_count, 1) for r in rows]), world.provider_means])
    return glm_quasipoisson(y, X)


def test_abuse_slope_recovered():
    spec = default_spec(20_000, 1000, seed=10)
    fit = provider_glm(synth_generate(spec))
    for j, b in enumerate(spec.abuse_betas.factor_slopes):
        assert abs(fit.coefficients[3 + j] - b) <= 0.15


def test_null_slopes_not_significant():
    t = []
    for seed in range(100):
        spec = default_spec(2000, 200, seed=seed, abuse_betas=(-5.6, (1.5, 0.69), (0.0,) * 4))
        t.append(provider_glm(synth_generate(spec)).t_values[3:])
    share = np.mean(np.abs(np.array(t)) < 3, axis=0)
    assert np.all(share >= 0.99)


# factor matching

def test_tucker_identity_and_alignment():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(10, 3))
    assert tucker_congruence(A, A) == pytest.approx(np.ones(3))
    assert tucker_congruence(A, -A[:, ::-1]) == pytest.approx(np.ones(3))
    order, signs = match_factors(A, -A[:, ::-1])
    assert order.tolist() == [2, 1, 0] and signs.tolist() == [-1, -1, -1]


def test_tucker_matches_bruteforce():
    rng = np.random.default_rng(1)
    for _ in range(20):
        A, B = rng.normal(size=(8, 4)), rng.normal(size=(8, 4))
        assert np.mean(np.abs(tucker_congruence(A, B))) == pytest.approx(tucker_bruteforce(A, B), abs=1e-12)


def test_tucker_shape_mismatch():
    with pytest.raises(ValueError):
        tucker_congruence(np.ones((4, 2)), np.ones((4, 3)))


def test_random_columns_follow_beta_law():
    # phi^2 of independent isotropic directions in p dims is Beta(1/2, (p-1)/2)
    rng = np.random.default_rng(2)
    phi = np.array([tucker_congruence(rng.normal(size=(100, 1)), rng.normal(size=(100, 1)))[0]
                    for _ in range(4000)])
    exact = stats.beta.cdf(0.25 ** 2, 0.5, 49.5)
    assert exact == pytest.approx(0.9883, abs=1e-4)
    assert abs(np.mean(np.abs(phi) <= 0.25) - exact) <= 3 * np.sqrt(exact * (1 - exact) / 4000)


# end to end

def small_config(out, **kw):
    cfg = {"out": str(out), "synth": "true", "synth_domains": "1500", "synth_providers": "60",
           "replicates": "8", "seed": "3", "curve_points": "5"}
    cfg.update(kw)
    return cfg


def test_pipeline_deterministic(tmp_path):
    a = run_pipeline(small_config(tmp_path / "a"))
    b = run_pipeline(small_config(tmp_path / "b"))
    assert a.manifest["outputs"] == b.manifest["outputs"]
    assert "model/loadings.csv" in a.manifest["outputs"]
    assert "landscape/summary.txt" in a.manifest["outputs"]
    on_disk = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert on_disk["seeds"] == {"parallel_analysis": 3, "synth": 3}
    assert on_disk["tolerances"]["polychoric_rho_bound"] == 0.999


def test_pipeline_model_grid(tmp_path):
    res = run_pipeline(small_config(tmp_path, factors="4"))
    models = res.abuse["phishing"]
    assert [m.label for m in models] == [f"({i})" for i in range(1, 8)]
    assert models[0].covariates == () and models[-1].covariates[2:] == ("MR1", "MR2", "MR3", "MR4")
    assert (tmp_path / "glm_malware.txt").exists()
    assert len(list(tmp_path.glob("curve_phishing_MR*.csv"))) == 4


def test_pipeline_stage_errors(tmp_path):
    with pytest.raises(PipelineError) as err:
        run_pipeline({"out": str(tmp_path / "x"), "features": str(tmp_path / "none.csv"),
                      "providers": str(tmp_path / "none.csv")})
    assert err.value.stage == "inputs"

    world = synth_generate(default_spec(400, 10, seed=0))
    feats = tmp_path / "f.csv"
    with open(feats, "w") as fh:
        fh.write(",".join(("domain", "provider_id") + FEATURE_ORDER) + "\n")
        for i, (pid, row) in enumerate(zip(world.domain_provider, world.dataset.codes)):
            fh.write(",".join([f"d{i}.test", pid] + [str(v) for v in row]) + "\n")
    partial = ProviderTable({k: v for k, v in list(world.providers.rows.items())[:-1]})
    dump_provider_table(partial, tmp_path / "p.csv")
    with pytest.raises(PipelineError, match="aggregate") as err:
        run_pipeline({"out": str(tmp_path / "y"), "features": str(feats), "providers": str(tmp_path / "p.csv"),
                      "factors": "2"})
    assert err.value.stage == "aggregate"


def test_feature_dataset_category_counts():
    data = feature_dataset(np.array([[0] * 9 + [0] * 6, [1] * 9 + [2] * 6]))
    assert data.category_counts == (2,) * 9 + (3,) * 6
