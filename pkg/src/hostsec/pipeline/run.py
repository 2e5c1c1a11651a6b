"""End-to-end analysis run driven by a flat configuration."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__, _backend
from ..config import ConfigError, as_bool, as_list
from ..corpus import (
    DEFAULT_PAGE_LIMIT,
    default_patch_table,
    default_patch_table_path,
    dump_provider_table,
    load_corpus,
    load_patch_table,
    load_provider_table,
)
from ..factor import extract as fx
from ..factor import model as fm
from ..factor import polychoric as fp
from ..factor.io import write_factor_model
from ..factor.model import fit_factor_model
from ..factor.polychoric import OrdinalDataset
from ..features.vector import (
    SOFTWARE_FIELDS,
    FEATURE_ORDER,
    extract_corpus,
    read_features_csv,
    write_details_csv,
    write_features_csv,
)
from ..regress import fixed_effects_fit, glm_quasipoisson
from ..regress import glm as rg
from ..regress.glm import coefficient_table, effect_curve, pseudo_r2_vs_baseline
from .landscape import aggregate_providers, landscape_report, write_aggregates_csv
from .synth import default_spec, synth_generate

log = logging.getLogger(__name__)

RESPONSES = ("phishing", "malware")
SIZE_COVARIATES = ("log10_domains", "log10_ips")

DEFAULTS = {
    "seed": "0",
    "factors": "auto",
    "replicates": str(fm.PA_REPLICATES),
    "quantile": str(fm.PA_QUANTILE),
    "extraction": "minres",
    "score_method": "regression",
    "aggregate": "mean",
    "responses": "phishing,malware",
    "curve_quantiles": "0.1,0.5,0.9",
    "curve_points": "50",
    "page_limit": str(DEFAULT_PAGE_LIMIT),
    "synth": "false",
    "synth_domains": "10000",
    "synth_providers": "200",
}


class PipelineError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def tolerances() -> dict:
    return {
        "polychoric_rho_bound": fp.RHO_BOUND,
        "polychoric_xtol": fp.RHO_XTOL,
        "continuity_correction": fp.CONTINUITY,
        "min_eigenvalue": fp.MIN_EIGENVALUE,
        "uniqueness_bounds": list(fx.U_BOUNDS),
        "minres_ftol": fx.MINRES_FTOL,
        "minres_max_iter": fx.MAX_ITER,
        "varimax_tol": fx.VARIMAX_TOL,
        "glm_tol": rg.GLM_TOL,
        "glm_max_iter": rg.GLM_MAX_ITER,
    }


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class AbuseModel:
    label: str
    covariates: tuple
    fit: object
    pseudo_r2_vs_size: float = None


def abuse_models(aggregates, response: str, factor_names) -> list:
    """The nested model grid: null, size-only, size plus each factor, size plus all.

    Factor covariates are the provider-level scores in
    ``aggregate.mean_scores``.
    """
    if response not in RESPONSES:
        raise ConfigError(f"unknown response {response!r}")
    y = np.array([getattr(a, f"{response}_count") for a in aggregates], dtype=float)
    cols = {
        "log10_domains": np.array([a.log10_domains for a in aggregates]),
        "log10_ips": np.array([a.log10_ips for a in aggregates]),
    }
    for j, name in enumerate(factor_names):
        cols[name] = np.array([a.mean_scores[j] for a in aggregates])
    specs = [(), SIZE_COVARIATES]
    specs += [SIZE_COVARIATES + (f,) for f in factor_names]
    if len(factor_names) > 1:
        specs.append(SIZE_COVARIATES + tuple(factor_names))
    out = []
    for i, covs in enumerate(specs, start=1):
        X = np.column_stack([np.ones(len(y))] + [cols[c] for c in covs])
        fit = glm_quasipoisson(y, X, ("(Intercept)",) + covs)
        out.append(AbuseModel(f"({i})", covs, fit))
    base = out[1].fit
    for m in out[2:]:
        m.pseudo_r2_vs_size = pseudo_r2_vs_baseline(m.fit, base)
    return out


def write_abuse_models(models, out_dir, response) -> dict:
    """Delimited and aligned-text coefficient tables plus a JSON dump."""
    out = Path(out_dir)
    paths = {}
    paths["csv"] = out / f"glm_{response}.csv"
    with open(paths["csv"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("model", "term", "estimate", "std_error", "t", "p", "stars"))
        for m in models:
            for name, b, se, t, pv, st in coefficient_table(m.fit):
                w.writerow((m.label, name, repr(b), repr(se), repr(t), repr(pv), st))
            for stat in ("poisson_loglik", "dispersion", "deviance", "null_deviance", "pseudo_r2"):
                w.writerow((m.label, stat, repr(float(getattr(m.fit, stat))), "", "", "", ""))
            if m.pseudo_r2_vs_size is not None:
                w.writerow((m.label, "pseudo_r2_vs_model_2", repr(m.pseudo_r2_vs_size), "", "", "", ""))
    paths["json"] = out / f"glm_{response}.json"
    doc = [{"model": m.label, "covariates": list(m.covariates), **m.fit.as_dict(),
            "pseudo_r2_vs_model_2": m.pseudo_r2_vs_size} for m in models]
    with open(paths["json"], "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    paths["txt"] = out / f"glm_{response}.txt"
    with open(paths["txt"], "w", encoding="utf-8") as fh:
        fh.write(format_model_grid(models, response))
    return paths


def format_model_grid(models, response) -> str:
    terms = []
    for m in models:
        for name in m.fit.names:
            if name not in terms:
                terms.append(name)
    terms = [t for t in terms if t != "(Intercept)"] + ["(Intercept)"]
    tw = max(len(t) for t in terms + ["Pseudo R2 vs (2)"])
    cw = 16
    lines = [f"Response: {response} count (quasi-Poisson, log link)",
             " " * tw + "".join(f"{m.label:>{cw}}" for m in models)]
    for t in terms:
        est, se = [], []
        for m in models:
            if t in m.fit.names:
                j = m.fit.names.index(t)
                st = rg.stars(m.fit.p_values[j])
                est.append(f"{m.fit.coefficients[j]:.3f}{st}")
                se.append(f"({m.fit.std_errors[j]:.3f})")
            else:
                est.append("")
                se.append("")
        lines.append(f"{t:<{tw}}" + "".join(f"{v:>{cw}}" for v in est))
        lines.append(" " * tw + "".join(f"{v:>{cw}}" for v in se))
    rows = [
        ("Observations", lambda m: f"{m.fit.n}"),
        ("Log Likelihood", lambda m: f"{m.fit.poisson_loglik:,.0f}"),
        ("Dispersion", lambda m: f"{m.fit.dispersion:.1f}"),
        ("Pseudo R2", lambda m: f"{m.fit.pseudo_r2:.3f}" if m.covariates else "-"),
        ("Pseudo R2 vs (2)", lambda m: f"{m.pseudo_r2_vs_size:.3f}" if m.pseudo_r2_vs_size is not None else "-"),
    ]
    for name, f in rows:
        lines.append(f"{name:<{tw}}" + "".join(f"{f(m):>{cw}}" for m in models))
    lines.append("Stars: * p<0.05; ** p<0.01; *** p<0.001")
    return "\n".join(lines) + "\n"


def write_effect_curves(models, factor_names, out_dir, response, quantiles, points) -> list:
    """Plot data for every factor with a significant coefficient in the combined model.

    The sweep runs over ``log10_domains`` with ``log10_ips`` at its median.
    """
    full = models[-1]
    paths = []
    for name in factor_names:
        if name not in full.fit.names:
            continue
        rows = effect_curve(full.fit, name, quantiles, sweep="log10_domains", points=points)
        path = Path(out_dir) / f"curve_{response}_{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("quantile", name, "log10_domains", "expected_count"))
            for q, v, s, e in rows:
                w.writerow((repr(q), repr(v), repr(s), repr(e)))
        paths.append(path)
    return paths


def feature_dataset(codes) -> OrdinalDataset:
    """Wrap an (n, 15) code matrix in ``FEATURE_ORDER``."""
    counts = tuple(3 if c in SOFTWARE_FIELDS else 2 for c in FEATURE_ORDER)
    return OrdinalDataset(FEATURE_ORDER, np.asarray(codes), counts)


def write_manifest(out_dir, config: dict, seeds: dict, inputs: dict, extra=None) -> dict:
    """Record config, seeds, tolerances and digests of every input and output.

    No timestamps, so identical runs give identical manifests.
    """
    out = Path(out_dir)
    manifest = {
        "version": __version__,
        "backend": _backend.BACKEND,
        "config": {k: config[k] for k in sorted(config)},
        "seeds": seeds,
        "tolerances": tolerances(),
        "inputs": {k: {"path": str(v), "sha256": sha256(v)} for k, v in sorted(inputs.items())},
        **(extra or {}),
        "outputs": {},
    }
    for path in sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json"):
        manifest["outputs"][path.relative_to(out).as_posix()] = sha256(path)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def _stage(name):
    def wrap(fn):
        def run(*a, **kw):
            log.info("stage %s", name)
            try:
                return fn(*a, **kw)
            except PipelineError:
                raise
            except Exception as exc:
                raise PipelineError(name, exc) from exc
        return run
    return wrap


@dataclass
class RunResult:
    out_dir: Path
    manifest: dict
    model: object = None
    correlation: object = None
    fixed_effects: dict = field(default_factory=dict)
    abuse: dict = field(default_factory=dict)
    aggregates: list = field(default_factory=list)
    world: object = None


def _merged(config) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update({k: str(v) for k, v in config.items()})
    if "out" not in cfg:
        raise ConfigError("config needs an 'out' run directory")
    return cfg


def run_pipeline(config: dict) -> RunResult:
    """Run every analysis stage and write results under ``config['out']``.

    Inputs come from a raw ``corpus`` (extracted first), a ``features``
    file, or ``synth = true`` for a generated world; the latter two also
    need a ``providers`` table unless synthetic. Any failure raises
    :class:`PipelineError` naming the stage.
    """
    cfg = _merged(config)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg["seed"])
    inputs = {}
    world = None
    details = None

    @_stage("inputs")
    def load_inputs():
        nonlocal world, details
        if as_bool(cfg["synth"]):
            spec = default_spec(int(cfg["synth_domains"]), int(cfg["synth_providers"]),
                                int(cfg.get("synth_seed", seed)))
            world = synth_generate(spec)
            domains = [f"d{i:06d}.example" for i in range(world.dataset.n)]
            providers = world.providers
            pids = world.domain_provider.tolist()
            codes = np.asarray(world.dataset.codes)
            dump_provider_table(providers, out / "providers.csv")
            return domains, pids, codes, providers
        if "providers" not in cfg:
            raise ConfigError("config needs 'providers'")
        inputs["providers"] = cfg["providers"]
        providers = load_provider_table(cfg["providers"])
        if "corpus" in cfg:
            inputs["corpus"] = cfg["corpus"]
            if "patch_table" in cfg:
                inputs["patch_table"] = cfg["patch_table"]
                table = load_patch_table(cfg["patch_table"])
            else:
                inputs["patch_table"] = str(default_patch_table_path())
                table = default_patch_table()
            records, errors = load_corpus(cfg["corpus"], int(cfg["page_limit"]))
            for e in errors:
                log.warning("corpus line %d skipped: %s", e.line, e.message)
            rows, det, skipped = extract_corpus(records, table)
            write_features_csv(rows, out / "features.csv")
            write_details_csv(det, out / "details.csv")
            details = [d for _, d in det]
            return ([r.domain for r, _ in rows], [r.provider_id for r, _ in rows],
                    np.asarray([v.as_row() for _, v in rows]), providers)
        if "features" not in cfg:
            raise ConfigError("config needs 'corpus', 'features' or 'synth = true'")
        inputs["features"] = cfg["features"]
        domains, pids, codes = read_features_csv(cfg["features"])
        return domains, pids, np.asarray(codes), providers

    domains, pids, codes, providers = load_inputs()

    @_stage("factor")
    def factor_stage():
        data = feature_dataset(codes)
        k = None if cfg["factors"] == "auto" else int(cfg["factors"])
        model, R = fit_factor_model(
            data, k, replicates=int(cfg["replicates"]), quantile=float(cfg["quantile"]),
            seed=seed, extraction=cfg["extraction"], scores=cfg["score_method"])
        write_factor_model(model, R, out / "model", domains, pids)
        return model, R

    model, R = factor_stage()
    names = model.names

    @_stage("fixed_effects")
    def fe_stage():
        fits = {}
        for j, name in enumerate(names):
            fits[name] = fixed_effects_fit(model.scores[:, j], pids)
        with open(out / "fe.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("factor", "r_squared", "adj_r_squared", "residual_std_error",
                        "group_count", "n", "intercept"))
            for name, f in fits.items():
                w.writerow((name, repr(f.r_squared), repr(f.adj_r_squared), repr(f.residual_std_error),
                            f.group_count, f.n, repr(f.intercept)))
        return fits

    fe = fe_stage()

    @_stage("aggregate")
    def agg_stage():
        aggs = aggregate_providers(pids, codes, providers, model.scores, details, cfg["aggregate"])
        write_aggregates_csv(aggs, out / "aggregates.csv", names)
        return aggs

    aggs = agg_stage()

    @_stage("glm")
    def glm_stage():
        res = {}
        q = as_list(cfg["curve_quantiles"], float)
        for response in as_list(cfg["responses"]):
            models = abuse_models(aggs, response, names)
            write_abuse_models(models, out, response)
            write_effect_curves(models, names, out, response, q, int(cfg["curve_points"]))
            res[response] = models
        return res

    abuse = glm_stage()

    @_stage("landscape")
    def landscape_stage():
        return landscape_report(aggs, out / "landscape")

    landscape_stage()

    extra = {
        "factors": {
            "k": model.k,
            "names": list(names),
            "smoothed": bool(R.smoothed),
            "min_eigenvalue_before": R.min_eigenvalue_before,
            "parallel_k": model.meta.get("parallel_k"),
            "heywood": list(model.heywood),
        },
    }
    seeds = {
        "parallel_analysis": seed,
        "synth": int(cfg.get("synth_seed", seed)) if world is not None else None,
    }
    manifest = write_manifest(out, cfg, seeds, inputs, extra)
    return RunResult(out, manifest, model, R, fe, abuse, aggs, world)
