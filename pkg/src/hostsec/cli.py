"""Command-line entry point.

Every subcommand reads its options from flags or from a ``--config`` file
of ``key = value`` lines whose keys match the long flag names (``-``
and ``_`` are interchangeable). Flags win over the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, as_list, load_config

log = logging.getLogger("hostsec")

REQUIRED = {
    "scan": ("domains", "out"),
    "extract": ("corpus", "out"),
    "fa": ("features", "out"),
    "fe": ("scores", "out"),
    "glm": ("response", "features_agg", "out"),
    "synth": ("out",),
    "report": ("features", "providers", "out"),
    "pipeline": ("out",),
}


class UsageError(Exception):
    pass


def cmd_scan(a):
    from .corpus import dump_corpus
    from .scanner import ScanPolicy, load_policy, read_targets, scan_many

    policy = load_policy(a.policy) if a.policy else ScanPolicy()
    targets = read_targets(a.domains)
    n_err = 0

    def report(res):
        nonlocal n_err
        for e in res.errors:
            n_err += 1
            log.warning("%s: %s", res.record.domain, e)

    results = scan_many(targets, policy, collector=report)
    n = dump_corpus([r.record for r in results], a.out)
    log.info("wrote %d records to %s (%d errors)", n, a.out, n_err)


def cmd_extract(a):
    from .corpus import default_patch_table, load_corpus, load_patch_table
    from .features.vector import extract_corpus, write_details_csv, write_features_csv

    table = load_patch_table(a.patch_table) if a.patch_table else default_patch_table()
    records, errors = load_corpus(a.corpus, int(a.page_limit or 20))
    for e in errors:
        log.warning("corpus line %d skipped: %s", e.line, e.message)
    rows, details, skipped = extract_corpus(records, table)
    write_features_csv(rows, a.out)
    if a.details:
        write_details_csv(details, a.details)
    log.info("%d domains extracted, %d undescribable, %d bad lines", len(rows), len(skipped), len(errors))


def cmd_fa(a):
    from .factor import fit_factor_model
    from .factor.io import write_factor_model
    from .features import read_features_csv
    from .pipeline.run import feature_dataset, write_manifest

    domains, pids, codes = read_features_csv(a.features)
    k = None if (a.factors or "auto") == "auto" else int(a.factors)
    seed = int(a.seed or 0)
    opts = {"replicates": int(a.replicates or 50), "quantile": float(a.quantile or 0.95),
            "extraction": a.extraction or "minres", "scores": a.score_method or "regression"}
    model, R = fit_factor_model(feature_dataset(codes), k, seed=seed, **opts)
    out = Path(a.out)
    write_factor_model(model, R, out, domains, pids)
    cfg = {"features": str(a.features), "factors": a.factors or "auto", "seed": str(seed),
           **{k_: str(v) for k_, v in opts.items()}}
    write_manifest(out, cfg, {"parallel_analysis": seed}, {"features": a.features},
                   {"factors": {"k": model.k, "parallel_k": model.meta.get("parallel_k"),
                                "smoothed": bool(R.smoothed), "heywood": list(model.heywood)}})
    log.info("retained %d factors", model.k)


def cmd_fe(a):
    from .factor.io import read_scores
    from .regress import fixed_effects_fit

    _, pids, names, S = read_scores(a.scores)
    with open(a.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("factor", "r_squared", "adj_r_squared", "residual_std_error", "group_count", "n",
                    "intercept"))
        for j, name in enumerate(names):
            f = fixed_effects_fit(S[:, j], pids)
            w.writerow((name, repr(f.r_squared), repr(f.adj_r_squared), repr(f.residual_std_error),
                        f.group_count, f.n, repr(f.intercept)))
            print(f"{name}: R2 = {f.r_squared:.3f}")


def _design(aggs, factor_names, covariates):
    from .features.vector import FEATURE_ORDER

    cols = {"log10_domains": [a.log10_domains for a in aggs], "log10_ips": [a.log10_ips for a in aggs]}
    for j, name in enumerate(factor_names):
        cols[name] = [a.mean_scores[j] for a in aggs]
    for j, c in enumerate(FEATURE_ORDER):
        cols[f"prev_{c}"] = [a.feature_prevalence[j] for a in aggs]
    missing = [c for c in covariates if c not in cols]
    if missing:
        raise UsageError(f"unknown covariates {missing}; available: {sorted(cols)}")
    return np.column_stack([np.ones(len(aggs))] + [np.asarray(cols[c], float) for c in covariates])


def cmd_glm(a):
    from dataclasses import replace

    from .corpus import load_provider_table
    from .pipeline.landscape import log10_size, read_aggregates_csv
    from .regress import glm_quasipoisson
    from .regress.glm import coefficient_table

    if a.response not in ("phishing", "malware"):
        raise UsageError("--response must be phishing or malware")
    aggs, names = read_aggregates_csv(a.features_agg)
    if a.providers:
        # the provider table is authoritative for sizes and abuse counts
        table = load_provider_table(a.providers)
        missing = [x.provider_id for x in aggs if x.provider_id not in table]
        if missing:
            raise UsageError(f"providers missing from table: {missing}")
        aggs = [replace(x, log10_domains=log10_size(table[x.provider_id].domain_count),
                        log10_ips=log10_size(table[x.provider_id].ip_count),
                        phishing_count=table[x.provider_id].phishing_count,
                        malware_count=table[x.provider_id].malware_count) for x in aggs]
    covs = tuple(as_list(a.covariates or "log10_domains,log10_ips"))
    X = _design(aggs, names, covs)
    y = np.array([getattr(x, f"{a.response}_count") for x in aggs], float)
    fit = glm_quasipoisson(y, X, ("(Intercept)",) + covs)
    table_rows = coefficient_table(fit)
    doc = {"response": a.response, "covariates": list(covs), **fit.as_dict(),
           "coefficient_table": [dict(zip(("term", "estimate", "std_error", "t", "p", "stars"), r))
                                 for r in table_rows]}
    out = Path(a.out)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out.with_suffix(".csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("term", "estimate", "std_error", "t", "p", "stars"))
        for name, b, se, t, pv, st in table_rows:
            w.writerow((name, repr(b), repr(se), repr(t), repr(pv), st))
    for name, b, se, _, _, st in table_rows:
        print(f"{name:<28} {b:>10.4f}{st:<3} ({se:.4f})")
    print(f"dispersion {fit.dispersion:.3f}  pseudo R2 {fit.pseudo_r2:.4f}")


def cmd_synth(a):
    from .corpus import dump_provider_table
    from .factor.io import write_scores
    from .features.vector import FEATURE_ORDER
    from .pipeline.run import write_manifest
    from .pipeline.synth import default_spec, synth_generate

    seed = int(a.seed or 0)
    spec = default_spec(int(a.n_domains or 10_000), int(a.n_providers or 200), seed)
    world = synth_generate(spec)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    domains = [f"d{i:06d}.example" for i in range(world.dataset.n)]
    with open(out / "features.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("domain", "provider_id") + FEATURE_ORDER)
        for d, pid, row in zip(domains, world.domain_provider.tolist(), np.asarray(world.dataset.codes)):
            w.writerow([d, pid] + row.tolist())
    dump_provider_table(world.providers, out / "providers.csv")
    write_scores(out / "true_scores.csv", domains, world.domain_provider.tolist(),
                 [f"F{j + 1}" for j in range(spec.k)], world.true_scores)
    write_manifest(out, {"n_domains": str(spec.n_domains), "n_providers": str(spec.n_providers)},
                   {"synth": seed}, {})


def cmd_report(a):
    from .corpus import load_provider_table
    from .features import read_features_csv
    from .pipeline.landscape import aggregate_providers, landscape_report, write_aggregates_csv

    domains, pids, codes = read_features_csv(a.features)
    table = load_provider_table(a.providers)
    scores, names = None, ()
    if a.scores:
        from .factor.io import read_scores

        sdom, _, names, S = read_scores(a.scores)
        if list(sdom) != list(domains):
            raise UsageError("scores rows do not line up with feature rows")
        scores = S
    details = _read_details(a.details) if a.details else None
    aggs = aggregate_providers(pids, np.asarray(codes), table, scores, details, a.statistic or "mean")
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_aggregates_csv(aggs, out / "aggregates.csv", names)
    res = landscape_report(aggs, out)
    print((out / "summary.txt").read_text(encoding="utf-8"), end="")
    log.info("%d providers, %d domains", len(aggs), res["total"])


def _read_details(path):
    from .features.vector import SOFTWARE_FIELDS

    with open(path, newline="", encoding="utf-8") as fh:
        return [{c: row[c] for c in SOFTWARE_FIELDS} for row in csv.DictReader(fh)]


def cmd_pipeline(a):
    from .pipeline import run_pipeline

    res = run_pipeline(a.run_config)
    print(f"k = {res.model.k}; outputs in {res.out_dir}")


COMMANDS = {
    "scan": cmd_scan, "extract": cmd_extract, "fa": cmd_fa, "fe": cmd_fe, "glm": cmd_glm,
    "synth": cmd_synth, "report": cmd_report, "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value option file")
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="hostsec", parents=[common],
                                description="Hosting security measurement and analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scan", parents=[common], help="crawl and probe live domains")
    s.add_argument("--domains", help="domain,provider_id lines")
    s.add_argument("--policy", help="scan policy file")
    s.add_argument("--out", help="corpus file to write")

    s = sub.add_parser("extract", parents=[common], help="corpus to feature vectors")
    s.add_argument("--corpus")
    s.add_argument("--patch-table")
    s.add_argument("--page-limit")
    s.add_argument("--details", help="also write per-domain software status")
    s.add_argument("--out")

    s = sub.add_parser("fa", parents=[common], help="polychoric factor analysis")
    s.add_argument("--features")
    s.add_argument("--factors", help="auto or a count")
    s.add_argument("--replicates")
    s.add_argument("--quantile")
    s.add_argument("--seed")
    s.add_argument("--extraction", choices=("minres", "principal_axis"))
    s.add_argument("--score-method", choices=("regression", "bartlett"))
    s.add_argument("--out", help="model directory")

    s = sub.add_parser("fe", parents=[common], help="provider fixed effects per factor")
    s.add_argument("--scores")
    s.add_argument("--out")

    s = sub.add_parser("glm", parents=[common], help="quasi-Poisson abuse regression")
    s.add_argument("--response")
    s.add_argument("--covariates", help="comma-separated aggregate columns")
    s.add_argument("--features-agg", help="provider aggregates CSV")
    s.add_argument("--providers")
    s.add_argument("--out", help="fit JSON; coefficients also go to a sibling .csv")

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic world")
    s.add_argument("--n-domains")
    s.add_argument("--n-providers")
    s.add_argument("--seed")
    s.add_argument("--out")

    s = sub.add_parser("report", parents=[common], help="provider aggregates and landscape tables")
    s.add_argument("--features")
    s.add_argument("--providers")
    s.add_argument("--scores")
    s.add_argument("--details")
    s.add_argument("--statistic", choices=("mean", "median"))
    s.add_argument("--out")

    s = sub.add_parser("pipeline", parents=[common], help="full analysis from a run config")
    s.add_argument("--out")
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config entry")
    return p


def resolve_args(a) -> argparse.Namespace:
    """Fill unset flags from the config file and check required ones."""
    cfg = load_config(a.config) if getattr(a, "config", None) else {}
    if a.command == "pipeline":
        run = dict(cfg)
        for item in a.set:
            if "=" not in item:
                raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            run[k.strip().lower().replace("-", "_")] = v.strip()
        if a.out:
            run["out"] = a.out
        a.run_config = run
        a.out = run.get("out")
    else:
        for key, value in cfg.items():
            if hasattr(a, key) and getattr(a, key) is None:
                setattr(a, key, value)
    missing = [k for k in REQUIRED[a.command] if not getattr(a, k, None)]
    if missing:
        raise UsageError("missing " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return a


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    level = logging.WARNING - 10 * getattr(a, "verbose", 0)
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    try:
        resolve_args(a)
    except (UsageError, ConfigError) as exc:
        parser.error(str(exc))
    try:
        COMMANDS[a.command](a)
    except UsageError as exc:
        print(f"hostsec {a.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError, ArithmeticError, KeyError) as exc:
        print(f"hostsec {a.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
