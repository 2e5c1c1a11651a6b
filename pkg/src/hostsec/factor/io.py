"""Reading and writing factor-model directories."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def _fmt(v) -> str:
    return repr(float(v))


def write_matrix(path, row_names, col_names, M, first="variable") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([first] + list(col_names))
        for name, row in zip(row_names, np.asarray(M)):
            w.writerow([name] + [_fmt(v) for v in row])


def read_matrix(path):
    """Returns ``(row_names, col_names, matrix)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names, rows = [], []
        for row in reader:
            if row:
                names.append(row[0])
                rows.append([float(v) for v in row[1:]])
    return names, header[1:], np.asarray(rows, dtype=float).reshape(len(rows), len(header) - 1)


def write_scores(path, domains, provider_ids, names, S) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain", "provider_id"] + list(names))
        for d, pid, row in zip(domains, provider_ids, np.asarray(S)):
            w.writerow([d, pid] + [_fmt(v) for v in row])


def read_scores(path):
    """Returns ``(domains, provider_ids, factor_names, scores)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["domain", "provider_id"]:
            raise ValueError(f"{path}: scores file must start with domain,provider_id")
        domains, pids, rows = [], [], []
        for row in reader:
            if row:
                domains.append(row[0])
                pids.append(row[1])
                rows.append([float(v) for v in row[2:]])
    S = np.asarray(rows, dtype=float).reshape(len(rows), len(header) - 2)
    return domains, pids, header[2:], S


def write_factor_model(model, R, out_dir, domains=None, provider_ids=None) -> dict:
    """Write loadings, scores, variance, rotation and correlation files.

    Returns a mapping of file name to path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = model.names
    paths = {}
    paths["loadings.csv"] = out / "loadings.csv"
    M = np.column_stack([model.loadings, model.uniquenesses])
    write_matrix(paths["loadings.csv"], model.columns, list(names) + ["uniqueness"], M)
    paths["variance.csv"] = out / "variance.csv"
    write_matrix(paths["variance.csv"], ["ss_loadings", "proportion_var", "cumulative_var"], names,
                 np.vstack([model.ss_loadings, model.proportion_var, model.cumulative_var]), first="statistic")
    paths["correlation.csv"] = out / "correlation.csv"
    write_matrix(paths["correlation.csv"], R.columns, R.columns, R.values)
    paths["rotation.csv"] = out / "rotation.csv"
    write_matrix(paths["rotation.csv"], names, names, model.rotation, first="factor")
    if model.scores is not None:
        n = model.scores.shape[0]
        paths["scores.csv"] = out / "scores.csv"
        write_scores(paths["scores.csv"],
                     domains if domains is not None else [str(i) for i in range(n)],
                     provider_ids if provider_ids is not None else [""] * n,
                     names, model.scores)
    return paths
