"""Synthetic hosting worlds with known factors, provider effects and abuse."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ..corpus import ProviderRow, ProviderTable
from ..factor.polychoric import OrdinalDataset, ThresholdSet


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class AbuseBetas:
    intercept: float
    size_slopes: tuple  # (log10 domains, log10 ips)
    factor_slopes: tuple

    @classmethod
    def coerce(cls, value):
        if value is None or isinstance(value, cls):
            return value
        b0, sizes, factors = value
        return cls(float(b0), tuple(map(float, sizes)), tuple(map(float, factors)))


@dataclass(frozen=True)
class SynthSpec:
    """Generator settings.

    ``provider_effect_strength[j]`` is the share of factor ``j``'s variance
    that comes from a per-provider offset; 0 gives purely idiosyncratic
    factors and 1 a factor that is constant within each provider.
    ``provider_defaults`` entries ``(column, n_providers, rate)`` force a
    column to its top category with probability ``rate`` on that many
    randomly chosen providers.
    """

    n_domains: int
    n_providers: int
    loadings: np.ndarray
    thresholds: ThresholdSet
    provider_effect_strength: tuple
    abuse_betas: AbuseBetas
    seed: int = 0
    columns: Optional[tuple] = None
    malware_betas: Optional[AbuseBetas] = None
    overdispersion: float = 0.0
    provider_defaults: tuple = ()
    log10_domains: tuple = (4.0, 0.8)
    log10_ips: tuple = (2.14, 0.6)
    size_correlation: float = 0.6

    def __post_init__(self):
        L = np.asarray(self.loadings, dtype=float)
        if L.ndim != 2:
            raise SynthError("loadings must be a p x k matrix")
        object.__setattr__(self, "loadings", L)
        p, k = L.shape
        comm = np.sum(L ** 2, axis=1)
        if np.any(comm > 1.0 + 1e-12):
            raise SynthError(f"communality above 1 for rows {np.flatnonzero(comm > 1.0 + 1e-12).tolist()}")
        th = self.thresholds
        if not isinstance(th, ThresholdSet):
            cols = self.columns or tuple(f"V{j + 1}" for j in range(p))
            th = ThresholdSet(tuple(cols), tuple(tuple(map(float, t)) for t in th))
            object.__setattr__(self, "thresholds", th)
        if len(th.values) != p:
            raise SynthError("need one threshold list per loading row")
        if self.columns is None:
            object.__setattr__(self, "columns", th.columns)
        s = tuple(float(v) for v in np.broadcast_to(self.provider_effect_strength, (k,)))
        if any(v < 0 or v > 1 for v in s):
            raise SynthError("provider_effect_strength must lie in [0, 1]")
        object.__setattr__(self, "provider_effect_strength", s)
        ab = AbuseBetas.coerce(self.abuse_betas)
        if len(ab.size_slopes) != 2 or len(ab.factor_slopes) != k:
            raise SynthError("abuse_betas need 2 size slopes and one slope per factor")
        object.__setattr__(self, "abuse_betas", ab)
        object.__setattr__(self, "malware_betas", AbuseBetas.coerce(self.malware_betas))
        if self.n_providers < 1 or self.n_domains < self.n_providers:
            raise SynthError("need n_domains >= n_providers >= 1")

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    @property
    def k(self) -> int:
        return self.loadings.shape[1]

    def category_counts(self):
        return tuple(len(t) + 1 for t in self.thresholds.values)


class SynthWorld(NamedTuple):
    dataset: OrdinalDataset
    providers: ProviderTable
    true_scores: np.ndarray
    domain_provider: np.ndarray
    provider_means: np.ndarray  # rows follow providers.ids()


# stream names, one child seed each, so adding a stream never shifts the others
STREAMS = ("assignment", "offsets", "idiosyncratic", "noise", "defaults", "sizes", "phishing", "malware")


def provider_ids(n: int):
    width = max(4, len(str(n)))
    return [f"P{i + 1:0{width}d}" for i in range(n)]


def _abuse(rng, betas: AbuseBetas, log_dom, log_ip, means, overdispersion):
    eta = (betas.intercept + betas.size_slopes[0] * log_dom + betas.size_slopes[1] * log_ip
           + means @ np.asarray(betas.factor_slopes))
    mu = np.exp(eta)
    if overdispersion > 0:
        shape = 1.0 / overdispersion
        mu = mu * rng.gamma(shape, 1.0 / shape, size=mu.shape)
    return rng.poisson(mu)


def synth_generate(spec: SynthSpec) -> SynthWorld:
    """Draw one synthetic world from ``spec``.

    Returns
    -------
    SynthWorld
        ``dataset`` holds the coded indicators, ``providers`` the size and
        abuse table, ``true_scores`` the latent factors per domain.
    """
    streams = dict(zip(STREAMS, np.random.SeedSequence(spec.seed).spawn(len(STREAMS))))
    rngs = {k: np.random.default_rng(v) for k, v in streams.items()}
    n, G, p, k = spec.n_domains, spec.n_providers, spec.p, spec.k

    # every provider gets at least one domain
    g = np.concatenate([np.arange(G), rngs["assignment"].integers(0, G, size=n - G)])
    rngs["assignment"].shuffle(g)

    s = np.asarray(spec.provider_effect_strength)
    offsets = rngs["offsets"].standard_normal((G, k))
    e = rngs["idiosyncratic"].standard_normal((n, k))
    F = np.sqrt(s) * offsets[g] + np.sqrt(1.0 - s) * e
    # standardize in-sample so the coded marginals sit on the configured thresholds
    F = (F - F.mean(axis=0)) / F.std(axis=0)

    L = spec.loadings
    uniq = 1.0 - np.sum(L ** 2, axis=1)
    X = F @ L.T + rngs["noise"].standard_normal((n, p)) * np.sqrt(uniq)
    codes = np.empty((n, p), dtype=np.int32)
    for j, t in enumerate(spec.thresholds.values):
        codes[:, j] = np.searchsorted(np.asarray(t), X[:, j])

    for column, count, rate in spec.provider_defaults:
        j = spec.columns.index(column) if isinstance(column, str) else int(column)
        chosen = rngs["defaults"].choice(G, size=int(count), replace=False)
        hit = np.isin(g, chosen) & (rngs["defaults"].random(n) < rate)
        codes[hit, j] = len(spec.thresholds.values[j])

    counts = np.bincount(g, minlength=G)
    means = np.zeros((G, k))
    np.add.at(means, g, F)
    means /= counts[:, None]

    z = rngs["sizes"].standard_normal((G, 2))
    rho = spec.size_correlation
    log_dom = spec.log10_domains[0] + spec.log10_domains[1] * z[:, 0]
    log_ip = spec.log10_ips[0] + spec.log10_ips[1] * (rho * z[:, 0] + np.sqrt(1 - rho ** 2) * z[:, 1])
    dom = np.maximum(np.round(10.0 ** log_dom), counts).astype(np.int64)
    ips = np.maximum(np.round(10.0 ** log_ip), 1).astype(np.int64)
    lx_dom = np.log10(dom)
    lx_ip = np.log10(ips)
    phishing = _abuse(rngs["phishing"], spec.abuse_betas, lx_dom, lx_ip, means, spec.overdispersion)
    mal_betas = spec.malware_betas or spec.abuse_betas
    malware = _abuse(rngs["malware"], mal_betas, lx_dom, lx_ip, means, spec.overdispersion)

    ids = provider_ids(G)
    rows = {pid: ProviderRow(pid, int(ips[i]), int(dom[i]), int(phishing[i]), int(malware[i]))
            for i, pid in enumerate(ids)}
    data = OrdinalDataset(spec.columns, codes, spec.category_counts())
    return SynthWorld(data, ProviderTable(rows), F, np.asarray(ids)[g], means)


def simple_structure(p: int, k: int, loading: float) -> np.ndarray:
    """Each variable loads ``loading`` on factor ``j mod k`` only."""
    L = np.zeros((p, k))
    L[np.arange(p), np.arange(p) % k] = loading
    return L


def default_spec(n_domains=10_000, n_providers=200, seed=0, **overrides) -> SynthSpec:
    """Fifteen indicators in ``FEATURE_ORDER``, four factors.

    Factors 1 and 2 are webmaster-driven (small provider share), factors 3
    and 4 provider-driven. Factors 2 and 4 lower abuse.
    """
    from ..features.vector import FEATURE_ORDER

    L = np.zeros((15, 4))
    blocks = {0: range(0, 4), 1: range(4, 9), 2: range(9, 12), 3: range(12, 15)}
    for j, rows in blocks.items():
        L[list(rows), j] = 0.7
    binary = [(0.4,), (0.6,), (0.3,), (0.8,), (0.9,), (1.0,), (1.0,), (0.2,), (0.9,)]
    ordinal = [(-0.4, 0.3), (-0.6, 0.5), (-0.2, 0.6), (-0.5, 0.2), (-0.3, 0.4), (-0.7, 0.1)]
    params = dict(
        n_domains=n_domains, n_providers=n_providers, loadings=L,
        thresholds=binary + ordinal, columns=FEATURE_ORDER,
        provider_effect_strength=(0.05, 0.05, 0.6, 0.5),
        abuse_betas=AbuseBetas(-5.6, (1.5, 0.69), (0.0, -1.1, 0.0, -1.1)),
        seed=seed,
    )
    params.update(overrides)
    return SynthSpec(**params)
