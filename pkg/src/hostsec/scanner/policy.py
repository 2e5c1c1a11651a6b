"""Scan policy and its key=value file format."""
from __future__ import annotations

from dataclasses import dataclass, field, fields

from ..config import ConfigError, as_bool, as_list, load_config, parse_config

DEFAULT_USER_AGENT = (
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 "
    "(KHTML, like Gecko) Chrome/54.0.2840.99 Safari/537.36"
)
DEFAULT_ADMIN_PORTS = (2082, 2083, 2086, 2087, 8443, 2222, 10000)
DEFAULT_ADMIN_PATHS = ("/panel/",)


@dataclass(frozen=True)
class ScanPolicy:
    """Limits and targets for one scan.

    Times are in milliseconds. ``hosts`` pins names to addresses (like an
    /etc/hosts file); the ``*_port`` fields move the standard services,
    which is how the test fixtures run on unprivileged ports.
    """

    page_limit: int = 20
    per_host_delay: float = 1000.0
    timeout: float = 10000.0
    max_parallel_hosts: int = 8
    admin_ports: tuple = DEFAULT_ADMIN_PORTS
    admin_paths: tuple = DEFAULT_ADMIN_PATHS
    probe_tls: bool = False
    user_agent: str = DEFAULT_USER_AGENT
    max_redirects: int = 5
    max_body_bytes: int = 2_000_000
    excerpt_bytes: int = 4096
    http_port: int = 80
    https_port: int = 443
    ssh_port: int = 22
    tls_admin_ports: tuple = (2083, 2087, 8443, 10000)
    hosts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.page_limit < 1:
            raise ConfigError("page_limit must be at least 1")
        if self.per_host_delay < 0:
            raise ConfigError("per_host_delay must be nonnegative")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_parallel_hosts < 1:
            raise ConfigError("max_parallel_hosts must be at least 1")
        if not 0 <= self.max_redirects <= 5:
            raise ConfigError("max_redirects must be between 0 and 5")

    @property
    def timeout_s(self) -> float:
        return self.timeout / 1000.0

    @property
    def delay_s(self) -> float:
        return self.per_host_delay / 1000.0


_INT = {"page_limit", "max_parallel_hosts", "max_redirects", "max_body_bytes", "excerpt_bytes",
        "http_port", "https_port", "ssh_port"}
_FLOAT = {"per_host_delay", "timeout"}
_PORTS = {"admin_ports", "tls_admin_ports"}


def policy_from_mapping(values: dict) -> ScanPolicy:
    """Build a policy from string values; unknown keys are an error.

    ``hosts`` takes comma-separated ``name=address`` pairs.
    """
    known = {f.name for f in fields(ScanPolicy)}
    kw = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"unknown policy key {key!r}")
        try:
            if key in _INT:
                kw[key] = int(raw)
            elif key in _FLOAT:
                kw[key] = float(raw)
            elif key in _PORTS:
                kw[key] = tuple(as_list(raw, int))
            elif key == "admin_paths":
                kw[key] = tuple(as_list(raw))
            elif key == "probe_tls":
                kw[key] = as_bool(raw)
            elif key == "hosts":
                pairs = [p.split("=", 1) for p in as_list(raw)] if isinstance(raw, str) else raw.items()
                kw[key] = {k.strip().lower(): v.strip() for k, v in pairs}
            else:
                kw[key] = str(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return ScanPolicy(**kw)


def parse_policy(text: str) -> ScanPolicy:
    # hosts values contain '=' so they are split after the key
    return policy_from_mapping(parse_config(text, "<policy>"))


def load_policy(path) -> ScanPolicy:
    return policy_from_mapping(load_config(path))
