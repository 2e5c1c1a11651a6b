"""Live measurement client producing corpus records."""
from .client import (ScanResult, fetch_domain_pages, grab_ssh_banner, probe_admin_ports, read_targets,
                     scan_domain, scan_many)
from .policy import ScanPolicy, load_policy, parse_policy, policy_from_mapping
from .throttle import HostThrottle
from .tls import probe_tls_protocols
