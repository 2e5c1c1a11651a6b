"""Per-domain security indicators and software patch status."""
from .fingerprint import (
    SoftwareFingerprint,
    fingerprint_admin_panel,
    fingerprint_cms,
    fingerprint_stack,
    normalize_version,
)
from .indicators import (
    HeaderIndicators,
    detect_mixed_content,
    detect_ssl_stripping_form,
    extract_header_indicators,
)
from .patch import classify_patch_status, classify_ssl, software_status
from .vector import (
    FEATURE_ORDER,
    FeatureVector,
    UndescribableDomain,
    build_feature_vector,
    extract_corpus,
    read_features_csv,
    write_features_csv,
)
