"""Aggregation, reporting, synthetic worlds and the end-to-end run."""
from .landscape import ProviderAggregate, aggregate_providers, histogram, landscape_report, log10_size
from .run import PipelineError, RunResult, abuse_models, run_pipeline
from .synth import AbuseBetas, SynthSpec, SynthWorld, default_spec, simple_structure, synth_generate
from .validate import congruence_matrix, match_factors, tucker_congruence
