"""Desk-scale zero-temperature Hopfield simulator on bit-packed patterns."""
from .dynamics import (DynamicsResult, FixedPoint, ProbeResult, descent_probe, effective_fields,
                       energy, energy_numerator, field_numerators, is_fixed_point,
                       is_shell_local_min, run_dynamics, tilde_fields)
from .montecarlo import (McEstimate, RetrievalStats, mc_fixed_probability, retrieval_error,
                         wilson_interval)
from .patterns import (PatternSet, SpinState, flip_config, flip_count, gen_patterns,
                       pattern_set_from_signs)

__all__ = [
    "DynamicsResult", "FixedPoint", "McEstimate", "PatternSet", "ProbeResult", "RetrievalStats",
    "SpinState", "descent_probe", "effective_fields", "energy", "energy_numerator",
    "field_numerators", "flip_config", "flip_count", "gen_patterns", "is_fixed_point",
    "is_shell_local_min", "mc_fixed_probability", "pattern_set_from_signs", "retrieval_error",
    "run_dynamics", "tilde_fields", "wilson_interval",
]
