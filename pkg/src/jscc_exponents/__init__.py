"""Error exponents of joint source-channel coding with class-based codeword compositions."""

from .channel import (
    BhattacharyyaMatrix,
    bhattacharyya,
    eex_ckm_primal,
    eex_prime_from_dual,
    eex_prime_primal,
    ex_prime_dual,
    ex_prime_dual_curve,
    ex_prime_dual_max,
    ex_single_dual,
    ex_single_dual_max,
)
from .config import (
    ScenarioConfig,
    load_preset,
    parse_config,
    preset_names,
    validate_config,
)
from .hull import ExponentCurve, biconjugate_eval, upper_concave_hull
from .joint import (
    CodewordFamily,
    TypeExponentTable,
    channel_max_curve,
    csiszar_dual_exponent,
    dual_family_exponent,
    joint_exponent_EJ1,
    joint_exponent_EJ2,
    joint_exponent_primal,
    per_type_exponent_table,
    single_class_dual_exponent,
)
from .oracle import brute_force_ckm_exponent, brute_force_weak_exponent, duality_report
from .partition import (
    ClassParams,
    PartitionPlan,
    assign_classes,
    build_two_class_plan,
    build_type_plan,
    check_feasibility,
    two_class_threshold,
)
from .prob import Channel, Distribution, ValidationError, enumerate_types
from .sim import (
    Codebook,
    SimResult,
    decode,
    estimate_error,
    expurgate_best_of,
    quantize_composition,
    sample_codebook,
)
from .source import (
    gallager_source_fn,
    source_reliability_dual,
    source_reliability_primal,
)

__all__ = [
    "assign_classes",
    "bhattacharyya",
    "BhattacharyyaMatrix",
    "biconjugate_eval",
    "brute_force_ckm_exponent",
    "brute_force_weak_exponent",
    "build_two_class_plan",
    "build_type_plan",
    "Channel",
    "channel_max_curve",
    "check_feasibility",
    "ClassParams",
    "Codebook",
    "CodewordFamily",
    "csiszar_dual_exponent",
    "decode",
    "Distribution",
    "dual_family_exponent",
    "duality_report",
    "eex_ckm_primal",
    "eex_prime_from_dual",
    "eex_prime_primal",
    "enumerate_types",
    "estimate_error",
    "ex_prime_dual",
    "ex_prime_dual_curve",
    "ex_prime_dual_max",
    "ex_single_dual",
    "ex_single_dual_max",
    "ExponentCurve",
    "expurgate_best_of",
    "gallager_source_fn",
    "joint_exponent_EJ1",
    "joint_exponent_EJ2",
    "joint_exponent_primal",
    "load_preset",
    "parse_config",
    "PartitionPlan",
    "per_type_exponent_table",
    "preset_names",
    "quantize_composition",
    "sample_codebook",
    "ScenarioConfig",
    "SimResult",
    "single_class_dual_exponent",
    "source_reliability_dual",
    "source_reliability_primal",
    "two_class_threshold",
    "TypeExponentTable",
    "upper_concave_hull",
    "validate_config",
    "ValidationError",
]
