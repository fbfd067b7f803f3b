"""Model layer: families, sources, exponent calculus, problem assembly."""

from .exponents import (
    INADMISSIBLE,
    PROOF_GAP,
    THM1,
    THM2_ENDPOINT_I,
    THM2_ENDPOINT_II,
    THM2_INTERIOR,
    ExponentTable,
    ProofGap,
    Thm2Exponents,
    build_exponent_table,
    classify_regime,
    effective_sobolev_dimension,
    endpoint_exponent,
    theorem1_alpha_prime,
    theorem1_exponents,
    theorem2_exponents,
    to_fraction,
)
from .families import (
    AssumptionReport,
    CoefficientFamily,
    GrowthReport,
    HamiltonianFamily,
    PerturbedPower,
    PowerDiffusion,
    PowerHamiltonian,
    check_growth_conditions,
    check_structure_conditions,
    eval_diffusion,
    eval_hamiltonian,
)
from .problem import ProblemSpec
from .sources import (
    CosineProduct,
    RadialSingular,
    Scaled,
    SeededSmoothRandom,
    SourceSpec,
    Tabulated,
    lq_membership,
    sample_source,
)

__all__ = [
    "AssumptionReport",
    "CoefficientFamily",
    "CosineProduct",
    "ExponentTable",
    "GrowthReport",
    "HamiltonianFamily",
    "INADMISSIBLE",
    "PROOF_GAP",
    "PerturbedPower",
    "PowerDiffusion",
    "PowerHamiltonian",
    "ProblemSpec",
    "ProofGap",
    "RadialSingular",
    "Scaled",
    "SeededSmoothRandom",
    "SourceSpec",
    "THM1",
    "THM2_ENDPOINT_I",
    "THM2_ENDPOINT_II",
    "THM2_INTERIOR",
    "Tabulated",
    "Thm2Exponents",
    "build_exponent_table",
    "check_growth_conditions",
    "check_structure_conditions",
    "classify_regime",
    "effective_sobolev_dimension",
    "endpoint_exponent",
    "eval_diffusion",
    "eval_hamiltonian",
    "lq_membership",
    "sample_source",
    "theorem1_alpha_prime",
    "theorem1_exponents",
    "theorem2_exponents",
    "to_fraction",
]
