from .core import (BUILTIN_ESTIMATORS, BZ, H, LZ, PSI, REGISTRY, RESERVED_ESTIMATORS, ZIP,
                   ByteWindow, ComplexityEstimate, EstimatorRegistry, binary_entropy,
                   estimate_bzip, estimate_entropy, estimate_lz, estimate_psi, estimate_zip,
                   occam_likelihood_ratio, parse_estimator_id, register_estimator,
                   run_estimator, spectral_entropy)

__all__ = [
    "BUILTIN_ESTIMATORS", "BZ", "H", "LZ", "PSI", "REGISTRY", "RESERVED_ESTIMATORS", "ZIP",
    "ByteWindow", "ComplexityEstimate", "EstimatorRegistry", "binary_entropy",
    "estimate_bzip", "estimate_entropy", "estimate_lz", "estimate_psi", "estimate_zip",
    "occam_likelihood_ratio", "parse_estimator_id", "register_estimator",
    "run_estimator", "spectral_entropy",
]
