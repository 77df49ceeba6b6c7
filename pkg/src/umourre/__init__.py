"""Numerical laboratory for commutator estimates on unitary operators."""

from .core import (
    BandWindow,
    ComplexVector,
    ConjugateOp,
    LatticeBanded,
    NormEstimateDiverged,
    RealizationMismatch,
    SpectralWindow,
    SupportCapExceeded,
    UnitaryOp,
    apply,
    commutator,
    heisenberg_conjugate,
    operator_norm,
    spectral_projection,
)
from .cayley import (
    CayleyOperator,
    build_cayley,
    cayley_resolvent,
    inverse_spectral_map,
    mourre_transfer,
    spectral_map,
    verify_identity_a,
    verify_identity_b,
)
from .models import (
    build_cocycle,
    build_dilation,
    build_free_evolution,
    build_model,
    build_shift,
)
from .mourre import (
    MourreCertificate,
    VirialReport,
    certify_mourre,
    count_window_eigenvalues,
    exponential_perturbation,
    perturbed_certificate,
    virial_check,
)

__version__ = "0.1.0"
