"""Operator scaling Gaussian random fields: pseudo-norms, spectral densities,
covariance quadrature, lattice synthesis and statistical checks."""
from .linalg import (AnisotropyMatrix, DefectiveMatrix, DomainError, GenericBlock, InvalidMatrix,
                     JordanSpec, expm, jordan_assemble, jordan_decompose, lambda_min, mat_pow)
from .pseudonorm import (Assembled, Euclidean, Generic1, Generic2, Generic3, Generic4, PseudoNorm,
                         RotationPhase, Transferred, radial_project, recover_g, transfer)
from .spectral import (CovarianceResult, InadmissibleError, Quadrature, SpectralDensity,
                       admissible, covariance, integrability_check, variogram)
from .synthesis import (FieldRealization, GridSpec, LatticeModel, SynthesisParams, synthesize,
                        synthesize_many)
from .analysis import (covariance_scaling_check, empirical_variogram, scaling_test,
                       stationarity_test)

__version__ = "0.1.0"
