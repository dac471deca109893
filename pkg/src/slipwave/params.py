"""Physical parameters, slip laws, and boundary-mode selection.

Viscosity and gravity are normalized to one throughout.  The slip matrix
``beta`` must have positive-definite symmetric part; the adjoint boundary
mode always pairs the transposed matrix with the negated wave speed.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SlipLaw", "PhysicalParams", "BoundaryMode", "beta_is_coercive"]


def beta_is_coercive(beta):
    """True when the symmetric part of beta is positive definite."""
    beta = np.asarray(beta, dtype=float)
    sym = 0.5 * (beta + beta.T)
    return bool(np.linalg.eigvalsh(sym).min() > 0.0)


@dataclass(frozen=True)
class SlipLaw:
    """Bottom slip law: linear w -> beta w, or a nonlinear map A.

    For nonlinear laws, ``func`` is a smooth map R^n -> R^n with A(0) = 0;
    ``theta`` and ``delta`` are the coercivity constant and radius of the ball
    on which A(w) . w >= theta |w|^2 is expected to hold.
    """

    kind: str = "linear"
    func: object = None
    theta: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "nonlinear"):
            raise ValueError("slip law kind must be 'linear' or 'nonlinear'")
        if self.kind == "nonlinear" and self.func is None:
            raise ValueError("nonlinear slip law needs a map")

    @property
    def is_linear(self):
        return self.kind == "linear"

    def evaluate(self, w, beta):
        """Apply the law to trace values w of shape (..., n)."""
        if self.is_linear:
            return np.einsum("ij,...j->...i", beta, w)
        return np.apply_along_axis(self.func, -1, np.asarray(w, dtype=float))


class BoundaryMode(enum.Enum):
    """Bottom boundary closure of the per-frequency problem."""

    SLIP = "slip"
    NOSLIP = "noslip"
    ADJOINT_SLIP = "adjoint-slip"
    ADJOINT_NOSLIP = "adjoint-noslip"

    @property
    def is_adjoint(self):
        return self in (BoundaryMode.ADJOINT_SLIP, BoundaryMode.ADJOINT_NOSLIP)

    @property
    def is_noslip(self):
        return self in (BoundaryMode.NOSLIP, BoundaryMode.ADJOINT_NOSLIP)

    @property
    def adjoint(self):
        return {
            BoundaryMode.SLIP: BoundaryMode.ADJOINT_SLIP,
            BoundaryMode.NOSLIP: BoundaryMode.ADJOINT_NOSLIP,
        }[self]


@dataclass(frozen=True, eq=False)
class PhysicalParams:
    """Continuum parameters of the traveling-wave problem.

    b: strip depth; sigma: surface tension (>= 0, with sigma = 0 only
    meaningful for one horizontal dimension); gamma: wave speed; alpha: slip
    parameter (> 0); beta: n x n slip matrix, coercive; slip_law: bottom law,
    linear by default.
    """

    b: float
    sigma: float
    gamma: float
    alpha: float
    beta: np.ndarray
    slip_law: SlipLaw = field(default_factory=SlipLaw)

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if self.b <= 0:
            raise ValueError("depth b must be positive")
        if self.sigma < 0:
            raise ValueError("surface tension must be nonnegative")
        if self.alpha <= 0:
            raise ValueError("slip parameter alpha must be positive")
        if self.beta.ndim != 2 or self.beta.shape[0] != self.beta.shape[1]:
            raise ValueError("beta must be a square matrix")
        if not beta_is_coercive(self.beta):
            raise ValueError("symmetric part of beta must be positive definite")

    @property
    def n(self):
        return self.beta.shape[0]

    def key(self):
        """Hashable identity for factorization and symbol caches."""
        return (
            float(self.b), float(self.sigma), float(self.gamma),
            float(self.alpha), self.beta.tobytes(), self.beta.shape,
        )

    def with_alpha(self, alpha):
        return PhysicalParams(self.b, self.sigma, self.gamma, alpha,
                              self.beta, self.slip_law)

    def with_gamma(self, gamma):
        return PhysicalParams(self.b, self.sigma, gamma, self.alpha,
                              self.beta, self.slip_law)

    def effective(self, mode):
        """(gamma, beta) actually entering the per-frequency operator."""
        if mode.is_adjoint:
            return -self.gamma, self.beta.T
        return self.gamma, self.beta

    def require_surface(self, d):
        """Check the constraints needed by the free-surface construction."""
        if self.gamma == 0.0:
            raise ValueError("surface construction requires a nonzero wave speed")
        if self.sigma == 0.0 and d != 1:
            raise ValueError(
                "vanishing surface tension is only solvable with one "
                "horizontal dimension"
            )
