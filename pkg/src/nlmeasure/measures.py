"""Mean-square-error based measures of nonlinearity (MoN).

The MoN of y = g(u, v) is the square root of the minimized weighted MSE
between g and its best linear-plus-noise approximation A u + b + n:

    M = sqrt( min_{A,b,psi_n} E[ ||g(u,v) - (A u + b + n)||_W ] )

with ||x||_W = x^T W x.  The minimization splits into a deterministic part
(the optimal affine fit) and a stochastic part (the optimal noise).  Closed
forms exist for the noiseless, additive and multiplicative noise forms:

    noiseless/additive   M^2 = tr( W (S_ff - S_fu S_uu^-1 S_uf) )
    multiplicative       M^2 = tr( W (S_ff - S_fu S_uu^-1 S_uf + M_pi) )

where M_pi = E[(pi(u) - pi_bar) S_gamma (pi(u) - pi_bar)^T].  With W the
identity this is the classic MSE-based measure; dividing by
sqrt(tr(S_gg)) gives its normalized variant.  Both are sensitive to the
units of y.  Weights satisfying tr(W S_gg) = 1, built in base units (unit
variance per component) and mapped back as W = S_y^-1 Wbar S_y^-1, make
the measure unitless and normalized to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import clamp_psd, eigh_descending, inv_spd, solve_spd, symmetrize
from .errors import DegenerateOutputError, ModelFormError, NoClosedFormError
from .models import base_unit_change
from .moments import MomentEstimates


@dataclass(frozen=True)
class LinearFit:
    """Optimal affine approximation y ~ a @ u + b in the weighted MSE sense.

    The optimum is weight-independent: a = S_gu S_uu^-1, b = E[g] - a E[u].
    """

    a: np.ndarray
    b: np.ndarray


def best_linear_fit(est: MomentEstimates) -> LinearFit:
    """Solve for the optimal (a, b) from finalized moments.

    Uses an SPD solve of S_uu (never an explicit inverse); near-singular
    input covariances fall back to an eigenvalue pseudo-inverse.
    """
    a = solve_spd(est.sigma_uu, est.sigma_gu.T).T
    b = est.mean_g - a @ est.mean_u
    return LinearFit(a=a, b=b)


@dataclass(frozen=True)
class WeightMatrix:
    """SPD weight for the measure's norm, with its construction recorded.

    Provenance is one of identity | legacy_normalized | diag | full |
    family.  The last three satisfy tr(w @ S_gg) = 1 and make the measure
    unitless and normalized ("normalized" is True for them); identity and
    legacy_normalized reproduce the classic measures and are sensitive to
    output units.
    """

    w: np.ndarray
    provenance: str
    normalized: bool
    alphas: tuple[float, ...] | None = None
    off_diagonal: np.ndarray | None = None


def weight_identity(n_y: int) -> WeightMatrix:
    """The unweighted norm; yields the classic MSE-based measure."""
    return WeightMatrix(w=np.eye(n_y), provenance="identity", normalized=False)


def weight_legacy(est: MomentEstimates) -> WeightMatrix:
    """Weight reproducing the normalized classic measure M / sqrt(tr(S_gg)).

    Stored as I / tr(S_gg) so that the plain weighted formula evaluates the
    normalized measure directly.  (A scaled identity I / sqrt(tr(S_gg)) is
    sometimes quoted for this purpose, but it is off by a square root under
    M = sqrt(E[..]); the direct ratio is implemented.)  Not unitless.
    """
    trace = float(np.trace(est.sigma_gg))
    if trace <= 0.0:
        raise DegenerateOutputError("degenerate output dimension: tr(sigma_gg) <= 0")
    return WeightMatrix(
        w=np.eye(est.n_y) / trace, provenance="legacy_normalized", normalized=False
    )


def weight_diag(est: MomentEstimates) -> WeightMatrix:
    """W = (1/n_y) diag(diag(S_gg))^-1: per-component variance weighting.

    Satisfies tr(W S_gg) = 1 exactly and ignores output correlations.
    """
    var = np.diag(est.sigma_gg)
    if np.any(var <= 0.0):
        raise DegenerateOutputError(
            f"degenerate output dimension: zero variance at index {int(np.argmin(var))}"
        )
    return WeightMatrix(w=np.diag(1.0 / var) / est.n_y, provenance="diag", normalized=True)


def weight_full(est: MomentEstimates) -> WeightMatrix:
    """W = (1/n_y) S_gg^-1: Mahalanobis weighting of the full output."""
    w = inv_spd(est.sigma_gg) / est.n_y
    return WeightMatrix(w=symmetrize(w), provenance="full", normalized=True)


def assemble_family_y(
    alphas: np.ndarray, lambdas: np.ndarray, off_diagonal: np.ndarray | None = None
) -> np.ndarray:
    """Assemble the eigenbasis matrix Y with [Y]_ii = alpha_i / lambda_i.

    Any symmetric off-diagonal fill keeping Y positive definite is allowed;
    the zero fill is the canonical member.  tr(Y @ diag(lambdas)) equals
    sum(alphas) = 1 by construction.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    n = alphas.size
    if lambdas.shape != (n,):
        raise ValueError("alphas and lambdas must have the same length")
    if np.any(alphas <= 0.0):
        raise ValueError("family alphas must be strictly positive")
    if abs(alphas.sum() - 1.0) > 1e-12:
        raise ValueError(f"family alphas must sum to 1, got {alphas.sum():.17g}")
    if np.any(lambdas <= 0.0):
        raise ValueError("eigenvalues must be positive to assemble Y")
    y = np.diag(alphas / lambdas)
    if off_diagonal is not None:
        off = symmetrize(np.asarray(off_diagonal, dtype=float))
        if off.shape != (n, n):
            raise ValueError("off_diagonal must be a square matrix of matching size")
        y = y + off - np.diag(np.diag(off))
    try:
        np.linalg.cholesky(y)
    except np.linalg.LinAlgError:
        raise ValueError("assembled Y is not positive definite") from None
    return y


def weight_family(
    est: MomentEstimates,
    alphas,
    off_diagonal: np.ndarray | None = None,
) -> WeightMatrix:
    """A member of the complete normalized weight family.

    In base units (every output component rescaled to unit variance) the
    set of SPD weights with tr(Wbar S_base) = 1 is exactly
    {V Y V^T : [Y]_ii = alpha_i / lambda_i, Y > 0} where S_base = V L V^T
    is the eigendecomposition (descending, deterministic signs).  The
    returned weight is mapped back to the estimate's units as
    W = s_y^-1 Wbar s_y^-1.  The uniform-alpha, zero-off-diagonal member
    equals weight_full; diag(diag()) weighting equals weight_diag.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if alphas.shape != (est.n_y,):
        raise ValueError(f"expected {est.n_y} alphas, got shape {alphas.shape}")
    change = base_unit_change(est)
    scale = np.diag(change.s_y)  # diagonal by construction
    base_cov = est.sigma_gg / np.outer(scale, scale)
    lambdas, vecs = eigh_descending(base_cov)
    y = assemble_family_y(alphas, lambdas, off_diagonal)
    w_base = vecs @ y @ vecs.T
    w = symmetrize(w_base / np.outer(scale, scale))
    return WeightMatrix(
        w=w,
        provenance="family",
        normalized=True,
        alphas=tuple(float(a) for a in alphas),
        off_diagonal=None if off_diagonal is None else np.asarray(off_diagonal, dtype=float),
    )


_KIND_BY_PROVENANCE = {
    "identity": "orig",
    "legacy_normalized": "orig_normalized",
    "diag": "weighted",
    "full": "weighted",
    "family": "weighted",
}


@dataclass(frozen=True)
class MonResult:
    """A measure value with its decomposition and provenance.

    value**2 = j_det + j_sto, where j_det is the deterministic residual
    part tr(W (S_ff - S_fu S_uu^-1 S_uf)) and j_sto the noise-gain spread
    part tr(W M_pi) (zero for noiseless and additive models).  bound is
    sqrt(tr(W S_gg)), the largest value the measure can attain; it equals 1
    for normalized weights.  diagnostics records the PSD clamp applied to
    the residual and, for multiplicative models, the discrepancy against
    the equivalent S_gg-based form.
    """

    value: float
    kind: str
    j_det: float
    j_sto: float
    bound: float
    n_samples: int
    seed: int | None
    weight_provenance: str
    diagnostics: dict = field(default_factory=dict)


def mon_upper_bound(est: MomentEstimates, weight: WeightMatrix) -> float:
    """sqrt(tr(W S_gg)); equals 1 for normalized weights."""
    if weight.w.shape != est.sigma_gg.shape:
        raise ValueError("weight and output covariance shapes do not match")
    return float(np.sqrt(np.trace(weight.w @ est.sigma_gg)))


def _deterministic_residual(est: MomentEstimates) -> tuple[np.ndarray, float]:
    """S_ff - S_fu S_uu^-1 S_uf, symmetrized and clamped to the PSD cone.

    Finite-sample noise can make the weighted trace of the raw residual
    negative for non-diagonal weights; clamping keeps the measure real.
    """
    x = solve_spd(est.sigma_uu, est.sigma_fu.T)
    residual = est.sigma_ff - est.sigma_fu @ x
    return clamp_psd(residual)


def mon_additive(est: MomentEstimates, weight: WeightMatrix) -> MonResult:
    """Measure for noiseless and additive-noise models."""
    if est.model_form not in ("noiseless", "additive"):
        raise ModelFormError(
            f"mon_additive expects a noiseless or additive model, got {est.model_form!r}"
        )
    residual, clamp = _deterministic_residual(est)
    j_det = float(np.trace(weight.w @ residual))
    return MonResult(
        value=float(np.sqrt(max(j_det, 0.0))),
        kind=_KIND_BY_PROVENANCE[weight.provenance],
        j_det=j_det,
        j_sto=0.0,
        bound=mon_upper_bound(est, weight),
        n_samples=est.n_samples,
        seed=est.seed,
        weight_provenance=weight.provenance,
        diagnostics={"residual_clamp": clamp},
    )


def mon_multiplicative(est: MomentEstimates, weight: WeightMatrix) -> MonResult:
    """Measure for multiplicative-noise models.

    The stochastic part is tr(W M_pi) with M_pi the noise-gain spread
    E[(pi - pi_bar) S_gamma (pi - pi_bar)^T].  The algebraically
    equivalent form tr(W (S_gg - S_gu S_uu^-1 S_ug - pi_bar S_gamma
    pi_bar^T)) is evaluated as a cross-check and the discrepancy recorded;
    on Monte Carlo moments it differs at sampling-error order, on exact
    moments it vanishes.
    """
    if est.model_form != "multiplicative":
        raise ModelFormError(
            f"mon_multiplicative expects a multiplicative model, got {est.model_form!r}"
        )
    residual, clamp = _deterministic_residual(est)
    m_pi, m_pi_clamp = clamp_psd(est.m_pi_tilde)
    j_det = float(np.trace(weight.w @ residual))
    j_sto = float(np.trace(weight.w @ m_pi))
    value = float(np.sqrt(max(j_det + j_sto, 0.0)))

    x_g = solve_spd(est.sigma_uu, est.sigma_gu.T)
    noise_floor = est.pi_bar @ est.sigma_gamma_gamma @ est.pi_bar.T
    residual_g = symmetrize(est.sigma_gg - est.sigma_gu @ x_g - noise_floor)
    alt_sq = float(np.trace(weight.w @ residual_g))
    alt_value = float(np.sqrt(max(alt_sq, 0.0)))

    return MonResult(
        value=value,
        kind=_KIND_BY_PROVENANCE[weight.provenance],
        j_det=j_det,
        j_sto=j_sto,
        bound=mon_upper_bound(est, weight),
        n_samples=est.n_samples,
        seed=est.seed,
        weight_provenance=weight.provenance,
        diagnostics={
            "residual_clamp": clamp,
            "m_pi_clamp": m_pi_clamp,
            "output_form_value": alt_value,
            "form_discrepancy": abs(value - alt_value),
        },
    )


def compute_mon(est: MomentEstimates, weight: WeightMatrix) -> MonResult:
    """Dispatch on the model form behind the moment estimates."""
    if est.model_form in ("noiseless", "additive"):
        return mon_additive(est, weight)
    if est.model_form == "multiplicative":
        return mon_multiplicative(est, weight)
    if est.model_form == "general":
        raise NoClosedFormError("no closed form for general noise")
    raise ModelFormError(f"unknown model form {est.model_form!r}")
