"""Stochastic transformation models and affine unit-change machinery.

A model is y = g(u, v) in one of four noise forms:

    noiseless        y = f(u)
    additive         y = f(u) + v
    multiplicative   y = f(u) + pi(u) @ gamma(v),  E[gamma(v)] = 0
    general          y = g(u, v)   (constructible; measures reject it)

All maps are vectorized over a leading batch axis.  The catalog holds the
classic tracking measurement models (Cartesian-to-polar conversion,
bearing-only tracking, ground moving target indicator radar, and
range/direction-cosine measurements), each with a Gaussian prior whose
covariance is scaled by a spread parameter alpha.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ._linalg import inv_spd, spd_factor, symmetrize
from .errors import DegenerateOutputError
from .moments import GaussianPrior, MomentEstimates, sample_gaussian

# Seed of the dedicated pre-pass that centers user-supplied gamma maps.
GAMMA_CENTERING_SEED = 715225741
GAMMA_CENTERING_SAMPLES = 100_000


@dataclass
class StochasticModel:
    """A transformation y = g(u, v) with its input and noise priors.

    Fields `pi` and `gamma` are used by the multiplicative form only;
    `g` by the general form only.  `dims` is (n_u, n_v, n_y).  Output
    `units` are informational labels carried into reports.
    """

    form: str
    f: Callable[[np.ndarray], np.ndarray] | None
    prior_u: GaussianPrior
    dims: tuple[int, int, int]
    prior_v: GaussianPrior | None = None
    pi: Callable[[np.ndarray], np.ndarray] | None = None
    gamma: Callable[[np.ndarray], np.ndarray] | None = None
    g: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    n_gamma: int = 0
    sigma_gamma: np.ndarray | None = None
    name: str = "custom"
    variant: str = "native"
    units: tuple[str, ...] = ()

    def __post_init__(self):
        if self.form not in ("noiseless", "additive", "multiplicative", "general"):
            raise ValueError(f"unknown model form {self.form!r}")
        n_u, n_v, n_y = self.dims
        if self.prior_u.dim != n_u:
            raise ValueError("prior_u dimension does not match dims")
        if self.form == "noiseless":
            if n_v != 0 or self.prior_v is not None:
                raise ValueError("noiseless models take no noise prior")
        else:
            if self.prior_v is None or self.prior_v.dim != n_v:
                raise ValueError("noise prior missing or of wrong dimension")
            if np.any(self.prior_v.mean != 0.0):
                raise ValueError("noise prior must be zero-mean")
        if self.form == "additive" and n_v != n_y:
            raise ValueError("additive noise must match the output dimension")
        if self.form == "multiplicative":
            if self.pi is None:
                raise ValueError("multiplicative models need a pi map")
            if self.gamma is None:
                self.gamma = lambda v: v
                if self.n_gamma == 0:
                    self.n_gamma = n_v
            elif self.n_gamma == 0:
                probe = np.atleast_2d(self.gamma(np.zeros((1, n_v))))
                self.n_gamma = probe.shape[1]
        if self.form == "general" and self.g is None:
            raise ValueError("general models need a g(u, v) map")
        if not self.units:
            self.units = ("",) * n_y


def make_multiplicative(
    f: Callable,
    pi: Callable,
    prior_u: GaussianPrior,
    prior_v: GaussianPrior,
    n_y: int,
    gamma: Callable | None = None,
    center_gamma: bool = True,
    name: str = "custom",
    units: tuple[str, ...] = (),
) -> StochasticModel:
    """Build a multiplicative-noise model, centering a user-supplied gamma.

    The noise gain term requires E[gamma(v)] = 0.  Rather than trusting the
    caller, a dedicated fixed-seed pre-pass estimates the mean of gamma
    under prior_v and wraps the map as gamma(v) - mean.  Pass
    center_gamma=False only for maps that are exactly zero-mean (the
    identity over a zero-mean prior needs no correction).
    """
    n_u = prior_u.dim
    n_v = prior_v.dim
    if gamma is not None and center_gamma:
        v_pre = sample_gaussian(prior_v, GAMMA_CENTERING_SAMPLES, GAMMA_CENTERING_SEED)
        offset = np.atleast_2d(gamma(v_pre)).mean(axis=0)
        raw = gamma
        gamma = lambda v: raw(v) - offset
    return StochasticModel(
        form="multiplicative",
        f=f,
        pi=pi,
        gamma=gamma,
        prior_u=prior_u,
        prior_v=prior_v,
        dims=(n_u, n_v, n_y),
        name=name,
        units=units,
    )


@dataclass
class UnitChange:
    """Affine relation between current units and new units.

    Interpreted as current = S @ new + o for each of the input, output and
    noise spaces: s_y[i, i] is "current units per new unit" of output i.
    Scale matrices must be symmetric positive definite; the noise has no
    offset because it stays zero-mean.  s_v is optional: additive-noise
    models always transform their noise with s_y (the noise shares the
    output's units), and multiplicative noise defaults to unchanged.
    """

    s_u: np.ndarray
    o_u: np.ndarray
    s_y: np.ndarray
    o_y: np.ndarray
    s_v: np.ndarray | None = None

    def __post_init__(self):
        self.s_u = np.atleast_2d(np.asarray(self.s_u, dtype=float))
        self.s_y = np.atleast_2d(np.asarray(self.s_y, dtype=float))
        self.o_u = np.atleast_1d(np.asarray(self.o_u, dtype=float))
        self.o_y = np.atleast_1d(np.asarray(self.o_y, dtype=float))
        for name in ("s_u", "s_y", "s_v"):
            mat = getattr(self, name)
            if mat is None:
                continue
            mat = np.atleast_2d(np.asarray(mat, dtype=float))
            setattr(self, name, mat)
            if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(mat).max())):
                raise ValueError(f"{name} must be symmetric positive definite")
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                raise ValueError(f"{name} must be symmetric positive definite") from None
        if self.o_u.shape != (self.s_u.shape[0],) or self.o_y.shape != (self.s_y.shape[0],):
            raise ValueError("offset dimensions do not match scale matrices")

    @classmethod
    def identity(cls, n_u: int, n_y: int, n_v: int | None = None) -> "UnitChange":
        return cls(
            s_u=np.eye(n_u),
            o_u=np.zeros(n_u),
            s_y=np.eye(n_y),
            o_y=np.zeros(n_y),
            s_v=None if n_v is None else np.eye(n_v),
        )

    def inverse(self) -> "UnitChange":
        """The change mapping new units back to current units."""
        s_u_inv = inv_spd(self.s_u)
        s_y_inv = inv_spd(self.s_y)
        return UnitChange(
            s_u=s_u_inv,
            o_u=-s_u_inv @ self.o_u,
            s_y=s_y_inv,
            o_y=-s_y_inv @ self.o_y,
            s_v=None if self.s_v is None else inv_spd(self.s_v),
        )

    def compose(self, inner: "UnitChange") -> "UnitChange":
        """The single change equivalent to applying self, then `inner`.

        Scales multiply and offsets accumulate.  The product of two SPD
        matrices is SPD only when they commute (diagonal scales always do);
        a non-commuting composition fails PD validation.
        """
        s_v = None
        if self.s_v is not None and inner.s_v is not None:
            s_v = self.s_v @ inner.s_v
        return UnitChange(
            s_u=self.s_u @ inner.s_u,
            o_u=self.s_u @ inner.o_u + self.o_u,
            s_y=self.s_y @ inner.s_y,
            o_y=self.s_y @ inner.o_y + self.o_y,
            s_v=s_v,
        )


def _transform_prior(prior: GaussianPrior, scale: np.ndarray, offset: np.ndarray) -> GaussianPrior:
    """Prior of new = S^-1 (old - o), with the sampling factor carried along.

    Transforming the factor (rather than refactoring the new covariance)
    means samples drawn from the transformed prior at the same seed are the
    transformed original samples, which is what common-random-number
    comparisons across unit systems rely on.
    """
    scale_inv = inv_spd(scale)
    mean = scale_inv @ (prior.mean - offset)
    factor = scale_inv @ prior.factor
    cov = symmetrize(scale_inv @ prior.cov @ scale_inv.T)
    return GaussianPrior(mean=mean, cov=cov, factor=factor)


def apply_unit_change(model: StochasticModel, change: UnitChange) -> StochasticModel:
    """Re-express the model in new units.

    The returned model evaluates y_new = S_y^-1 (g(S_u u_new + o_u, ...) - o_y)
    consistently for f, pi, gamma and g, with priors transformed to match.
    """
    n_u, n_v, n_y = model.dims
    if change.s_u.shape != (n_u, n_u) or change.s_y.shape != (n_y, n_y):
        raise ValueError("unit change dimensions do not match the model")

    s_u, o_u = change.s_u, change.o_u
    s_y_inv = inv_spd(change.s_y)
    o_y = change.o_y

    to_old_u = lambda u_new: u_new @ s_u.T + o_u
    f_old = model.f
    new_f = None if f_old is None else (lambda u: (f_old(to_old_u(u)) - o_y) @ s_y_inv.T)

    prior_u = _transform_prior(model.prior_u, s_u, o_u)

    prior_v = model.prior_v
    new_pi = model.pi
    new_gamma = model.gamma
    new_g = None
    s_v = None
    if model.form == "additive":
        # Additive noise lives in output units; transforming it with
        # anything but s_y would silently change the noise form.
        if change.s_v is not None and not np.allclose(change.s_v, change.s_y):
            raise ValueError("additive models require s_v equal to s_y (or omitted)")
        s_v = change.s_y
    elif model.form in ("multiplicative", "general") and n_v > 0:
        s_v = change.s_v if change.s_v is not None else np.eye(n_v)
        if s_v.shape != (n_v, n_v):
            raise ValueError("s_v dimension does not match the model noise")
    if prior_v is not None:
        prior_v = _transform_prior(prior_v, s_v, np.zeros(n_v))

    if model.form == "multiplicative":
        pi_old, gamma_old = model.pi, model.gamma
        new_pi = lambda u: np.einsum("ij,njk->nik", s_y_inv, pi_old(to_old_u(u)))
        new_gamma = lambda v: gamma_old(v @ s_v.T)
    if model.form == "general":
        g_old = model.g
        new_g = lambda u, v: (g_old(to_old_u(u), v @ s_v.T) - o_y) @ s_y_inv.T

    return replace(
        model,
        f=new_f,
        pi=new_pi,
        gamma=new_gamma,
        g=new_g,
        prior_u=prior_u,
        prior_v=prior_v,
    )


def base_unit_change(est: MomentEstimates) -> UnitChange:
    """The diagonal change to base units in which every component of the
    input and output has unit variance and zero mean.

    Built from estimated moments: s_y = diag(sqrt(diag(Sigma_gg))),
    s_u likewise from Sigma_uu, s_v from the analytic noise covariance when
    one exists.
    """
    var_y = np.diag(est.sigma_gg)
    var_u = np.diag(est.sigma_uu)
    if np.any(var_y <= 0.0):
        raise DegenerateOutputError(
            f"degenerate output dimension: zero variance at index {int(np.argmin(var_y))}"
        )
    if np.any(var_u <= 0.0):
        raise DegenerateOutputError(
            f"degenerate input dimension: zero variance at index {int(np.argmin(var_u))}"
        )
    s_v = None
    if est.sigma_vv is not None:
        var_v = np.diag(est.sigma_vv)
        s_v = np.diag(np.sqrt(var_v)) if np.all(var_v > 0.0) else None
    return UnitChange(
        s_u=np.diag(np.sqrt(var_u)),
        o_u=est.mean_u.copy(),
        s_y=np.diag(np.sqrt(var_y)),
        o_y=est.mean_g.copy(),
        s_v=s_v,
    )


# --- builtin catalog -------------------------------------------------------

GMTI_SENSOR = np.array([1000.0, 1000.0, 1000.0])


def _cart2polar(u: np.ndarray, bearing_scale: float) -> np.ndarray:
    return np.stack(
        [np.hypot(u[:, 0], u[:, 1]), np.arctan2(u[:, 1], u[:, 0]) * bearing_scale], axis=1
    )


def _bot(x: np.ndarray) -> np.ndarray:
    # Bearing east-of-north: atan2(x, y).
    return np.arctan2(x[:, 0], x[:, 1])[:, None]


def _gmti(x: np.ndarray) -> np.ndarray:
    dx = x[:, 0] - GMTI_SENSOR[0]
    dy = x[:, 1] - GMTI_SENSOR[1]
    slant = np.sqrt(dx**2 + dy**2 + GMTI_SENSOR[2] ** 2)
    bearing = np.arctan2(dx, dy)
    range_rate = (dx * x[:, 2] + dy * x[:, 3]) / slant
    return np.stack([slant, bearing, range_rate], axis=1)


def _rdcos(x: np.ndarray) -> np.ndarray:
    rng = np.hypot(x[:, 0], x[:, 1])
    return np.stack([rng, x[:, 0] / rng], axis=1)


def _tracking_prior(alpha: float) -> GaussianPrior:
    return GaussianPrior(
        mean=np.array([500.0, 500.0, 5.0, 8.7]),
        cov=alpha * np.diag([1e3, 1e3, 1.0, 1.0]),
    )


_GMTI_TO_KM_DEG_KMH = lambda: UnitChange(
    s_u=np.eye(4),
    o_u=np.zeros(4),
    # current = S @ new: metres per km, radians per degree, (m/s) per (km/h)
    s_y=np.diag([1000.0, np.pi / 180.0, 1.0 / 3.6]),
    o_y=np.zeros(3),
)

_RDCOS_TO_KM = lambda: UnitChange(
    s_u=np.eye(4),
    o_u=np.zeros(4),
    s_y=np.diag([1000.0, 1.0]),
    o_y=np.zeros(2),
)

MODEL_NAMES = ("cart2polar_rad", "cart2polar_deg", "bot", "gmti", "rdcos")

MODEL_VARIANTS: dict[str, dict[str, Callable[[], UnitChange] | None]] = {
    "cart2polar_rad": {"native": None},
    "cart2polar_deg": {"native": None},
    "bot": {"native": None},
    "gmti": {"native": None, "km_deg_kmh": _GMTI_TO_KM_DEG_KMH},
    "rdcos": {"native": None, "km": _RDCOS_TO_KM},
}


def builtin_model(name: str, alpha: float, variant: str | None = None) -> StochasticModel:
    """A catalog model with its prior covariance scaled by alpha.

    Variants re-express the outputs in alternative units (e.g. gmti
    'km_deg_kmh'); they are built by applying the corresponding unit change
    to the native model, so common-random-number runs line up exactly.
    """
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if name not in MODEL_VARIANTS:
        raise ValueError(f"unknown model {name!r}; known: {', '.join(MODEL_NAMES)}")
    variant = variant or "native"
    if variant not in MODEL_VARIANTS[name]:
        raise ValueError(
            f"unknown variant {variant!r} for {name!r}; known: "
            + ", ".join(MODEL_VARIANTS[name])
        )

    if name in ("cart2polar_rad", "cart2polar_deg"):
        bearing_scale = 1.0 if name == "cart2polar_rad" else 180.0 / np.pi
        model = StochasticModel(
            form="noiseless",
            f=lambda u: _cart2polar(u, bearing_scale),
            prior_u=GaussianPrior(mean=np.array([1.0, 10.0]), cov=alpha * np.diag([1.0, 100.0])),
            dims=(2, 0, 2),
            name=name,
            units=("km", "rad" if name == "cart2polar_rad" else "deg"),
        )
    elif name == "bot":
        model = StochasticModel(
            form="noiseless",
            f=_bot,
            prior_u=_tracking_prior(alpha),
            dims=(4, 0, 1),
            name=name,
            units=("rad",),
        )
    elif name == "gmti":
        model = StochasticModel(
            form="noiseless",
            f=_gmti,
            prior_u=_tracking_prior(alpha),
            dims=(4, 0, 3),
            name=name,
            units=("m", "rad", "m/s"),
        )
    else:  # rdcos
        model = StochasticModel(
            form="noiseless",
            f=_rdcos,
            prior_u=_tracking_prior(alpha),
            dims=(4, 0, 2),
            name=name,
            units=("m", "-"),
        )

    change_factory = MODEL_VARIANTS[name][variant]
    if change_factory is not None:
        model = apply_unit_change(model, change_factory())
        model.variant = variant
        if name == "gmti":
            model.units = ("km", "deg", "km/h")
        elif name == "rdcos":
            model.units = ("km", "-")
    return model
