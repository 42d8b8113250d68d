"""Seeded Gaussian sampling and streaming estimation of moment blocks.

Every covariance block the nonlinearity measures need (inputs, the
deterministic map, the full noisy output, and the noise-gain statistics of
multiplicative models) is estimated in a single pass by a mergeable
accumulator, so Monte Carlo runs can be chunked, parallelized, and
reproduced exactly.

Accumulation uses shifted co-moments: the first batch's sample mean is
kept as a pivot and sums of deviation products are accumulated against it.
Merging re-shifts one accumulator onto the other's pivot, which makes
merge results agree with single-pass accumulation to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import spd_factor, symmetrize
from .errors import InsufficientSamplesError, NonFiniteSampleError

# Chunked sampling draws chunk i from SeedSequence(seed, spawn_key=(stream, i)).
# Stream 0 is the state input, stream 1 the noise input; results are
# bit-reproducible for a fixed (seed, n, chunk_size).
STREAM_U = 0
STREAM_V = 1
DEFAULT_CHUNK_SIZE = 1 << 18


@dataclass
class GaussianPrior:
    """A Gaussian N(mean, cov) with a cached sampling factor.

    The factor F satisfies F @ F.T == cov but is not necessarily lower
    triangular: affine transforms of a prior carry the transformed factor
    S^-1 @ F so that transformed samples reproduce original samples under
    common random numbers (same standard-normal draws).
    """

    mean: np.ndarray
    cov: np.ndarray
    factor: np.ndarray | None = None

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.mean.ndim != 1:
            raise ValueError("mean must be a vector")
        if cov.shape != (self.mean.size, self.mean.size):
            raise ValueError(
                f"cov shape {cov.shape} does not match mean dimension {self.mean.size}"
            )
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-8 * max(1.0, np.abs(cov).max())):
            raise ValueError("cov must be symmetric")
        self.cov = symmetrize(cov)
        if self.factor is None:
            self.factor = spd_factor(self.cov)
        else:
            self.factor = np.asarray(self.factor, dtype=float)
            if self.factor.shape != cov.shape:
                raise ValueError("factor shape does not match cov")

    @property
    def dim(self) -> int:
        return self.mean.size


def _chunk_counts(n: int, chunk_size: int) -> list[int]:
    full, rest = divmod(n, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def sample_gaussian(
    prior: GaussianPrior,
    n: int,
    seed: int,
    chunk_size: int | None = None,
    stream: int = STREAM_U,
) -> np.ndarray:
    """Draw n i.i.d. samples from the prior, shape (n, dim).

    Deterministic for fixed (seed, n, chunk_size, stream): chunk i of the
    stream uses its own spawned RNG, so chunked and parallel consumers see
    identical numbers as long as the partition is identical.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    chunk_size = chunk_size or DEFAULT_CHUNK_SIZE
    out = np.empty((n, prior.dim))
    offset = 0
    for i, m in enumerate(_chunk_counts(n, chunk_size)):
        out[offset : offset + m] = _sample_chunk(prior, m, seed, i, stream)
        offset += m
    return out


def _sample_chunk(
    prior: GaussianPrior, m: int, seed: int, chunk_index: int, stream: int
) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, chunk_index)))
    z = rng.standard_normal((m, prior.dim))
    return prior.mean + z @ prior.factor.T


@dataclass
class _Layout:
    """Slice map of the stacked per-sample observation vector.

    The stacked vector is [u, f, g?, p?, gamma?] where p = vec(pi(u)).
    Noiseless models alias g to f; their g-blocks are recovered from the
    f-blocks at finalize time.
    """

    form: str
    n_u: int
    n_v: int
    n_y: int
    n_gamma: int
    slices: dict[str, slice]
    dim: int
    sigma_vv: np.ndarray | None  # analytic, from the noise prior

    @classmethod
    def for_model(cls, model) -> "_Layout":
        n_u, n_v, n_y = model.dims
        form = model.form
        names = ["u", "f"]
        sizes = [n_u, n_y]
        n_gamma = 0
        if form == "additive":
            names += ["g"]
            sizes += [n_y]
        elif form == "multiplicative":
            n_gamma = model.n_gamma
            names += ["g", "p", "gamma"]
            sizes += [n_y, n_y * n_gamma, n_gamma]
        elif form == "general":
            # Only u/g blocks are meaningful; f stores g so the shared
            # machinery applies unchanged.
            pass
        elif form != "noiseless":
            raise ValueError(f"unknown model form {form!r}")
        slices = {}
        start = 0
        for name, size in zip(names, sizes):
            slices[name] = slice(start, start + size)
            start += size
        sigma_vv = model.prior_v.cov.copy() if model.prior_v is not None else None
        return cls(form, n_u, n_v, n_y, n_gamma, slices, start, sigma_vv)

    def compatible(self, other: "_Layout") -> bool:
        return (
            self.form == other.form
            and (self.n_u, self.n_v, self.n_y, self.n_gamma) == (other.n_u, other.n_v, other.n_y, other.n_gamma)
        )


@dataclass
class MomentAccumulator:
    """Mergeable single-pass accumulator of all moment blocks.

    Accumulators are plain values: build them independently over disjoint
    sample chunks and combine with `merge`.  An empty accumulator is the
    identity element.
    """

    n: int = 0
    layout: _Layout | None = None
    pivot: np.ndarray | None = None
    dev_sum: np.ndarray | None = None
    comoment: np.ndarray | None = None
    seed: int | None = None

    def copy(self) -> "MomentAccumulator":
        return MomentAccumulator(
            n=self.n,
            layout=self.layout,
            pivot=None if self.pivot is None else self.pivot.copy(),
            dev_sum=None if self.dev_sum is None else self.dev_sum.copy(),
            comoment=None if self.comoment is None else self.comoment.copy(),
            seed=self.seed,
        )


def _stack_observations(model, u: np.ndarray, v: np.ndarray | None, layout: _Layout) -> np.ndarray:
    n = u.shape[0]
    z = np.empty((n, layout.dim))
    z[:, layout.slices["u"]] = u
    if layout.form == "general":
        g = model.g(u, v)
        z[:, layout.slices["f"]] = g
        return z
    f = model.f(u)
    z[:, layout.slices["f"]] = f
    if layout.form == "additive":
        z[:, layout.slices["g"]] = f + v
    elif layout.form == "multiplicative":
        pi = model.pi(u)
        gam = model.gamma(v)
        z[:, layout.slices["g"]] = f + np.einsum("nij,nj->ni", pi, gam)
        z[:, layout.slices["p"]] = pi.reshape(n, -1)
        z[:, layout.slices["gamma"]] = gam
    return z


def accumulate(model, u: np.ndarray, acc: MomentAccumulator, v: np.ndarray | None = None) -> MomentAccumulator:
    """Fold a batch of samples into the accumulator (in place) and return it.

    `u` has shape (n, n_u); `v` is required for additive and multiplicative
    models and must have matching length.  Raises NonFiniteSampleError with
    the offending global sample index if the model produces NaN or inf.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    layout = _Layout.for_model(model)
    if acc.layout is None:
        acc.layout = layout
    elif not acc.layout.compatible(layout):
        raise ValueError("accumulator was built for a different model shape")
    layout = acc.layout

    if u.shape[1] != layout.n_u:
        raise ValueError(f"u has dimension {u.shape[1]}, model expects {layout.n_u}")
    if layout.form in ("additive", "multiplicative", "general") and layout.n_v > 0:
        if v is None:
            raise ValueError(f"{layout.form} model requires a noise batch v")
        v = np.atleast_2d(np.asarray(v, dtype=float))
        if v.shape != (u.shape[0], layout.n_v):
            raise ValueError(f"v has shape {v.shape}, expected {(u.shape[0], layout.n_v)}")

    z = _stack_observations(model, u, v, layout)
    bad = ~np.isfinite(z).all(axis=1)
    if bad.any():
        idx = int(np.argmax(bad))
        raise NonFiniteSampleError(
            f"model produced a non-finite value at sample index {acc.n + idx}", acc.n + idx
        )

    if acc.pivot is None:
        acc.pivot = z.mean(axis=0)
        acc.dev_sum = np.zeros(layout.dim)
        acc.comoment = np.zeros((layout.dim, layout.dim))
    dev = z - acc.pivot
    acc.dev_sum += dev.sum(axis=0)
    acc.comoment += dev.T @ dev
    acc.n += z.shape[0]
    return acc


def merge(a: MomentAccumulator, b: MomentAccumulator) -> MomentAccumulator:
    """Combine two accumulators; equivalent to sequential accumulation.

    Returns a new accumulator (inputs are unchanged).  The result keeps
    a's pivot; b's co-moments are re-shifted onto it exactly.
    """
    if a.n == 0:
        return b.copy()
    if b.n == 0:
        return a.copy()
    if a.layout is None or b.layout is None or not a.layout.compatible(b.layout):
        raise ValueError("cannot merge accumulators with different model shapes")
    if a.seed is not None and b.seed is not None and a.seed != b.seed:
        raise ValueError("cannot merge accumulators from different seeds")

    # Re-shift b onto a's pivot: with delta = pivot_b - pivot_a,
    #   sum (z - p_a)(z - p_a)^T = C_b + delta d_b^T + d_b delta^T + n delta delta^T
    delta = b.pivot - a.pivot
    d_b = b.dev_sum + b.n * delta
    c_b = b.comoment + np.outer(delta, b.dev_sum) + np.outer(b.dev_sum, delta) + b.n * np.outer(delta, delta)
    return MomentAccumulator(
        n=a.n + b.n,
        layout=a.layout,
        pivot=a.pivot.copy(),
        dev_sum=a.dev_sum + d_b,
        comoment=a.comoment + c_b,
        seed=a.seed if a.seed is not None else b.seed,
    )


@dataclass(frozen=True)
class MomentEstimates:
    """Finalized, immutable moment blocks from one Monte Carlo pass.

    Covariances are unbiased (n-1 normalization) and exactly symmetric.
    Multiplicative-only blocks (sigma_gamma_gamma, pi_bar, m_pi_tilde) are
    None for other forms; sigma_vv carries the analytic noise covariance of
    the model's prior when one exists.
    """

    model_form: str
    n_samples: int
    seed: int | None
    mean_u: np.ndarray
    mean_f: np.ndarray
    mean_g: np.ndarray
    sigma_uu: np.ndarray
    sigma_ff: np.ndarray
    sigma_fu: np.ndarray
    sigma_gg: np.ndarray
    sigma_gu: np.ndarray
    sigma_vv: np.ndarray | None = None
    sigma_gamma_gamma: np.ndarray | None = None
    pi_bar: np.ndarray | None = None
    m_pi_tilde: np.ndarray | None = None
    n_gamma: int = 0

    @property
    def n_y(self) -> int:
        return self.mean_g.size

    @property
    def n_u(self) -> int:
        return self.mean_u.size


def finalize(acc: MomentAccumulator) -> MomentEstimates:
    """Turn accumulated sums into unbiased covariance estimates."""
    if acc.n < 2:
        raise InsufficientSamplesError(f"insufficient samples: n={acc.n}, need at least 2")
    layout = acc.layout
    n = acc.n
    mean = acc.pivot + acc.dev_sum / n
    cov = (acc.comoment - np.outer(acc.dev_sum, acc.dev_sum) / n) / (n - 1)

    def block(row: str, col: str) -> np.ndarray:
        return cov[layout.slices[row], layout.slices[col]]

    s_u, s_f = layout.slices["u"], layout.slices["f"]
    mean_u = mean[s_u]
    mean_f = mean[s_f]
    sigma_uu = symmetrize(block("u", "u"))
    sigma_ff = symmetrize(block("f", "f"))
    sigma_fu = block("f", "u")

    sigma_gamma = pi_bar = m_pi_tilde = None
    n_gamma = layout.n_gamma
    if layout.form in ("noiseless", "general"):
        mean_g, sigma_gg, sigma_gu = mean_f, sigma_ff, sigma_fu
    else:
        mean_g = mean[layout.slices["g"]]
        sigma_gg = symmetrize(block("g", "g"))
        sigma_gu = block("g", "u")
    if layout.form == "multiplicative":
        sigma_gamma = symmetrize(block("gamma", "gamma"))
        pi_bar = mean[layout.slices["p"]].reshape(layout.n_y, n_gamma)
        # E[(pi - pi_bar) Sigma_gamma (pi - pi_bar)^T] contracted from the
        # vec(pi) auto-covariance; identical to a second pass over stored
        # pi samples with the finalized mean.
        cov_pp = symmetrize(block("p", "p")).reshape(layout.n_y, n_gamma, layout.n_y, n_gamma)
        m_pi_tilde = symmetrize(np.einsum("ab,jakb->jk", sigma_gamma, cov_pp))

    return MomentEstimates(
        model_form=layout.form,
        n_samples=n,
        seed=acc.seed,
        mean_u=mean_u,
        mean_f=mean_f,
        mean_g=mean_g,
        sigma_uu=sigma_uu,
        sigma_ff=sigma_ff,
        sigma_fu=sigma_fu,
        sigma_gg=sigma_gg,
        sigma_gu=sigma_gu,
        sigma_vv=None if layout.sigma_vv is None else layout.sigma_vv.copy(),
        sigma_gamma_gamma=sigma_gamma,
        pi_bar=pi_bar,
        m_pi_tilde=m_pi_tilde,
        n_gamma=n_gamma,
    )


def estimate_moments(
    model,
    n_samples: int,
    seed: int,
    chunk_size: int | None = None,
) -> MomentEstimates:
    """Sample the model's priors, accumulate, and finalize in one call.

    The chunk partition (not just the seed) is part of the determinism
    contract: identical (seed, n_samples, chunk_size) give bit-identical
    estimates.
    """
    if n_samples < 2:
        raise InsufficientSamplesError(f"insufficient samples: n={n_samples}, need at least 2")
    chunk_size = chunk_size or DEFAULT_CHUNK_SIZE
    acc = MomentAccumulator(seed=seed)
    for i, m in enumerate(_chunk_counts(n_samples, chunk_size)):
        u = _sample_chunk(model.prior_u, m, seed, i, STREAM_U)
        v = None
        if model.prior_v is not None:
            v = _sample_chunk(model.prior_v, m, seed, i, STREAM_V)
        accumulate(model, u, acc, v)
    return finalize(acc)


def rescale_outputs(est: MomentEstimates, factors: np.ndarray) -> MomentEstimates:
    """Estimates of the same run with output component i multiplied by factors[i].

    This is the exact affine transformation law of the moment blocks, so it
    equals re-running the Monte Carlo on the rescaled model with common
    random numbers.  Used by unit-sensitivity scans to avoid resampling.
    """
    d = np.atleast_1d(np.asarray(factors, dtype=float))
    if d.shape != (est.n_y,):
        raise ValueError(f"expected {est.n_y} factors, got shape {d.shape}")
    scale = lambda m: m * np.outer(d, d)
    sigma_vv = est.sigma_vv
    if est.model_form == "additive" and sigma_vv is not None:
        sigma_vv = scale(sigma_vv)  # additive noise lives in output units
    return MomentEstimates(
        model_form=est.model_form,
        n_samples=est.n_samples,
        seed=est.seed,
        mean_u=est.mean_u,
        mean_f=est.mean_f * d,
        mean_g=est.mean_g * d,
        sigma_uu=est.sigma_uu,
        sigma_ff=scale(est.sigma_ff),
        sigma_fu=est.sigma_fu * d[:, None],
        sigma_gg=scale(est.sigma_gg),
        sigma_gu=est.sigma_gu * d[:, None],
        sigma_vv=sigma_vv,
        sigma_gamma_gamma=est.sigma_gamma_gamma,
        pi_bar=None if est.pi_bar is None else est.pi_bar * d[:, None],
        m_pi_tilde=None if est.m_pi_tilde is None else scale(est.m_pi_tilde),
        n_gamma=est.n_gamma,
    )
