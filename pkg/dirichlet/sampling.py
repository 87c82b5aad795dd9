"""
Dirichlet distributions, Dirichlet process posteriors and truncated DP paths.

Gamma variates are drawn with the shape-boosting identity
Gamma(a) = Gamma(a + 1) * U**(1/a), carried in log space, so shapes far below
one (Dirichlet(alpha/N, ..., alpha/N) for large N) neither underflow nor lose
their relative sizes before normalization.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from dipsim.conf import setting
from dipsim.exceptions import InputError
from measures.measures import DiscreteMeasure, MixtureBase
from symmetry.groups import as_points

logger = logging.getLogger(__name__)

STICK_BREAKING = 'stick-breaking'
FINITE = 'finite'


@dataclass(frozen=True)
class DirichletParams:
    a: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        if len(a) < 2:
            raise InputError(f'a Dirichlet distribution needs at least 2 parameters, got {len(a)}', code='range')
        if not all(math.isfinite(v) and v > 0 for v in a):
            raise InputError('Dirichlet parameters must be positive and finite', code='range')
        object.__setattr__(self, 'a', a)


def _log_gamma_variates(shape, rng):
    """log of independent Gamma(shape_i, 1) draws; draw order: boosted gammas, then uniforms."""
    shape = np.asarray(shape, dtype=float)
    boosted = rng.standard_gamma(shape + 1.0)
    uniforms = rng.random(shape.shape)
    return np.log(boosted) + np.log1p(-uniforms) / shape


def _normalized(log_gammas):
    weights = np.exp(log_gammas - logsumexp(log_gammas))
    return weights / weights.sum()


def sample_dirichlet(params, rng):
    """
    One draw from Dirichlet(a) by normalizing independent Gamma(a_i, 1) jumps.
    """
    if not isinstance(params, DirichletParams):
        params = DirichletParams(params)
    return _normalized(_log_gamma_variates(params.a, rng))


def finite_weights(alpha, n_atoms, rng):
    """Dirichlet(alpha/N, ..., alpha/N) jump sizes; N = 1 gives [1.0] without drawing."""
    if n_atoms == 1:
        return np.ones(1)
    return _normalized(_log_gamma_variates(np.full(n_atoms, alpha / n_atoms), rng))


@dataclass(frozen=True, eq=False)
class DPParams:
    """Concentration ``alpha`` and base measure (a BaseMeasure or MixtureBase)."""

    alpha: float
    base: object

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InputError(f'concentration must be positive and finite, got {self.alpha!r}', code='range')


@dataclass(frozen=True)
class Truncation:
    """How a path was cut to finitely many atoms."""

    mode: str
    eps: float = None
    n_atoms: int = None
    residual: float = None

    def as_dict(self):
        payload = {'mode': self.mode}
        if self.mode == STICK_BREAKING:
            payload.update(eps=self.eps, residual=self.residual)
        else:
            payload.update(n_atoms=self.n_atoms)
        return payload

    @classmethod
    def from_dict(cls, payload):
        return cls(**payload)


@dataclass(frozen=True, eq=False)
class TruncatedPath:
    """A realized random probability measure and the truncation that produced it."""

    measure: DiscreteMeasure
    truncation: Truncation = field(default=None)

    def as_dict(self):
        payload = self.measure.as_dict()
        payload['truncation'] = self.truncation.as_dict()
        return payload


def dp_posterior_params(alpha, base, data):
    """
    Conjugate update of DP(alpha H) given data.

    Returns DPParams(alpha + m, p H + (1 - p) F_m) with p = alpha/(alpha + m)
    and F_m the plain empirical measure; with no data the prior comes back
    unchanged. Pure algebra, no sampling.
    """
    if not (math.isfinite(alpha) and alpha > 0):
        raise InputError(f'concentration must be positive and finite, got {alpha!r}', code='range')
    points = as_points(data, base.dim)
    m = points.shape[0]
    if m == 0:
        return DPParams(alpha, base)
    empirical = DiscreteMeasure(points, np.full(m, 1.0 / m))
    return DPParams(alpha + m, MixtureBase(alpha / (alpha + m), base, empirical))


def _stick_lengths(alpha, eps, rng):
    """
    Stick-breaking weights until the unbroken remainder is at most ``eps``.

    With v ~ Beta(1, alpha), 1 - v has the law of U**(1/alpha), so the log of
    the remainder is a running sum of log(U)/alpha. Uniforms are drawn in
    batches sized to the expected number of breaks.
    """
    log_eps = math.log(eps)
    batch = max(16, int(math.ceil(1.2 * alpha * -log_eps)) + 1)
    log_rest = 0.0
    chunks = []
    while log_rest > log_eps:
        steps = np.log1p(-rng.random(batch)) / alpha
        trail = log_rest + np.cumsum(steps)
        stop = np.flatnonzero(trail <= log_eps)
        if stop.size:
            steps, trail = steps[:stop[0] + 1], trail[:stop[0] + 1]
        previous = np.concatenate([[log_rest], trail[:-1]])
        chunks.append(np.exp(previous) * -np.expm1(steps))
        log_rest = float(trail[-1])
    return np.concatenate(chunks), math.exp(log_rest)


def sample_dp_stick_breaking(params, eps=None, rng=None):
    """
    Truncated stick-breaking draw from DP(alpha H).

    Draw order: stick uniforms (batched), then K + 1 base atoms; the last
    atom carries the residual mass so the weights sum to one.
    """
    eps = setting('DIP_STICK_BREAKING_EPS', 1e-6) if eps is None else eps
    if not 0.0 < eps < 1.0:
        raise InputError(f'stick-breaking tolerance must lie in (0, 1), got {eps!r}', code='sampler')
    sticks, residual = _stick_lengths(params.alpha, eps, rng)
    atoms = params.base.sample(sticks.size + 1, rng)
    weights = np.append(sticks, residual)
    logger.debug(f'stick-breaking path: alpha={params.alpha}, {sticks.size} sticks, residual {residual:.3e}')
    return TruncatedPath(
        DiscreteMeasure(atoms, weights / weights.sum()),
        Truncation(STICK_BREAKING, eps=eps, residual=residual),
    )


def sample_dp_finite(params, n_atoms=None, rng=None):
    """
    Finite-N approximation: N i.i.d. base atoms with Dirichlet(alpha/N, ...) weights.

    Draw order: the N atoms, then the weights.
    """
    n_atoms = setting('DIP_FINITE_N_ATOMS', 2000) if n_atoms is None else n_atoms
    if isinstance(n_atoms, bool) or int(n_atoms) != n_atoms or n_atoms < 1:
        raise InputError(f'atom count must be a positive integer, got {n_atoms!r}', code='sampler')
    n_atoms = int(n_atoms)
    atoms = params.base.sample(n_atoms, rng)
    weights = finite_weights(params.alpha, n_atoms, rng)
    return TruncatedPath(DiscreteMeasure(atoms, weights), Truncation(FINITE, n_atoms=n_atoms))


@dataclass(frozen=True)
class SamplerConfig:
    """Which DP path sampler to use and its truncation parameter."""

    mode: str = STICK_BREAKING
    eps: float = None
    n_atoms: int = None

    def __post_init__(self):
        if self.mode not in (STICK_BREAKING, FINITE):
            raise InputError(f"sampler must be '{STICK_BREAKING}' or '{FINITE}', got {self.mode!r}", code='sampler')
        if self.mode == STICK_BREAKING:
            eps = setting('DIP_STICK_BREAKING_EPS', 1e-6) if self.eps is None else float(self.eps)
            if not 0.0 < eps < 1.0:
                raise InputError(f'stick-breaking tolerance must lie in (0, 1), got {eps!r}', code='sampler')
            object.__setattr__(self, 'eps', eps)
        else:
            n_atoms = setting('DIP_FINITE_N_ATOMS', 2000) if self.n_atoms is None else self.n_atoms
            if isinstance(n_atoms, bool) or int(n_atoms) != n_atoms or n_atoms < 1:
                raise InputError(f'atom count must be a positive integer, got {n_atoms!r}', code='sampler')
            object.__setattr__(self, 'n_atoms', int(n_atoms))

    @classmethod
    def parse(cls, spec):
        """'stick-breaking', 'stick-breaking:1e-6', 'finite' or 'finite:2000'."""
        mode, _, value = str(spec).partition(':')
        try:
            if mode == STICK_BREAKING:
                return cls(mode, eps=float(value) if value else None)
            if mode == FINITE:
                return cls(mode, n_atoms=int(value) if value else None)
        except ValueError:
            raise InputError(f'malformed sampler spec {spec!r}', code='sampler')
        raise InputError(f'unknown sampler {mode!r}', code='sampler')

    def draw(self, params, rng):
        if self.mode == STICK_BREAKING:
            return sample_dp_stick_breaking(params, self.eps, rng)
        return sample_dp_finite(params, self.n_atoms, rng)
