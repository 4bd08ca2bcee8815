"""Random-walk Metropolis-Hastings for ILM parameters, chain summaries and DIC."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import IlmError, InitializationError, ModelError, RequestError
from .likelihood import LikelihoodProblem
from .rng import make_rng, spawn

_LOG_SQRT_2_OVER_PI = 0.5 * math.log(2.0 / math.pi)


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ModelError("gamma prior needs shape > 0 and rate > 0")

    def logpdf(self, x):
        if not x > 0:
            return -math.inf
        return (self.shape * math.log(self.rate) - math.lgamma(self.shape)
                + (self.shape - 1.0) * math.log(x) - self.rate * x)


@dataclass(frozen=True)
class HalfNormal:
    """Half-normal on [0, inf); ``scale`` is the sd of the underlying normal."""

    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ModelError("half-normal prior needs scale > 0")

    def logpdf(self, x):
        if x < 0:
            return -math.inf
        z = x / self.scale
        return _LOG_SQRT_2_OVER_PI - math.log(self.scale) - 0.5 * z * z


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ModelError("uniform prior needs low < high")

    def logpdf(self, x):
        if self.low <= x <= self.high:
            return -math.log(self.high - self.low)
        return -math.inf


PRIORS = {"gamma": Gamma, "halfnormal": HalfNormal, "half-normal": HalfNormal, "uniform": Uniform}


def make_prior(dist, *params):
    try:
        cls = PRIORS[dist.lower()]
    except KeyError:
        raise ModelError(f"unknown prior {dist!r}; choose gamma, halfnormal or uniform") from None
    return cls(*map(float, params))


def log_prior(theta, priors):
    """Sum of independent log prior densities; ``None`` entries (fixed parameters) are skipped."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if len(priors) != theta.size:
        raise ModelError(f"{theta.size} parameters but {len(priors)} priors")
    total = 0.0
    for x, prior in zip(theta, priors):
        if prior is None:
            continue
        lp = prior.logpdf(float(x))
        if lp == -math.inf:
            return -math.inf
        total += lp
    return total


@dataclass(frozen=True)
class MCMCControls:
    """Sampler settings. A proposal variance of 0 holds that parameter at its initial value."""

    niter: int
    init: tuple
    proposal_var: tuple
    adaptive: bool = False
    target_acc_rate: float = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "init", tuple(float(x) for x in self.init))
        object.__setattr__(self, "proposal_var", tuple(float(x) for x in self.proposal_var))
        if int(self.niter) < 1:
            raise RequestError("niter must be >= 1")
        if len(self.init) != len(self.proposal_var):
            raise ModelError("init and proposal_var must have the same length")
        if any(v < 0 or not math.isfinite(v) for v in self.proposal_var):
            raise ModelError("proposal variances must be finite and >= 0")
        if not any(v > 0 for v in self.proposal_var):
            raise ModelError("at least one proposal variance must be > 0")
        if self.adaptive and not (self.target_acc_rate is not None and 0 < self.target_acc_rate < 1):
            raise ModelError("adaptive sampling needs target_acc_rate in (0, 1)")


@dataclass(eq=False)
class Chain:
    labels: list
    samples: np.ndarray
    loglik: np.ndarray
    accepted: np.ndarray
    free: np.ndarray
    # proposal scale after each iteration (adaptive runs only)
    scale: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def niter(self):
        return self.samples.shape[0]

    def acceptance_rate(self, start=1, end=None):
        acc = self.accepted[start - 1:end]
        return float(acc.mean()) if acc.size else math.nan

    def segment(self, start=1, thin=1):
        if not 1 <= start <= self.niter:
            raise RequestError(f"start={start} is outside the chain (1..{self.niter})")
        if thin < 1:
            raise RequestError("thin must be >= 1")
        return self.samples[start - 1::thin], self.loglik[start - 1::thin]


class Posterior:
    """Log posterior over the flat parameter vector, with the likelihood precomputed."""

    def __init__(self, model, events, priors, tmin=None, tmax=None):
        self.likelihood = LikelihoodProblem(model, events, tmin, tmax)
        self.labels = model.spec.labels
        self.priors = _prior_list(priors, self.labels)

    def __call__(self, theta):
        """(log posterior, log likelihood); the latter is nan when the prior already rules theta out."""
        if not (np.all(theta[:-1] > 0) and theta[-1] >= 0):
            return -math.inf, math.nan
        lp = log_prior(theta, self.priors)
        if lp == -math.inf:
            return -math.inf, math.nan
        try:
            ll = self.likelihood(theta)
        except IlmError:
            return -math.inf, math.nan
        return lp + ll, ll


def _prior_list(priors, labels):
    if isinstance(priors, dict):
        unknown = set(priors) - set(labels)
        if unknown:
            raise ModelError(f"priors given for unknown parameters {sorted(unknown)}")
        return [priors.get(label) for label in labels]
    priors = list(priors)
    if len(priors) != len(labels):
        raise ModelError(f"{len(labels)} parameters but {len(priors)} priors")
    return priors


def mh_step(theta, current, target, chol, free, rng):
    """One joint random-walk update of the free coordinates.

    ``current`` is ``(log posterior, log likelihood)`` at ``theta``; ``chol``
    is a Cholesky factor of the proposal covariance over the free
    coordinates. Returns ``(theta, current, accepted, acceptance probability)``.
    """
    z = rng.standard_normal(free.size)
    u = rng.random()
    proposal = theta.copy()
    proposal[free] += chol @ z
    cand = target(proposal)
    log_ratio = cand[0] - current[0]
    if log_ratio >= 0:
        prob = 1.0
    elif log_ratio == -math.inf or math.isnan(log_ratio):
        prob = 0.0
    else:
        prob = math.exp(log_ratio)
    if u < prob:
        return proposal, cand, True, prob
    return theta, current, False, prob


class _Adapter:
    """Scale-and-covariance adaptation toward a target acceptance rate.

    The log scale moves by ``k**-0.6 * (acceptance probability - target)``
    every iteration. The proposal shape starts as the diagonal of the user's
    proposal variances; after a warm-up it switches to the sample covariance
    of the chain so far and is then updated recursively with the same
    decaying weights. Adaptation never stops.
    """

    def __init__(self, var0, target, warmup):
        self.d = var0.size
        self.target = target
        self.warmup = warmup
        self.log_scale = 0.0
        self.shape = np.diag(var0)
        self.switched = False
        self.k = 0
        self._sum = np.zeros(self.d)
        self._outer = np.zeros((self.d, self.d))
        self.mean = None
        self.chol = np.diag(np.sqrt(var0))

    def update(self, x, prob):
        self.k += 1
        eta = self.k ** -0.6
        self.log_scale += eta * (prob - self.target)
        if not self.switched:
            self._sum += x
            self._outer += np.outer(x, x)
            if self.k >= self.warmup:
                mean = self._sum / self.k
                cov = (self._outer - self.k * np.outer(mean, mean)) / (self.k - 1)
                if np.all(np.diag(cov) > 0):
                    self.switched = True
                    self.mean = mean
                    self.shape = cov
                    self.log_scale = math.log(2.38 / math.sqrt(self.d))
        else:
            dx = x - self.mean
            self.mean = self.mean + eta * dx
            self.shape = self.shape + eta * (np.outer(dx, dx) - self.shape)
        self._refactor()

    def _refactor(self):
        jitter = 1e-10 * np.diag(self.shape)
        try:
            base = np.linalg.cholesky(self.shape + np.diag(jitter))
        except np.linalg.LinAlgError:
            return
        self.chol = math.exp(self.log_scale) * base

    @property
    def scale(self):
        return math.exp(self.log_scale)


def run_mcmc(model, events, priors, controls, tmin=None, tmax=None):
    """Sample the posterior of (alpha, phi, beta, epsilon) given observed events.

    ``priors`` maps parameter labels (``alpha.1``, ``phi.2``, ``beta.1``,
    ``epsilon``) to prior objects; fixed parameters need none.
    """
    target = Posterior(model, events, priors, tmin, tmax)
    labels = target.labels
    p = len(labels)
    if len(controls.init) != p:
        raise ModelError(f"{p} parameters ({', '.join(labels)}) but {len(controls.init)} initial values")
    var0 = np.asarray(controls.proposal_var)
    free = np.flatnonzero(var0 > 0)
    for k in free:
        if target.priors[k] is None:
            raise ModelError(f"parameter {labels[k]} is free but has no prior")

    theta = np.asarray(controls.init, dtype=float)
    current = target(theta)
    if current[0] == -math.inf:
        raise InitializationError(
            "the initial values have zero posterior density; choose different starting values"
        )
    rng = make_rng(controls.seed)
    niter = int(controls.niter)
    samples = np.empty((niter, p))
    loglik = np.empty(niter)
    accepted = np.zeros(niter, dtype=bool)
    adapter = None
    scales = None
    if controls.adaptive:
        adapter = _Adapter(var0[free], controls.target_acc_rate, warmup=max(200, 50 * free.size))
        scales = np.empty(niter)
    chol = np.diag(np.sqrt(var0[free]))

    for it in range(niter):
        if adapter is not None:
            chol = adapter.chol
        theta, current, acc, prob = mh_step(theta, current, target, chol, free, rng)
        samples[it] = theta
        loglik[it] = current[1]
        accepted[it] = acc
        if adapter is not None:
            adapter.update(theta[free], prob)
            scales[it] = adapter.scale

    mask = np.zeros(p, dtype=bool)
    mask[free] = True
    meta = {"seed": controls.seed, "tmin": target.likelihood.tmin, "tmax": target.likelihood.tmax}
    return Chain(list(labels), samples, loglik, accepted, mask, scales, meta)


def run_chains(model, events, priors, controls, n_chains, threads=None, tmin=None, tmax=None):
    """Independent chains with seeds spawned from ``controls.seed``."""
    seeds = [int(g.integers(2**63)) for g in spawn(controls.seed, n_chains)]

    def one(seed):
        c = MCMCControls(controls.niter, controls.init, controls.proposal_var,
                         controls.adaptive, controls.target_acc_rate, seed)
        return run_mcmc(model, events, priors, c, tmin, tmax)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, seeds))


QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


def batch_means_se(x):
    """Monte Carlo standard error of the mean using floor(sqrt(M)) non-overlapping batches."""
    x = np.asarray(x, dtype=float)
    m = x.size
    a = math.isqrt(m)
    if a < 2:
        return math.nan
    b = m // a
    means = x[:a * b].reshape(a, b).mean(axis=1)
    var = b * np.sum((means - means.mean()) ** 2) / (a - 1)
    return math.sqrt(var / m)


@dataclass
class ParameterSummary:
    label: str
    mean: float
    sd: float
    naive_se: float
    ts_se: float
    quantiles: tuple


@dataclass
class ChainSummary:
    start: int
    end: int
    thin: int
    size: int
    rows: list
    acceptance_rate: float

    def row(self, label):
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_text(self):
        lines = [
            f"Iterations = {self.start}:{self.end}",
            f"Thinning interval = {self.thin}",
            f"Sample size = {self.size}",
            f"Acceptance rate = {self.acceptance_rate:.4f}",
            "",
            "1. Mean, SD and standard errors of the mean:",
            "",
            f"{'':<10}{'Mean':>13}{'SD':>13}{'Naive SE':>13}{'Time-series SE':>16}",
        ]
        for r in self.rows:
            lines.append(f"{r.label:<10}{r.mean:>13.6g}{r.sd:>13.6g}{r.naive_se:>13.6g}{r.ts_se:>16.6g}")
        lines += ["", "2. Quantiles:", ""]
        lines.append(f"{'':<10}" + "".join(f"{q * 100:>12g}%" for q in QUANTILES))
        for r in self.rows:
            lines.append(f"{r.label:<10}" + "".join(f"{v:>13.6g}" for v in r.quantiles))
        return "\n".join(lines) + "\n"


def _mean(x, axis=0):
    """Mean computed about the first value, so constant input gives that value exactly."""
    x = np.asarray(x, dtype=float)
    ref = np.take(x, 0, axis=axis)
    return ref + np.mean(x - np.expand_dims(ref, axis), axis=axis)


def summarize_chain(chain, start=1, thin=1):
    """Mean, SD, naive and batch-means standard errors and quantiles for each free parameter."""
    x, _ = chain.segment(start, thin)
    m = x.shape[0]
    rows = []
    for k in np.flatnonzero(chain.free):
        col = x[:, k]
        mean = float(_mean(col))
        sd = math.sqrt(np.sum((col - mean) ** 2) / (m - 1)) if m > 1 else 0.0
        rows.append(ParameterSummary(
            chain.labels[k],
            mean,
            sd,
            sd / math.sqrt(m),
            batch_means_se(col),
            tuple(float(q) for q in np.quantile(col, QUANTILES)),
        ))
    end = start + (m - 1) * thin
    return ChainSummary(start, end, thin, m, rows, chain.acceptance_rate(start))


@dataclass
class DICResult:
    dic: float
    mean_deviance: float
    p_d: float
    deviance_at_mean: float


def dic(chain, model, events, start=1, tmin=None, tmax=None):
    """Deviance information criterion, DIC = mean deviance + p_D with p_D = mean deviance - D(posterior mean).

    The window defaults to the one the chain was fitted on when the chain
    records it, and otherwise to the full observed horizon.
    """
    x, ll = chain.segment(start)
    dbar = float(_mean(-2.0 * ll))
    theta_bar = _mean(x, axis=0)
    try:
        at_mean = model.with_theta(theta_bar)
    except ModelError as exc:
        raise ModelError(f"posterior mean is outside the parameter space: {exc}") from None
    if tmin is None:
        tmin = chain.meta.get("tmin")
    if tmax is None:
        tmax = chain.meta.get("tmax")
    problem = LikelihoodProblem(model, events, tmin, tmax)
    d_mean = -2.0 * problem(at_mean.spec.theta)
    p_d = dbar - d_mean
    return DICResult(dbar + p_d, dbar, p_d, d_mean)
