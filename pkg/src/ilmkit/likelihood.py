"""Exact log-likelihood of observed infection (and removal) times.

The likelihood runs over transitions ``t = tmin .. tmax-1``: a susceptible at
``t`` either shows up infected at ``t + 1`` (factor P(i, t)) or is still
susceptible at ``t + 1`` (factor 1 - P(i, t)).

Everything that depends only on the data is folded into a
:class:`LikelihoodProblem` once, so a parameter update costs one kernel
evaluation per interacting (susceptible, infective) pair:

* survival terms contribute ``-lambda`` each and are linear in the pair
  kernel, so they collapse to ``sum_ij W_ij * Omega_S(i) * Omega_T(j) * kappa(ij)``
  where ``W_ij`` counts the steps in which j was infectious while i survived;
* each observed infection contributes ``log(-expm1(-lambda))`` with lambda
  built from the infectives present just before it.
"""
import math

import numpy as np

from . import kernel as _kernel
from .errors import DataError, PositivityError, RequestError
from .model import NETWORK, SIR


def _state_matrices(events, tmin, tmax):
    """Boolean (T x N) matrices over t = tmin..tmax-1: infectious at t, susceptible at t+1."""
    times = np.arange(tmin, tmax)[:, None]
    inf = events.inftime[None, :]
    infected = (inf > 0) & (inf <= times)
    if events.framework == SIR:
        rem = events.remtime[None, :]
        infectious = infected & ~((rem > 0) & (rem <= times))
    else:
        infectious = infected
    survives = (inf == 0) | (inf > times + 1)
    return infectious, survives


class LikelihoodProblem:
    """Data-dependent pieces of the log-likelihood for one model structure.

    ``model`` supplies the structure (framework, kernel, formulas, data); the
    parameter values in it are ignored by :meth:`__call__`.
    """

    def __init__(self, model, events, tmin=None, tmax=None):
        if events.size != model.size:
            raise DataError(f"events cover {events.size} individuals, population has {model.size}")
        if events.framework != model.framework:
            raise DataError(
                f"events are {events.framework} but the model is {model.framework}"
            )
        tmin = events.tmin if tmin is None else int(tmin)
        tmax = events.tmax if tmax is None else int(tmax)
        if tmax < tmin:
            raise RequestError(f"tmax ({tmax}) is before tmin ({tmin})")
        if tmax > events.tmax:
            raise RequestError(f"tmax ({tmax}) is beyond the data horizon ({events.tmax})")
        self.model = model
        self.spec = model.spec
        self.tmin, self.tmax = tmin, tmax
        self._split = np.cumsum([len(self.spec.alpha), len(self.spec.phi), len(self.spec.beta)])

        infectious, survives = _state_matrices(events, tmin, tmax)
        # susceptible at t+1 implies susceptible at t, so rows and columns never overlap
        w = survives.T.astype(float) @ infectious.astype(float)
        rows, cols = np.nonzero(w)
        counts = w[rows, cols]
        new = np.flatnonzero((events.inftime > tmin) & (events.inftime <= tmax))
        step = events.inftime[new] - 1 - tmin
        ev_idx, ev_cols = np.nonzero(infectious[step])

        if model.spec.kernel == NETWORK:
            # pairs with no contact in any network contribute nothing
            keep = self._has_contact(rows, cols)
            rows, cols, counts = rows[keep], cols[keep], counts[keep]
            keep = self._has_contact(new[ev_idx], ev_cols)
            ev_idx, ev_cols = ev_idx[keep], ev_cols[keep]

        self.n_survival_terms = int(survives.sum())
        self.surv_rows, self.surv_cols, self.surv_counts = rows, cols, counts
        self.new = new
        self.ev_idx, self.ev_rows, self.ev_cols = ev_idx, new[ev_idx], ev_cols
        self.at_risk = np.flatnonzero(survives.any(axis=0) | np.isin(np.arange(model.size), new))
        self.sus_design = model.sus_design
        self.trans_design = model.trans_design

    def _has_contact(self, rows, cols):
        mask = np.zeros(rows.size, dtype=bool)
        for m in self.model.context.matrices:
            mask |= m[rows, cols] > 0
        return mask

    def split(self, theta):
        a, p, b = self._split
        return theta[:a], theta[a:p], theta[p:b], theta[b]

    def __call__(self, theta):
        """Log-likelihood at the flat parameter vector ``theta`` (alpha, phi, beta, epsilon)."""
        alpha, phi, beta, eps = self.split(np.asarray(theta, dtype=float))
        sus = self.sus_design @ alpha
        if self.at_risk.size and not np.all(sus[self.at_risk] > 0):
            k = self.at_risk[np.flatnonzero(~(sus[self.at_risk] > 0))[0]]
            raise PositivityError(f"susceptibility of individual {k + 1} is {sus[k]:g}; it must be > 0")
        if self.trans_design.shape[1]:
            trans = self.trans_design @ phi
            if np.any(trans < 0):
                raise PositivityError("transmissibility must be >= 0")
        else:
            trans = None
        ctx = self.model.context

        kern = _kernel.pair_kernel(ctx, beta, self.surv_rows, self.surv_cols)
        contrib = self.surv_counts * kern
        if trans is not None:
            contrib = contrib * trans[self.surv_cols]
        survival = float(sus[self.surv_rows] @ contrib) + eps * self.n_survival_terms

        if self.new.size == 0:
            return -survival
        kern = _kernel.pair_kernel(ctx, beta, self.ev_rows, self.ev_cols)
        if trans is not None:
            kern = kern * trans[self.ev_cols]
        pressure = np.bincount(self.ev_idx, weights=kern, minlength=self.new.size)
        lam = sus[self.new] * pressure + eps
        if np.any(lam <= 0):
            return -math.inf
        log_p = np.log(-np.expm1(-lam))
        return math.fsum((-survival, *log_p.tolist()))


def log_likelihood(model, events, tmin=None, tmax=None):
    """Log-likelihood of ``events`` under the parameters held in ``model``."""
    problem = LikelihoodProblem(model, events, tmin, tmax)
    return problem(model.spec.theta)


class _Product:
    """Running product kept as mantissa * 2**exponent so long products do not underflow."""

    def __init__(self):
        self.mantissa, self.exponent = 1.0, 0

    def times(self, x):
        if x == 0.0:
            self.mantissa = 0.0
            return
        m, e = math.frexp(self.mantissa * x)
        self.mantissa, self.exponent = m, self.exponent + e

    def log(self):
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(self.mantissa) + self.exponent * math.log(2.0)


def reference_log_likelihood(model, events, tmin=None, tmax=None):
    """Literal nested-product evaluation for small problems (N <= 12, horizon <= 6).

    Kept deliberately naive: no precomputation, kernel terms recomputed from
    raw coordinates or network entries, the log taken once at the end.
    """
    n = model.size
    tmin = events.tmin if tmin is None else int(tmin)
    tmax = events.tmax if tmax is None else int(tmax)
    if n > 12 or tmax - tmin > 6:
        raise RequestError("reference likelihood is limited to N <= 12 and tmax - tmin <= 6")
    spec, pop = model.spec, model.population

    def omega_s(i):
        total = spec.alpha[0] if spec.sus_formula.intercept else 0.0
        offset = 1 if spec.sus_formula.intercept else 0
        for k, name in enumerate(spec.sus_formula.terms):
            total += spec.alpha[offset + k] * pop.covariates[name][i]
        return total

    def omega_t(j):
        if not spec.trans_formula.terms:
            return 1.0
        return sum(spec.phi[k] * pop.covariates[name][j]
                   for k, name in enumerate(spec.trans_formula.terms))

    def kappa(i, j):
        if spec.kernel == NETWORK:
            weights = spec.beta or (1.0,)
            return sum(b * float(m[i, j]) for b, m in zip(weights, model.networks.matrices))
        (xi, yi), (xj, yj) = pop.coords[i], pop.coords[j]
        return math.hypot(xi - xj, yi - yj) ** (-spec.beta[0])

    def infectious(j, t):
        inf = events.inftime[j]
        if inf == 0 or inf > t:
            return False
        if events.framework == SIR and events.remtime[j] != 0 and events.remtime[j] <= t:
            return False
        return True

    def susceptible(i, t):
        return events.inftime[i] == 0 or events.inftime[i] > t

    product = _Product()
    for t in range(tmin, tmax):
        for i in range(n):
            if not susceptible(i, t):
                continue
            s = omega_s(i)
            if not s > 0:
                raise PositivityError(f"susceptibility of individual {i + 1} is {s:g}")
            total = 0.0
            for j in range(n):
                if j != i and infectious(j, t):
                    total += omega_t(j) * kappa(i, j)
            lam = s * total + spec.spark
            if events.inftime[i] == t + 1:
                product.times(-math.expm1(-lam))
            else:
                product.times(math.exp(-lam))
    return product.log()
