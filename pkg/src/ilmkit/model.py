"""Populations, covariate formulas, model specifications and epidemic event records."""
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import kernel as _kernel
from .errors import DataError, ModelError, PositivityError, ResolutionError

SI = "SI"
SIR = "SIR"
SPATIAL = "spatial"
NETWORK = "network"

FRAMEWORKS = (SI, SIR)
KERNELS = (SPATIAL, NETWORK)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Population:
    """Individuals with optional (x, y) locations and named covariate columns.

    Ids are implicit: individual ``k`` (0-based array position) has id ``k + 1``.
    """

    size: int
    coords: np.ndarray = None
    covariates: dict = field(default_factory=dict)

    def __post_init__(self):
        n = int(self.size)
        if n < 1:
            raise DataError("a population needs at least one individual")
        object.__setattr__(self, "size", n)
        if self.coords is not None:
            xy = _frozen(self.coords)
            if xy.shape != (n, 2):
                raise DataError(f"coords must have shape ({n}, 2), got {xy.shape}")
            if not np.all(np.isfinite(xy)):
                raise DataError("coords contain non-finite values")
            object.__setattr__(self, "coords", xy)
        cols = {}
        for name, values in self.covariates.items():
            col = _frozen(values)
            if col.shape != (n,):
                raise DataError(f"covariate {name!r} has length {col.size}, expected {n}")
            if not np.all(np.isfinite(col)):
                raise DataError(f"covariate {name!r} has missing or non-finite values")
            cols[str(name)] = col
        object.__setattr__(self, "covariates", cols)

    @property
    def ids(self):
        return np.arange(1, self.size + 1)

    @property
    def has_coords(self):
        return self.coords is not None

    def permuted(self, order):
        """Population relabelled so that new position k holds old individual order[k]."""
        order = np.asarray(order)
        return Population(
            self.size,
            None if self.coords is None else self.coords[order],
            {k: v[order] for k, v in self.covariates.items()},
        )


@dataclass(frozen=True, eq=False)
class ContactNetworkSet:
    """One or more weighted N x N contact matrices, ``C[i, j]`` = route from j to i."""

    matrices: tuple
    directed: tuple = None

    def __post_init__(self):
        mats = tuple(_frozen(m) for m in self.matrices)
        if not mats:
            raise DataError("a network set needs at least one matrix")
        directed = self.directed
        if directed is None:
            directed = (True,) * len(mats)
        directed = tuple(bool(d) for d in directed)
        if len(directed) != len(mats):
            raise DataError("one directed flag is needed per matrix")
        n = mats[0].shape[0]
        for k, (m, d) in enumerate(zip(mats, directed)):
            if m.shape != (n, n):
                raise DataError(f"network {k + 1} is not {n} x {n}")
            if not np.all(np.isfinite(m)) or np.any(m < 0):
                raise DataError(f"network {k + 1} has negative or non-finite weights")
            if np.any(np.diag(m) != 0):
                raise DataError(f"network {k + 1} has a non-zero diagonal")
            if not d and not np.array_equal(m, m.T):
                raise DataError(f"network {k + 1} is flagged undirected but is not symmetric")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "directed", directed)

    @property
    def size(self):
        return self.matrices[0].shape[0]

    def __len__(self):
        return len(self.matrices)

    def permuted(self, order):
        order = np.asarray(order)
        return ContactNetworkSet(
            tuple(m[np.ix_(order, order)] for m in self.matrices), self.directed
        )


@dataclass(frozen=True)
class CovariateFormula:
    intercept: bool = True
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(str(t) for t in self.terms))

    @property
    def n_params(self):
        return int(self.intercept) + len(self.terms)

    @classmethod
    def parse(cls, text, intercept=True):
        """Parse ``"1 + A"``, ``"~ -1 + X1 + X2"``, ``"A"`` and the like.

        ``intercept`` is the default when the text says neither ``1`` nor ``-1``.
        """
        text = (text or "").strip().lstrip("~").replace(" ", "")
        terms = []
        if text:
            for tok in text.replace("-", "+-").split("+"):
                if not tok:
                    continue
                if tok == "1":
                    intercept = True
                elif tok in ("-1", "0"):
                    intercept = False
                elif tok.startswith("-"):
                    raise ModelError(f"cannot remove term {tok[1:]!r}; only -1 is supported")
                else:
                    terms.append(tok)
        return cls(intercept, tuple(terms))

    def __str__(self):
        parts = ["1" if self.intercept else "-1", *self.terms]
        return " + ".join(parts)


def build_design_matrix(pop, formula):
    """N x p design matrix: an optional column of ones, then the named covariates."""
    cols = []
    if formula.intercept:
        cols.append(np.ones(pop.size))
    for name in formula.terms:
        if name not in pop.covariates:
            raise ResolutionError(f"covariate {name!r} is not a column of the population")
        cols.append(pop.covariates[name])
    if not cols:
        return _frozen(np.empty((pop.size, 0)))
    return _frozen(np.column_stack(cols))


def linear_predictor(design, params, i):
    """Row ``i`` of ``design`` dotted with ``params``; 1.0 for an empty design."""
    design = np.asarray(design)
    if not -design.shape[0] <= i < design.shape[0]:
        raise IndexError(f"individual index {i} out of range")
    params = np.asarray(params, dtype=float)
    if design.shape[1] == 0:
        return 1.0
    return float(design[i] @ params)


@dataclass(frozen=True)
class ModelSpec:
    """Compartment framework, kernel choice, covariate formulas and parameter values.

    ``beta`` holds one power for a spatial kernel, one weight per network for a
    network kernel, or nothing for a single network whose effect is fixed at 1.
    """

    framework: str = SI
    kernel: str = SPATIAL
    sus_formula: CovariateFormula = CovariateFormula(True, ())
    trans_formula: CovariateFormula = CovariateFormula(False, ())
    alpha: tuple = (1.0,)
    phi: tuple = ()
    beta: tuple = ()
    spark: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "phi", "beta"):
            v = getattr(self, name)
            v = (v,) if np.isscalar(v) else v
            object.__setattr__(self, name, tuple(float(x) for x in v))
        object.__setattr__(self, "spark", float(self.spark))
        object.__setattr__(self, "framework", str(self.framework).upper())
        object.__setattr__(self, "kernel", str(self.kernel).lower())

    @property
    def labels(self):
        return (
            [f"alpha.{k + 1}" for k in range(len(self.alpha))]
            + [f"phi.{k + 1}" for k in range(len(self.phi))]
            + [f"beta.{k + 1}" for k in range(len(self.beta))]
            + ["epsilon"]
        )

    @property
    def theta(self):
        return np.array([*self.alpha, *self.phi, *self.beta, self.spark])

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        a, p, b = len(self.alpha), len(self.phi), len(self.beta)
        if theta.shape != (a + p + b + 1,):
            raise ModelError(f"expected {a + p + b + 1} parameters, got {theta.shape}")
        return replace(
            self,
            alpha=tuple(theta[:a]),
            phi=tuple(theta[a:a + p]),
            beta=tuple(theta[a + p:a + p + b]),
            spark=float(theta[-1]),
        )


@dataclass(frozen=True, eq=False)
class CheckedModel:
    """A validated spec bound to its population, networks and design matrices."""

    spec: ModelSpec
    population: Population
    networks: ContactNetworkSet
    sus_design: np.ndarray
    trans_design: np.ndarray
    context: object

    @property
    def size(self):
        return self.population.size

    @property
    def framework(self):
        return self.spec.framework

    def with_theta(self, theta):
        spec = self.spec.with_theta(theta)
        _check_params(spec)
        return replace(self, spec=spec)

    @cached_property
    def sus_values(self):
        return _frozen(self.sus_design @ np.asarray(self.spec.alpha))

    @cached_property
    def trans_values(self):
        if self.trans_design.shape[1] == 0:
            return _frozen(np.ones(self.size))
        return _frozen(self.trans_design @ np.asarray(self.spec.phi))

    @cached_property
    def kernel(self):
        k = _kernel.kernel_matrix(self.context, self.spec.beta)
        k.setflags(write=False)
        return k

    def check_susceptibility(self, who):
        """Raise unless Omega_S > 0 for every index in ``who``."""
        s = self.sus_values[who]
        if s.size and not np.all(s > 0):
            bad = np.asarray(who).reshape(-1)[np.flatnonzero(~(s > 0))[0]]
            raise PositivityError(
                f"susceptibility of individual {int(bad) + 1} is {self.sus_values[bad]:g}; it must be > 0"
            )


def _check_params(spec):
    for name in ("alpha", "phi", "beta"):
        v = getattr(spec, name)
        if any(not (x > 0) or not np.isfinite(x) for x in v):
            raise ModelError(f"{name} components must be finite and > 0, got {v}")
    if not (spec.spark >= 0) or not np.isfinite(spec.spark):
        raise ModelError(f"spark must be finite and >= 0, got {spec.spark}")


def validate_spec(spec, pop, nets=None):
    """Check every invariant of ``spec`` against the data and resolve design matrices."""
    if spec.framework not in FRAMEWORKS:
        raise ModelError(f"unknown framework {spec.framework!r}")
    if spec.kernel not in KERNELS:
        raise ModelError(f"unknown kernel {spec.kernel!r}")
    if spec.trans_formula.intercept:
        raise ModelError("the transmissibility formula must not have an intercept")
    _check_params(spec)
    if len(spec.alpha) != spec.sus_formula.n_params:
        raise ModelError(
            f"susceptibility formula needs {spec.sus_formula.n_params} alpha values, got {len(spec.alpha)}"
        )
    if spec.sus_formula.n_params == 0:
        raise ModelError("the susceptibility formula must have at least one term")
    if len(spec.phi) != spec.trans_formula.n_params:
        raise ModelError(
            f"transmissibility formula needs {spec.trans_formula.n_params} phi values, got {len(spec.phi)}"
        )
    sus = build_design_matrix(pop, spec.sus_formula)
    trans = build_design_matrix(pop, spec.trans_formula)
    if spec.kernel == SPATIAL:
        if not pop.has_coords:
            raise ModelError("a spatial kernel requires coordinates")
        if len(spec.beta) != 1:
            raise ModelError(f"a spatial kernel takes exactly one beta, got {len(spec.beta)}")
        ctx = _kernel.spatial_context(pop.coords)
    else:
        if nets is None:
            raise ModelError("a network kernel requires contact networks")
        if nets.size != pop.size:
            raise ModelError(f"networks are {nets.size} x {nets.size} but the population has {pop.size}")
        if spec.beta and len(spec.beta) != len(nets):
            raise ModelError(f"{len(nets)} networks but {len(spec.beta)} beta values")
        if not spec.beta and len(nets) != 1:
            raise ModelError("beta may only be omitted for a single network")
        ctx = _kernel.network_context(nets.matrices)
    return CheckedModel(spec, pop, nets, sus, trans, ctx)


@dataclass(frozen=True, eq=False)
class EpidemicEvents:
    """Per-individual infection and removal times; 0 means the event never happened.

    An individual infected at ``inftime`` is infectious on
    ``[inftime, remtime - 1]`` and removed from ``remtime`` on (SIR). A zero
    ``remtime`` for an infected individual means removal was not observed.
    """

    framework: str
    inftime: np.ndarray
    remtime: np.ndarray = None
    tmin: int = 1
    tmax: int = None

    def __post_init__(self):
        fw = str(self.framework).upper()
        if fw not in FRAMEWORKS:
            raise DataError(f"unknown framework {self.framework!r}")
        object.__setattr__(self, "framework", fw)
        inf = np.asarray(self.inftime)
        if inf.ndim != 1 or inf.size == 0:
            raise DataError("inftime must be a non-empty vector")
        if not np.all(np.equal(np.mod(inf, 1), 0)):
            raise DataError("inftime must be integer-valued")
        inf = _frozen(inf, np.int64)
        if np.any(inf < 0):
            raise DataError("inftime must be >= 0")
        object.__setattr__(self, "inftime", inf)
        tmin = int(self.tmin)
        tmax = self.tmax
        if fw == SIR:
            if self.remtime is None:
                raise DataError("SIR events need removal times")
            rem = np.asarray(self.remtime)
            if rem.shape != inf.shape:
                raise DataError("remtime and inftime must have the same length")
            if not np.all(np.equal(np.mod(rem, 1), 0)):
                raise DataError("remtime must be integer-valued")
            rem = _frozen(rem, np.int64)
            if np.any((inf == 0) & (rem != 0)):
                k = int(np.flatnonzero((inf == 0) & (rem != 0))[0])
                raise DataError(f"individual {k + 1} has a removal time but was never infected")
            bad = (inf > 0) & (rem != 0) & (rem <= inf)
            if np.any(bad):
                k = int(np.flatnonzero(bad)[0])
                raise DataError(
                    f"individual {k + 1}: remtime {rem[k]} must be later than inftime {inf[k]}"
                )
            object.__setattr__(self, "remtime", rem)
        else:
            object.__setattr__(self, "remtime", None)
        if tmax is None:
            tmax = max(int(inf.max()), int(self.remtime.max()) if fw == SIR else 0, tmin)
        tmax = int(tmax)
        if tmax < tmin:
            raise DataError(f"tmax ({tmax}) is before tmin ({tmin})")
        infected = inf > 0
        if np.any(infected & (inf < tmin)):
            k = int(np.flatnonzero(infected & (inf < tmin))[0])
            raise DataError(f"individual {k + 1} is infected at {inf[k]}, before tmin={tmin}")
        if np.any(inf > tmax):
            k = int(np.flatnonzero(inf > tmax)[0])
            raise DataError(f"individual {k + 1} is infected at {inf[k]}, after tmax={tmax}")
        object.__setattr__(self, "tmin", tmin)
        object.__setattr__(self, "tmax", tmax)

    @property
    def size(self):
        return self.inftime.size

    def infected_by(self, t):
        return (self.inftime > 0) & (self.inftime <= t)

    def removed(self, t):
        if self.framework == SI:
            return np.zeros(self.size, dtype=bool)
        return (self.remtime > 0) & (self.remtime <= t)

    def susceptible(self, t):
        return ~self.infected_by(t)

    def infectious(self, t):
        return self.infected_by(t) & ~self.removed(t)

    def state(self, t):
        """Compartment codes at time t: 0 = S, 1 = I, 2 = R."""
        s = self.infected_by(t).astype(np.int8)
        s[self.removed(t)] = 2
        return s

    def permuted(self, order):
        order = np.asarray(order)
        return EpidemicEvents(
            self.framework,
            self.inftime[order],
            None if self.remtime is None else self.remtime[order],
            self.tmin,
            self.tmax,
        )
