"""Epidemic curves, spatial snapshots, R0 and posterior predictive bands."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kernel import check_finite_pairs
from .errors import DataError, ModelError, RequestError
from .model import SIR
from .rng import make_rng, spawn
from .simulator import simulate_from

CURVETYPES = ("complete", "susceptible", "totalinfect", "newinfect")
STATE_LABELS = ("S", "I", "R")


@dataclass
class CurveTable:
    """Time-indexed counts; ``series`` maps a column name to one value per time."""

    t: np.ndarray
    series: dict

    def __getitem__(self, name):
        return self.series[name]

    @property
    def names(self):
        return list(self.series)


def epidemic_curves(events, curvetype="complete"):
    """Counts per time point from ``events.tmin`` to ``events.tmax``."""
    if curvetype not in CURVETYPES:
        raise RequestError(f"unknown curvetype {curvetype!r}; choose one of {', '.join(CURVETYPES)}")
    t = np.arange(events.tmin, events.tmax + 1)
    inf = events.inftime[None, :]
    infected = (inf > 0) & (inf <= t[:, None])
    if curvetype == "newinfect":
        return CurveTable(t, {"newinfect": (inf == t[:, None]).sum(axis=1)})
    if curvetype == "totalinfect":
        return CurveTable(t, {"totalinfect": infected.sum(axis=1)})
    s = (~infected).sum(axis=1)
    if curvetype == "susceptible":
        return CurveTable(t, {"susceptible": s})
    if events.framework == SIR:
        rem = events.remtime[None, :]
        removed = (rem > 0) & (rem <= t[:, None])
        r = removed.sum(axis=1)
        return CurveTable(t, {"S": s, "I": infected.sum(axis=1) - r, "R": r})
    return CurveTable(t, {"S": s, "I": infected.sum(axis=1)})


@dataclass
class Snapshot:
    t: int
    coords: np.ndarray
    # 0 = S, 1 = I, 2 = R per individual
    state: np.ndarray

    @property
    def labels(self):
        return [STATE_LABELS[s] for s in self.state]


def spatial_snapshots(events, pop, tmin=None):
    """Each individual's location and compartment for every t from ``tmin`` to ``events.tmax``."""
    if not pop.has_coords:
        raise ModelError("spatial snapshots need coordinates; this is not a spatial population")
    if pop.size != events.size:
        raise DataError("population and events differ in size")
    tmin = events.tmin if tmin is None else int(tmin)
    return [Snapshot(t, pop.coords, events.state(t)) for t in range(tmin, events.tmax + 1)]


@dataclass
class R0Estimate:
    mean: float
    se: float
    counts: np.ndarray


def _secondary_cases(model, index, period, rng):
    # only the index case is infectious; the people it infects do not pass it on
    n = model.size
    others = np.flatnonzero(np.arange(n) != index)
    check_finite_pairs(model.kernel, others, np.array([index]))
    lam = model.sus_values * model.kernel[:, index] * model.trans_values[index]
    lam[index] = 0.0
    p = -np.expm1(-lam)
    infected = np.zeros(n, dtype=bool)
    for _ in range(period):
        u = rng.random(n)
        infected |= u < p
    infected[index] = False
    return int(infected.sum())


def basic_reproduction_number(model, infperiod, replicates=1000, seed=None):
    """Monte Carlo R0: mean number of direct infections by a random index case.

    Each replicate seeds one uniformly chosen individual into an otherwise
    fully susceptible population and counts who it infects during its own
    infectious period. The sparks term is excluded since those infections
    are not caused by the index case.
    """
    if model.framework != SIR:
        raise ModelError("R0 is only defined here for SIR models")
    if replicates < 1:
        raise RequestError("replicates must be >= 1")
    n = model.size
    infperiod = np.broadcast_to(np.asarray(infperiod, dtype=np.int64), (n,))
    if np.any(infperiod < 1):
        raise DataError("infperiod must be >= 1")
    model.check_susceptibility(np.arange(n))
    rng = make_rng(seed)
    counts = np.empty(replicates, dtype=np.int64)
    for r in range(replicates):
        index = int(rng.integers(n))
        counts[r] = _secondary_cases(model, index, int(infperiod[index]), rng)
    mean = float(counts.mean())
    se = float(counts.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else math.nan
    return R0Estimate(mean, se, counts)


@dataclass
class PredictiveBands:
    t: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    observed: np.ndarray
    # one newinfect curve per posterior draw
    curves: np.ndarray
    t_star: int

    def table(self):
        return CurveTable(self.t, {
            "observed": self.observed,
            "median": self.median,
            "lower": self.lower,
            "upper": self.upper,
        })


def thin_evenly(n_available, draws):
    if draws > n_available:
        raise RequestError(f"{draws} draws requested but only {n_available} samples are available")
    if draws < 1:
        raise RequestError("draws must be >= 1")
    return np.linspace(0, n_available - 1, draws).round().astype(int)


def posterior_predict(chain, model, events, t_star, draws=100, seed=None, start=1,
                      infperiod=None, threads=None, level=0.95):
    """Predictive bands for the newinfect curve, conditioning on history up to ``t_star``.

    For each of ``draws`` evenly thinned posterior samples, the epidemic is
    re-simulated from ``t_star`` to ``events.tmax`` with every infection
    observed up to ``t_star`` held fixed.
    """
    if not events.tmin <= t_star <= events.tmax:
        raise RequestError(f"t_star={t_star} is outside the observed horizon {events.tmin}..{events.tmax}")
    samples, _ = chain.segment(start)
    idx = thin_evenly(samples.shape[0], draws)
    history = np.where(events.inftime <= t_star, events.inftime, 0)
    if model.framework == SIR and infperiod is None:
        raise DataError("SIR prediction needs an infectious period per individual")
    streams = spawn(seed, draws)

    def one(k):
        m = model.with_theta(samples[idx[k]])
        sim = simulate_from(m, history, t_star, events.tmax, infperiod, streams[k])
        sim = type(sim)(sim.framework, sim.inftime, sim.remtime, events.tmin, events.tmax)
        return epidemic_curves(sim, "newinfect")["newinfect"]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        curves = np.array(list(pool.map(one, range(draws))))
    tail = (1.0 - level) / 2.0
    observed = epidemic_curves(events, "newinfect")
    return PredictiveBands(
        observed.t,
        np.median(curves, axis=0),
        np.quantile(curves, tail, axis=0),
        np.quantile(curves, 1.0 - tail, axis=0),
        observed["newinfect"],
        curves,
        int(t_star),
    )


def curves_sum_to_population(table, n):
    """True when the S/I(/R) columns of a complete table add up to ``n`` at every time."""
    total = sum(np.asarray(table[c]) for c in table.names)
    return bool(np.all(total == n))

