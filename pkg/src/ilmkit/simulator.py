"""Forward simulation of SI/SIR individual-level epidemics in discrete time."""
from dataclasses import dataclass

import numpy as np

from . import kernel as _kernel
from .errors import DataError, PositivityError, SeedingError
from .model import SIR, EpidemicEvents
from .rng import make_rng


@dataclass(frozen=True)
class SimulationControls:
    """Horizon, seeding and infectious periods for one simulated epidemic.

    ``initial_inftime`` is treated as fixed history: every non-zero entry is
    an infection that happens at that time regardless of the model.
    """

    tmax: int
    tmin: int = 1
    initial_inftime: tuple = None
    infperiod: tuple = None
    seed: int = 0

    def __post_init__(self):
        if self.tmin < 1:
            raise DataError("tmin must be >= 1")
        if self.tmax < self.tmin:
            raise DataError(f"tmax ({self.tmax}) is before tmin ({self.tmin})")
        if self.initial_inftime is not None:
            object.__setattr__(self, "initial_inftime", tuple(int(t) for t in self.initial_inftime))
        if self.infperiod is not None:
            object.__setattr__(self, "infperiod", tuple(int(d) for d in self.infperiod))


def _pressure(model, infective, targets):
    """Omega_T-weighted kernel sums on ``targets`` from the ``infective`` mask."""
    cols = np.flatnonzero(infective)
    if cols.size == 0 or targets.size == 0:
        return np.zeros(targets.size)
    _kernel.check_finite_pairs(model.kernel, targets, cols)
    k = model.kernel[np.ix_(targets, cols)]
    return k @ model.trans_values[cols]


def infection_probabilities(model, events, t):
    """P(i, t) for every individual; 0 for those not susceptible at t."""
    sus = np.flatnonzero(events.susceptible(t))
    p = np.zeros(model.size)
    if sus.size == 0:
        return p
    model.check_susceptibility(sus)
    lam = model.sus_values[sus] * _pressure(model, events.infectious(t), sus) + model.spec.spark
    p[sus] = -np.expm1(-lam)
    return p


def infection_probability(model, events, t, i):
    """Probability that susceptible individual ``i`` (0-based) is infected at ``t``.

    The infection shows up as ``inftime = t + 1``.
    """
    if not events.susceptible(t)[i]:
        raise DataError(f"individual {i + 1} is not susceptible at t={t}")
    s = model.sus_values[i]
    if not s > 0:
        raise PositivityError(f"susceptibility of individual {i + 1} is {s:g}; it must be > 0")
    infectives = np.flatnonzero(events.infectious(t))
    pressure = _kernel.infectious_pressure(
        model.context, model.spec.beta, model.trans_values, i, infectives
    )
    return float(-np.expm1(-(s * pressure + model.spec.spark)))


def _initial_state(model, controls, rng):
    n = model.size
    if controls.initial_inftime is None:
        inftime = np.zeros(n, dtype=np.int64)
        inftime[rng.integers(n)] = controls.tmin
        return inftime
    inftime = np.asarray(controls.initial_inftime, dtype=np.int64)
    if inftime.shape != (n,):
        raise DataError(f"initial_inftime must have length {n}")
    if np.any(inftime < 0):
        raise DataError("initial_inftime must be >= 0")
    if not np.any(inftime > 0):
        raise SeedingError("initial_inftime was supplied but infects nobody")
    if np.any(inftime > controls.tmax):
        raise DataError("initial_inftime has entries after tmax")
    return inftime.copy()


def simulate_epidemic(model, controls, rng=None):
    """Simulate one epidemic from a validated model.

    At each ``t = tmin .. tmax-1`` every susceptible is infected independently
    with probability P(i, t) and becomes infectious at ``t + 1``. One uniform
    is drawn per individual per step in id order, whether or not the
    individual is at risk, so the draw sequence does not depend on the state.
    """
    if rng is None:
        rng = make_rng(controls.seed)
    infperiod = _infperiod(model, controls.infperiod)
    inftime = _initial_state(model, controls, rng)
    return simulate_from(model, inftime, controls.tmin, controls.tmax, infperiod, rng)


def _infperiod(model, infperiod):
    if model.framework != SIR:
        return None
    n = model.size
    if infperiod is None:
        raise DataError("SIR simulation needs an infectious period per individual")
    infperiod = np.broadcast_to(np.asarray(infperiod, dtype=np.int64), (n,))
    if np.any(infperiod < 1):
        raise DataError(f"infperiod must be {n} integers >= 1")
    return infperiod


def simulate_from(model, inftime, tmin, tmax, infperiod, rng):
    """Run the stochastic transitions ``tmin .. tmax-1`` from a fixed history.

    ``inftime`` may be all zeros here (nothing happens unless there are sparks).
    """
    n = model.size
    sir = model.framework == SIR
    inftime = np.array(inftime, dtype=np.int64)
    if sir:
        infperiod = _infperiod(model, infperiod)
        remtime = np.where(inftime > 0, inftime + infperiod, 0)
    else:
        remtime = None
    model.check_susceptibility(np.flatnonzero(inftime == 0))
    sus_values = model.sus_values
    spark = model.spec.spark

    for t in range(tmin, tmax):
        infected = (inftime > 0) & (inftime <= t)
        infective = infected & (remtime > t) if sir else infected
        at_risk = np.flatnonzero(inftime == 0)
        u = rng.random(n)
        if at_risk.size == 0:
            continue
        lam = sus_values[at_risk] * _pressure(model, infective, at_risk) + spark
        p = -np.expm1(-lam)
        new = at_risk[u[at_risk] < p]
        inftime[new] = t + 1
        if sir:
            remtime[new] = t + 1 + infperiod[new]

    seeded = inftime[inftime > 0]
    first = min(tmin, int(seeded.min())) if seeded.size else tmin
    return EpidemicEvents(model.framework, inftime, remtime, first, tmax)
