"""Builders and independent oracles shared by the test modules."""
import math

import numpy as np

from ilmkit.model import (
    ContactNetworkSet,
    CovariateFormula,
    EpidemicEvents,
    ModelSpec,
    Population,
    validate_spec,
)


def two_node_network(weight=1.0):
    m = np.array([[0.0, weight], [weight, 0.0]])
    return ContactNetworkSet((m,), (False,))


def hand_model(alpha=1.0, spark=0.0, weight=1.0):
    """Two individuals joined by one unit contact, Omega_S = alpha, Omega_T = 1."""
    spec = ModelSpec("SI", "network", alpha=(alpha,), beta=(), spark=spark)
    return validate_spec(spec, Population(2), two_node_network(weight))


def random_instance(rng, max_n=12, max_horizon=6):
    """A random small (model, events) pair for oracle comparisons.

    Spatial instances sit on a jittered grid so every pair is at least one
    unit apart; parameters are bounded so probabilities are neither 0 nor 1.
    """
    n = int(rng.integers(1, max_n + 1))
    horizon = int(rng.integers(1, max_horizon + 1))
    tmin = int(rng.integers(1, 4))
    tmax = tmin + horizon
    framework = "SIR" if rng.random() < 0.5 else "SI"
    kernel = "spatial" if rng.random() < 0.5 else "network"

    covs = {"A": rng.uniform(0.0, 3.0, n), "B": rng.uniform(0.0, 3.0, n)}
    coords = None
    nets = None
    if kernel == "spatial":
        cells = rng.permutation(16)[:n]
        coords = np.column_stack([cells % 4, cells // 4]) * 2.0 + rng.uniform(-0.5, 0.5, (n, 2))
        beta = (float(rng.uniform(0.2, 3.0)),)
    else:
        k = int(rng.integers(1, 3))
        mats = []
        for _ in range(k):
            m = rng.uniform(0.0, 2.0, (n, n)) * (rng.random((n, n)) < 0.6)
            np.fill_diagonal(m, 0.0)
            mats.append(m)
        nets = ContactNetworkSet(tuple(mats), (True,) * k)
        beta = tuple(rng.uniform(0.1, 2.0, k)) if (k > 1 or rng.random() < 0.5) else ()
    pop = Population(n, coords, covs)

    sus_terms = tuple(t for t in ("A", "B") if rng.random() < 0.5)
    trans_terms = tuple(t for t in ("A", "B") if rng.random() < 0.5)
    sus = CovariateFormula(True, sus_terms)
    trans = CovariateFormula(False, trans_terms)
    spec = ModelSpec(
        framework, kernel, sus, trans,
        alpha=tuple(rng.uniform(0.05, 1.5, sus.n_params)),
        phi=tuple(rng.uniform(0.05, 1.5, trans.n_params)),
        beta=beta,
        spark=float(rng.uniform(0.0, 0.2)) if rng.random() < 0.5 else 0.0,
    )
    model = validate_spec(spec, pop, nets)

    inftime = np.where(rng.random(n) < 0.7, rng.integers(tmin, tmax + 1, n), 0)
    if not inftime.any():
        inftime[0] = tmin
    remtime = None
    if framework == "SIR":
        period = rng.integers(1, 4, n)
        remtime = np.where(inftime > 0, inftime + period, 0)
        # some removals fall beyond the horizon and go unobserved
        remtime = np.where(remtime > tmax, np.where(rng.random(n) < 0.5, 0, remtime), remtime)
    events = EpidemicEvents(framework, inftime, remtime, tmin, max(tmax, int(inftime.max())))
    return model, events


def naive_spatial_si(coords, alpha, beta, tmax, rng):
    """Straightforward SI simulation used as an oracle.

    Omega_S = alpha and Omega_T = 1; one Bernoulli draw per susceptible per
    step, with the pressure summed pair by pair in plain Python.
    """
    n = len(coords)
    k = [[math.dist(coords[i], coords[j]) ** -beta if i != j else 0.0 for j in range(n)]
         for i in range(n)]
    inftime = [0] * n
    inftime[int(rng.integers(n))] = 1
    for t in range(1, tmax):
        infectious = [j for j in range(n) if 0 < inftime[j] <= t]
        for i in range(n):
            if inftime[i] == 0:
                p = 1.0 - math.exp(-alpha * sum(k[i][j] for j in infectious))
                if rng.random() < p:
                    inftime[i] = t + 1
    return inftime


# one line per acceptance criterion, printed at the end of the pytest session
ACCEPTANCE = []


def report(number, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {name}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok
