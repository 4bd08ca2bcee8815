"""Bundled run configurations (TOML) for the worked examples.

A scenario file has the sections ``population``, ``network`` (network
kernels only), ``model``, ``simulation`` and optionally ``fit``, ``priors``,
``mcmc`` and ``data``; see the README for the full schema.
"""
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import DataError, ModelError, RequestError
from .inference import MCMCControls, make_prior
from .model import ContactNetworkSet, CovariateFormula, ModelSpec, Population
from .simulator import SimulationControls

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

BUILTIN = ("spatial-si", "network-si", "spatial-si-covariate", "network-sir", "tswv-template")


@dataclass
class Scenario:
    name: str
    description: str
    population: dict
    spec: ModelSpec
    simulation: dict
    network: dict = None
    fit: dict = field(default_factory=dict)
    priors: dict = field(default_factory=dict)
    mcmc: dict = None
    data: dict = field(default_factory=dict)
    source: str = None

    @property
    def size(self):
        return int(self.population["size"])

    def generate_population(self, rng):
        return generate_population(self.population, rng)

    def generate_networks(self, rng):
        if self.network is None:
            return None
        return generate_network(self.network, self.size, rng)

    def infperiod(self):
        d = self.simulation.get("infperiod")
        if d is None:
            return None
        return tuple(np.broadcast_to(np.asarray(d, dtype=int), (self.size,)).tolist())

    def simulation_controls(self, seed=0):
        return SimulationControls(
            tmax=int(self.simulation["tmax"]),
            tmin=int(self.simulation.get("tmin", 1)),
            infperiod=self.infperiod() if self.spec.framework == "SIR" else None,
            seed=seed,
        )

    def fit_window(self, events):
        """(tmin, tmax) for fitting; ``"last_infection"`` means the largest infection time."""
        tmin = self.fit.get("tmin", events.tmin)
        tmax = self.fit.get("tmax", events.tmax)
        if tmax == "last_infection":
            tmax = int(events.inftime.max())
        return int(tmin), int(tmax)

    @property
    def burnin(self):
        return int(self.mcmc.get("burnin", 0)) if self.mcmc else 0

    def mcmc_controls(self, seed=0, niter=None):
        """MCMC settings in parameter order; unlisted parameters are held at their model values."""
        if not self.mcmc:
            raise RequestError(f"scenario {self.name!r} has no [mcmc] section")
        labels = self.spec.labels
        init = dict(zip(labels, self.spec.theta))
        init.update(self.mcmc.get("init", {}))
        var = {label: 0.0 for label in labels}
        var.update(self.mcmc.get("proposal_var", {}))
        unknown = (set(init) | set(var)) - set(labels)
        if unknown:
            raise ModelError(f"mcmc settings for unknown parameters {sorted(unknown)}")
        return MCMCControls(
            niter=int(niter if niter is not None else self.mcmc["niter"]),
            init=tuple(float(init[k]) for k in labels),
            proposal_var=tuple(float(var[k]) for k in labels),
            adaptive=bool(self.mcmc.get("adaptive", False)),
            target_acc_rate=self.mcmc.get("target_acc_rate"),
            seed=seed,
        )

    def prior_objects(self):
        out = {}
        for label, cfg in self.priors.items():
            cfg = dict(cfg)
            dist = cfg.pop("dist")
            keys = {"gamma": ("shape", "rate"), "halfnormal": ("scale",),
                    "half-normal": ("scale",), "uniform": ("low", "high")}.get(dist.lower())
            if keys is None:
                raise ModelError(f"unknown prior {dist!r} for {label}")
            out[label] = make_prior(dist, *(cfg[k] for k in keys))
        return out


def _draw(cfg, n, rng):
    kind = cfg["kind"]
    if kind == "uniform":
        x = rng.uniform(cfg.get("low", 0.0), cfg.get("high", 1.0), n)
    elif kind == "exponential":
        x = rng.exponential(cfg["mean"], n)
    elif kind == "gamma":
        x = rng.gamma(cfg["shape"], 1.0 / cfg["rate"], n)
    elif kind == "bernoulli":
        x = (rng.random(n) < cfg["p"]).astype(float)
    elif kind == "constant":
        x = np.full(n, float(cfg["value"]))
    else:
        raise ModelError(f"unknown covariate generator {kind!r}")
    return np.round(x) if cfg.get("round", False) else x


def generate_population(cfg, rng):
    n = int(cfg["size"])
    coords = None
    c = cfg.get("coords")
    if c is not None:
        if c["kind"] == "uniform":
            x = rng.uniform(c.get("low", 0.0), c.get("high", 1.0), n)
            y = rng.uniform(c.get("low", 0.0), c.get("high", 1.0), n)
            coords = np.column_stack([x, y])
        elif c["kind"] == "grid":
            rows, cols = int(c["rows"]), int(c["cols"])
            if rows * cols != n:
                raise ModelError(f"grid of {rows} x {cols} does not hold {n} individuals")
            r, k = np.divmod(np.arange(n), cols)
            coords = np.column_stack([k * c.get("col_spacing", 1.0), r * c.get("row_spacing", 1.0)])
        else:
            raise ModelError(f"unknown coordinate generator {c['kind']!r}")
    covs = {name: _draw(spec, n, rng) for name, spec in cfg.get("covariates", {}).items()}
    return Population(n, coords, covs)


def generate_network(cfg, n, rng):
    if cfg.get("kind") != "bernoulli":
        raise ModelError(f"unknown network generator {cfg.get('kind')!r}")
    count = int(cfg.get("count", 1))
    directed = bool(cfg.get("directed", True))
    mats = []
    for _ in range(count):
        m = (rng.random((n, n)) < cfg["p"]).astype(float)
        if not directed:
            m = np.triu(m, 1)
            m = m + m.T
        np.fill_diagonal(m, 0.0)
        mats.append(m)
    return ContactNetworkSet(tuple(mats), (directed,) * count)


def _from_dict(doc, source=None):
    try:
        m = doc["model"]
        spec = ModelSpec(
            framework=m["framework"],
            kernel=m["kernel"],
            sus_formula=CovariateFormula.parse(m.get("sus", "1"), intercept=True),
            trans_formula=CovariateFormula.parse(m.get("trans", ""), intercept=False),
            alpha=tuple(m.get("alpha", ())),
            phi=tuple(m.get("phi", ())),
            beta=tuple(m.get("beta", ())),
            spark=m.get("spark", 0.0),
        )
        return Scenario(
            name=doc.get("name", source or "scenario"),
            description=doc.get("description", ""),
            population=doc["population"],
            spec=spec,
            simulation=doc.get("simulation", {"tmin": 1, "tmax": 1}),
            network=doc.get("network"),
            fit=doc.get("fit", {}),
            priors=doc.get("priors", {}),
            mcmc=doc.get("mcmc"),
            data=doc.get("data", {}),
            source=source,
        )
    except KeyError as exc:
        raise DataError(f"scenario {source or ''} is missing required key {exc}") from None


def load_scenario(name):
    """A bundled scenario by name, or any scenario file by path."""
    if os.path.sep in name or name.endswith(".toml") or os.path.exists(name):
        try:
            with open(name, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise RequestError(f"scenario file {name!r} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"{name}: {exc}") from None
        return _from_dict(doc, name)
    if name not in BUILTIN:
        raise RequestError(f"unknown scenario {name!r}; bundled: {', '.join(BUILTIN)}")
    text = resources.files("ilmkit").joinpath(f"scenario_files/{name}.toml").read_text()
    return _from_dict(tomllib.loads(text), name)
