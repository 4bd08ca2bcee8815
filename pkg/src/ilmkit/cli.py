"""Command-line front end.

Exit status: 0 on success, 1 on a usage error, 2 when the inputs are
invalid (bad files, impossible models, unsatisfiable requests).
"""
import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, figures
from . import io as fio
from .errors import IlmError, RequestError
from .inference import MCMCControls, dic, make_prior, run_mcmc, summarize_chain
from .likelihood import log_likelihood
from .metrics import (
    CURVETYPES,
    basic_reproduction_number,
    epidemic_curves,
    posterior_predict,
    spatial_snapshots,
)
from .model import ContactNetworkSet, CovariateFormula, ModelSpec, validate_spec
from .rng import spawn
from .scenarios import BUILTIN, load_scenario
from .simulator import SimulationControls, simulate_epidemic


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _floats(text):
    text = text.strip()
    return tuple(float(v) for v in text.split(",")) if text else ()


def _assignments(items, convert=float):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"expected LABEL=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = convert(v.strip())
    return out


def _prior(text):
    dist, *params = text.split(":")
    return make_prior(dist, *params)


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="worker threads for replicate/draw pools (default: all cores)")
    p.add_argument("--out-dir", default=".", help="directory for output files (default .)")


def _model_args(p, events=True):
    g = p.add_argument_group("model and data")
    g.add_argument("--scenario", help=f"bundled scenario ({', '.join(BUILTIN)}) or a scenario file")
    g.add_argument("--population", help="population CSV: id[,x,y][,covariates...]")
    g.add_argument("--network", action="append", help="contact network file (repeatable)")
    g.add_argument("--network-mode", choices=("edgelist", "dense"), default="edgelist")
    g.add_argument("--undirected", action="store_true", help="networks must be symmetric")
    if events:
        g.add_argument("--events", help="events CSV: id,inftime[,remtime]")
    g.add_argument("--framework", choices=("SI", "SIR"), type=str.upper)
    g.add_argument("--kernel", choices=("spatial", "network"), type=str.lower)
    g.add_argument("--sus", help="susceptibility formula, e.g. '1 + A'")
    g.add_argument("--trans", help="transmissibility formula, e.g. 'X1 + X2'")
    g.add_argument("--alpha", type=_floats, help="comma-separated susceptibility parameters")
    g.add_argument("--phi", type=_floats, help="comma-separated transmissibility parameters")
    g.add_argument("--beta", type=_floats, help="spatial power or per-network weights")
    g.add_argument("--spark", type=float)
    g.add_argument("--infperiod", type=int, help="infectious period (SIR), same for everyone")
    g.add_argument("--tmin", type=int)
    g.add_argument("--tmax", type=int)


def build_parser():
    parser = _Parser(prog="ilmkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ilmkit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="simulate an epidemic and write events.csv")
    _common(p)
    _model_args(p, events=False)
    p.add_argument("--initial", help="events CSV whose infection times are fixed history")

    p = sub.add_parser("loglik", help="print the log-likelihood of observed events")
    _common(p)
    _model_args(p)

    p = sub.add_parser("fit", help="run Metropolis-Hastings MCMC and write chain.csv")
    _common(p)
    _model_args(p)
    p.add_argument("--niter", type=int)
    p.add_argument("--burnin", type=int, help="iterations dropped from the printed summary")
    p.add_argument("--init", action="append", metavar="LABEL=VALUE")
    p.add_argument("--var", action="append", metavar="LABEL=VALUE", help="proposal variance; 0 fixes it")
    p.add_argument("--prior", action="append", metavar="LABEL=DIST:A[:B]",
                   help="gamma:shape:rate, halfnormal:scale or uniform:low:high")
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--target-acc", type=float)

    p = sub.add_parser("summary", help="summarise a chain CSV")
    _common(p)
    p.add_argument("--chain", required=True)
    p.add_argument("--start", type=int, default=1)
    p.add_argument("--thin", type=int, default=1)

    p = sub.add_parser("dic", help="deviance information criterion of a fitted chain")
    _common(p)
    _model_args(p)
    p.add_argument("--chain", required=True)
    p.add_argument("--start", type=int, default=1)

    p = sub.add_parser("r0", help="Monte Carlo basic reproduction number (SIR)")
    _common(p)
    _model_args(p, events=False)
    p.add_argument("--replicates", type=int, default=1000)

    p = sub.add_parser("curves", help="epidemic curves (CSV on stdout, CSV/SVG/PNG in --out-dir)")
    _common(p)
    p.add_argument("--events", required=True)
    p.add_argument("--framework", choices=("SI", "SIR"), type=str.upper)
    p.add_argument("--curvetype", choices=CURVETYPES, default="complete")
    p.add_argument("--population", help="population with coordinates, for --snapshots")
    p.add_argument("--snapshots", action="store_true", help="also draw spatial snapshots")
    p.add_argument("--tmin", type=int)
    p.add_argument("--tmax", type=int)

    p = sub.add_parser("predict", help="posterior predictive bands of new infections")
    _common(p)
    _model_args(p)
    p.add_argument("--chain", required=True)
    p.add_argument("--start", type=int, default=1)
    p.add_argument("--t-star", type=int, required=True, help="condition on data up to this time")
    p.add_argument("--draws", type=int, default=100)

    p = sub.add_parser("scenario", help="bundled scenarios")
    ssub = p.add_subparsers(dest="action", metavar="ACTION", parser_class=_Parser)
    ssub.required = True
    q = ssub.add_parser("list", help="list bundled scenarios")
    _common(q)
    q = ssub.add_parser("run", help="simulate, fit, summarise and plot a scenario")
    _common(q)
    q.add_argument("name")
    q.add_argument("--events", help="observed events to fit instead of simulated ones")
    q.add_argument("--niter", type=int, help="override the scenario's MCMC length")
    q.add_argument("--draws", type=int, default=100, help="posterior predictive draws")
    return parser


class Run:
    """Bookkeeping for one invocation: output directory, written files, manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.inputs = {}
        self.outputs = []
        os.makedirs(args.out_dir, exist_ok=True)

    def read(self, path):
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        self.inputs[path] = hashlib.sha256(text.encode()).hexdigest()
        return text

    def write(self, name, text):
        path = os.path.join(self.args.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.outputs.append(path)
        return path

    def figure(self, fn, name, obj, **kw):
        path = os.path.join(self.args.out_dir, name)
        fn(obj, path, **kw)
        self.outputs.append(path)
        return path

    def manifest(self):
        a = vars(self.args)
        name = self.args.command if self.args.command != "scenario" else f"scenario-{self.args.action}"
        doc = {
            "tool": "ilmkit",
            "version": __version__,
            "command": name,
            "argv": self.argv,
            "seed": a.get("seed"),
            "options": {k: v for k, v in sorted(a.items()) if k not in ("threads",)},
            "inputs": self.inputs,
            "outputs": self.outputs,
        }
        path = os.path.join(self.args.out_dir, f"manifest-{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _spec_from_args(args, scenario):
    base = scenario.spec if scenario else None
    framework = args.framework or (base.framework if base else None)
    kernel = args.kernel or (base.kernel if base else None)
    if framework is None or kernel is None:
        raise UsageError("give --scenario or both --framework and --kernel")
    sus = CovariateFormula.parse(args.sus, True) if args.sus is not None else (
        base.sus_formula if base else CovariateFormula(True, ()))
    trans = CovariateFormula.parse(args.trans, False) if args.trans is not None else (
        base.trans_formula if base else CovariateFormula(False, ()))
    return ModelSpec(
        framework, kernel, sus, trans,
        alpha=args.alpha if args.alpha is not None else (base.alpha if base else ()),
        phi=args.phi if args.phi is not None else (base.phi if base else ()),
        beta=args.beta if args.beta is not None else (base.beta if base else ()),
        spark=args.spark if args.spark is not None else (base.spark if base else 0.0),
    )


def _inputs(run, args):
    """(scenario, checked model, events or None, infperiod or None) from flags and files."""
    scenario = load_scenario(args.scenario) if args.scenario else None
    if args.scenario:
        if os.path.exists(args.scenario):
            run.read(args.scenario)
    spec = _spec_from_args(args, scenario)
    g_pop, _, _ = spawn(args.seed, 3)
    if args.population:
        pop = fio.parse_population_csv(run.read(args.population))
    elif scenario:
        pop = scenario.generate_population(g_pop)
    else:
        raise UsageError("give --population or --scenario")
    nets = None
    if spec.kernel == "network":
        if args.network:
            mats = [fio.parse_network_file(run.read(f), args.network_mode, not args.undirected, pop.size)
                    for f in args.network]
            nets = ContactNetworkSet(tuple(mats), (not args.undirected,) * len(mats))
        elif scenario and scenario.network:
            nets = scenario.generate_networks(g_pop)
        else:
            raise UsageError("a network kernel needs --network files or a --scenario")
    model = validate_spec(spec, pop, nets)
    events = None
    if getattr(args, "events", None):
        # --tmax may extend the horizon past the last recorded event
        events = fio.parse_events_csv(run.read(args.events), spec.framework,
                                      tmin=args.tmin or 1, tmax=args.tmax)
    infperiod = args.infperiod
    if infperiod is None and scenario is not None:
        infperiod = scenario.simulation.get("infperiod")
    return scenario, model, events, infperiod


def _need_events(events):
    if events is None:
        raise UsageError("--events is required")
    return events


def _window(args, scenario, events):
    if scenario is not None and scenario.fit:
        tmin, tmax = scenario.fit_window(events)
    else:
        tmin, tmax = events.tmin, events.tmax
    if args.tmin is not None:
        tmin = args.tmin
    if args.tmax is not None:
        tmax = args.tmax
    return tmin, min(tmax, events.tmax)


def cmd_simulate(run, args):
    scenario, model, _, infperiod = _inputs(run, args)
    _, g_sim, _ = spawn(args.seed, 3)
    sim = scenario.simulation if scenario else {}
    tmin = args.tmin if args.tmin is not None else int(sim.get("tmin", 1))
    tmax = args.tmax if args.tmax is not None else sim.get("tmax")
    if tmax is None:
        raise UsageError("--tmax is required without a scenario")
    initial = None
    if args.initial:
        initial = tuple(fio.parse_events_csv(run.read(args.initial)).inftime)
    if model.framework == "SIR" and infperiod is None:
        raise UsageError("--infperiod is required for SIR")
    controls = SimulationControls(
        int(tmax), tmin, initial,
        tuple(np.broadcast_to(infperiod, (model.size,)).tolist()) if model.framework == "SIR" else None,
        args.seed,
    )
    events = simulate_epidemic(model, controls, g_sim)
    _write_data(run, model, events)
    print(f"simulated {int((events.inftime > 0).sum())} infections among {model.size} "
          f"individuals; wrote {run.outputs[0]}")


def _write_data(run, model, events):
    run.write("events.csv", fio.write_events_csv(events))
    run.write("population.csv", fio.write_population_csv(model.population))
    if model.networks is not None:
        for k, m in enumerate(model.networks.matrices, 1):
            run.write(f"network-{k}.csv", fio.write_network_file(m))


def cmd_loglik(run, args):
    scenario, model, events, _ = _inputs(run, args)
    events = _need_events(events)
    tmin, tmax = _window(args, scenario, events)
    print(f"{log_likelihood(model, events, tmin, tmax):.16f}")


def _mcmc_setup(args, scenario, model):
    """Sampler settings: the scenario's [mcmc] section, if any, overridden by flags."""
    labels = model.spec.labels
    if scenario is not None and scenario.mcmc:
        base = scenario.mcmc_controls(args.seed)
        init = dict(zip(labels, base.init))
        var = dict(zip(labels, base.proposal_var))
        niter, adaptive, target = base.niter, base.adaptive, base.target_acc_rate
        priors = scenario.prior_objects()
    else:
        init = dict(zip(labels, model.spec.theta))
        var = dict.fromkeys(labels, 0.0)
        niter, adaptive, target = None, False, None
        priors = {}
    new_init, new_var = _assignments(args.init), _assignments(args.var)
    unknown = (set(new_init) | set(new_var)) - set(labels)
    if unknown:
        raise UsageError(f"unknown parameters {sorted(unknown)}; this model has {', '.join(labels)}")
    init.update(new_init)
    var.update(new_var)
    priors.update(_assignments(args.prior, _prior))
    niter = args.niter if args.niter is not None else niter
    if niter is None:
        raise UsageError("--niter is required without a scenario")
    controls = MCMCControls(
        niter,
        tuple(init[k] for k in labels),
        tuple(var[k] for k in labels),
        args.adaptive or adaptive,
        args.target_acc if args.target_acc is not None else target,
        args.seed,
    )
    burnin = args.burnin if args.burnin is not None else (scenario.burnin if scenario else 0)
    return controls, priors, burnin


def cmd_fit(run, args):
    scenario, model, events, _ = _inputs(run, args)
    events = _need_events(events)
    tmin, tmax = _window(args, scenario, events)
    controls, priors, burnin = _mcmc_setup(args, scenario, model)
    _fit(run, model, events, priors, controls, burnin, tmin, tmax)


def _fit(run, model, events, priors, controls, burnin, tmin, tmax):
    chain = run_mcmc(model, events, priors, controls, tmin, tmax)
    run.write("chain.csv", fio.write_chain_csv(chain))
    start = min(burnin + 1, chain.niter)
    text = summarize_chain(chain, start).to_text()
    run.write("summary.txt", text)
    run.figure(figures.plot_trace, "trace.png", chain, start=start)
    sys.stdout.write(text)
    return chain, start


def cmd_summary(run, args):
    chain = fio.parse_chain_csv(run.read(args.chain))
    sys.stdout.write(summarize_chain(chain, args.start, args.thin).to_text())


def cmd_dic(run, args):
    scenario, model, events, _ = _inputs(run, args)
    events = _need_events(events)
    tmin, tmax = _window(args, scenario, events)
    chain = fio.parse_chain_csv(run.read(args.chain))
    _check_labels(chain, model)
    r = dic(chain, model, events, args.start, tmin, tmax)
    print(f"DIC = {r.dic:.6f}\nmean deviance = {r.mean_deviance:.6f}\n"
          f"p_D = {r.p_d:.6f}\ndeviance at posterior mean = {r.deviance_at_mean:.6f}")


def _check_labels(chain, model):
    if list(chain.labels) != model.spec.labels:
        raise RequestError(
            f"chain parameters {chain.labels} do not match the model's {model.spec.labels}"
        )


def cmd_r0(run, args):
    _, model, _, infperiod = _inputs(run, args)
    if infperiod is None:
        raise UsageError("--infperiod is required")
    r = basic_reproduction_number(model, infperiod, args.replicates, args.seed)
    print(f"R0 = {r.mean:.6f} (MC standard error {r.se:.6f}, {args.replicates} replicates)")


def cmd_curves(run, args):
    events = fio.parse_events_csv(run.read(args.events), args.framework,
                                  tmin=args.tmin or 1, tmax=args.tmax)
    table = epidemic_curves(events, args.curvetype)
    text = fio.write_curves_csv(table)
    run.write(f"curves-{args.curvetype}.csv", text)
    run.write(f"curves-{args.curvetype}.svg", fio.render_svg(table, title=args.curvetype))
    run.figure(figures.plot_curves, f"curves-{args.curvetype}.png", table, title=args.curvetype)
    sys.stdout.write(text)
    if args.snapshots:
        if not args.population:
            raise UsageError("--snapshots needs --population")
        pop = fio.parse_population_csv(run.read(args.population))
        snaps = spatial_snapshots(events, pop, args.tmin)
        for s in snaps:
            run.write(f"snapshot-t{s.t}.svg", fio.render_svg(s))
        run.figure(figures.plot_snapshots, "snapshots.png", snaps)


def cmd_predict(run, args):
    _, model, events, infperiod = _inputs(run, args)
    events = _need_events(events)
    chain = fio.parse_chain_csv(run.read(args.chain))
    _check_labels(chain, model)
    bands = posterior_predict(chain, model, events, args.t_star, args.draws, args.seed,
                              args.start, infperiod, args.threads)
    _write_bands(run, bands)


def _write_bands(run, bands):
    text = fio.write_curves_csv(bands.table())
    run.write("prediction.csv", text)
    run.write("prediction.svg", fio.render_svg(bands))
    run.figure(figures.plot_prediction, "prediction.png", bands)
    sys.stdout.write(text)


def cmd_scenario(run, args):
    if args.action == "list":
        for name in BUILTIN:
            print(f"{name:<22}{load_scenario(name).description}")
        return
    scenario = load_scenario(args.name)
    g_pop, g_sim, _ = spawn(args.seed, 3)
    pop = scenario.generate_population(g_pop)
    nets = scenario.generate_networks(g_pop)
    model = validate_spec(scenario.spec, pop, nets)
    events_path = args.events or scenario.data.get("events") or None
    if events_path:
        events = fio.parse_events_csv(run.read(events_path), model.framework)
        print(f"using observed events from {events_path}")
    else:
        events = simulate_epidemic(model, scenario.simulation_controls(args.seed), g_sim)
        print(f"simulated {int((events.inftime > 0).sum())} infections among {model.size} individuals")
    _write_data(run, model, events)
    table = epidemic_curves(events, "complete")
    run.write("curves-complete.csv", fio.write_curves_csv(table))
    run.write("curves-complete.svg", fio.render_svg(table, title=scenario.name))
    run.figure(figures.plot_curves, "curves-complete.png", table, title=scenario.name)
    if pop.has_coords:
        run.figure(figures.plot_snapshots, "snapshots.png", spatial_snapshots(events, pop))
    infperiod = scenario.infperiod()
    if model.framework == "SIR":
        r = basic_reproduction_number(model, infperiod, 1000, args.seed)
        print(f"R0 = {r.mean:.4f} (MC standard error {r.se:.4f})")
    if not scenario.mcmc:
        return
    tmin, tmax = scenario.fit_window(events)
    controls = scenario.mcmc_controls(args.seed, args.niter)
    # a shorter --niter keeps the scenario's burn-in fraction
    burnin = scenario.burnin * controls.niter // int(scenario.mcmc["niter"])
    chain, start = _fit(run, model, events, scenario.prior_objects(), controls, burnin, tmin, tmax)
    r = dic(chain, model, events, start, tmin, tmax)
    print(f"DIC = {r.dic:.4f} (p_D = {r.p_d:.4f})")
    t_star = max(events.tmin, (events.tmin + tmax) // 2)
    draws = min(args.draws, chain.niter - start + 1)
    bands = posterior_predict(chain, model, events, t_star, draws, args.seed, start,
                              infperiod, args.threads)
    run.write("prediction.csv", fio.write_curves_csv(bands.table()))
    run.write("prediction.svg", fio.render_svg(bands))
    run.figure(figures.plot_prediction, "prediction.png", bands)


COMMANDS = {
    "simulate": cmd_simulate, "loglik": cmd_loglik, "fit": cmd_fit, "summary": cmd_summary,
    "dic": cmd_dic, "r0": cmd_r0, "curves": cmd_curves, "predict": cmd_predict,
    "scenario": cmd_scenario,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        run = Run(args, argv)
        COMMANDS[args.command](run, args)
        run.manifest()
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except (IlmError, FileNotFoundError, IsADirectoryError) as exc:
        sys.stderr.write(f"ilmkit: error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
