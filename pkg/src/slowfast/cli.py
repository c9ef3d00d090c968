"""Command-line front end: ``slowfast {analyze,simulate,converge,verify}``.

Exit codes: 0 success, 2 invalid input or configuration, 3 a structural
assumption fails for the model, 4 the acceptance suite fails.
"""

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import acceptance, harness
from .config import RunConfig, load_config, parse_config
from .errors import (AssumptionViolation, NotIrreducible, SingularSystem, SlowFastError,
                     ValidationError)
from .markov import absorption_probabilities, certify_assumptions, class_laws, decompose
from .models import build_model
from .reports import atomic_write, csv_text, summary_text
from .simulate import coupled_batch, simulate_averaged, simulate_coupled

log = logging.getLogger("slowfast")

EXIT_OK, EXIT_INVALID, EXIT_ASSUMPTION, EXIT_ACCEPTANCE = 0, 2, 3, 4


def _model(cfg: RunConfig, lam=None):
    params = {k: v for k, v in cfg.model.items() if k != "name"}
    try:
        return build_model(cfg.model["name"], lam=cfg.simulation["lam"] if lam is None else lam, **params)
    except ValidationError as exc:
        raise cfg.error(f"model {cfg.model['name']!r}: {exc}", "model") from None


def _start(cfg, model):
    s = cfg.simulation
    x0 = np.zeros(model.dim) if s["x0"] is None else np.asarray(s["x0"], dtype=float)
    if x0.shape != (model.dim,):
        raise cfg.error(f"simulation.x0 must have {model.dim} entries", "simulation", "x0")
    v0 = s["v0"]
    if v0 is None:
        v0 = 1 if model.state_space.size > 1 else 0
    try:
        v0 = model.state_space.index(v0)
    except (KeyError, ValueError, IndexError, TypeError):
        raise cfg.error(f"simulation.v0 {s['v0']!r} is not a state of model {model.name}",
                        "simulation", "v0") from None
    return x0, v0


def _out(cfg, sub):
    out = Path(cfg.output["directory"]) / sub
    atomic_write(out / "config.yaml", cfg.echo())
    return out


# ---------------------------------------------------------------------------
# commands

def cmd_analyze(cfg: RunConfig):
    model = _model(cfg)
    x0, _ = _start(cfg, model)
    tol = cfg.tolerances
    grid = cfg.analysis["grid"] or [x0.tolist()]
    for i, p in enumerate(grid):
        if len(p) != model.dim:
            raise cfg.error(f"grid point {i} must have {model.dim} entries", "analysis", "grid", i)
    out = _out(cfg, "analyze")
    space = model.state_space
    cert = certify_assumptions(model.family, grid, cfg.analysis["max_steps"], tol)
    P = model.family.evaluate(x0)
    d = decompose(P)
    prof = absorption_probabilities(P, d, x0, tol)
    laws = class_laws(P, d, x0)
    names = [space.format(i) for i in range(space.size)]

    atomic_write(out / "decomposition.txt", summary_text({
        "model": model.name, "anchor_x": x0, "class_count": d.class_count,
        **{f"class_{i + 1}": [names[s] for s in c] for i, c in enumerate(d.ergodic_classes)},
        "transient": [names[s] for s in d.transient_set],
    }))
    atomic_write(out / "absorption.csv", csv_text(
        ["state"] + [f"q_class_{i + 1}" for i in range(d.class_count)],
        ([names[v]] + list(prof.probabilities[v]) for v in range(space.size))))
    atomic_write(out / "stationary.csv", csv_text(
        ["class", "state", "weight"],
        ((law.class_index + 1, names[s], w) for law in laws for s, w in zip(law.states, law.weights))))
    atomic_write(out / "certificate.txt", summary_text({
        "n_tilde": cert.n_tilde, "z0": cert.z0, "classes_stable": cert.classes_stable,
        "classes_primitive": cert.classes_primitive,
        "lipschitz_estimate": cert.lipschitz_estimate, "lipschitz_declared": cert.lipschitz_declared,
        "lipschitz_consistent": cert.lipschitz_consistent, "ball_radius": cert.ball_radius,
        "sample_grid": [list(p) for p in cert.sample_grid],
    }))
    log.info("analysis written to %s (L=%d, n_tilde=%d, z0=%g)", out, d.class_count, cert.n_tilde, cert.z0)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig):
    s = cfg.simulation
    model = _model(cfg)
    x0, v0 = _start(cfg, model)
    out = _out(cfg, "simulate")
    jumps = []
    for r in range(s["paths"]):
        traj = simulate_coupled(model, x0, v0, s["t_end"], s["seed"], s["h"], s["report_dt"], replica=r)
        atomic_write(out / f"path_{r}.csv", traj.to_csv())
        jumps.append(int(traj.jumped.sum()))
    avg = simulate_averaged(model, x0, v0, s["t_end"], s["seed"], s["h"], s["report_dt"],
                            s["frozen_measure_mode"])
    atomic_write(out / "averaged.csv", csv_text(
        ["t"] + [f"x_{i + 1}" for i in range(model.dim)], ([t, *x] for t, x in zip(avg.times, avg.path))))

    M = s["M"]
    batch = coupled_batch(model, x0, v0, s["t_end"], s["seed"], np.arange(M, dtype=np.uint64), s["h"],
                          skip_absorbed=False)
    mean_jumps = model.rate * s["t_end"]
    f = harness.make_observable(**cfg.experiment["observable"])
    fx = f(batch.x)
    atomic_write(out / "summary.txt", summary_text({
        "model": model.name, "model_hash": model.fingerprint(), "seed": s["seed"],
        "x0": x0, "v0": model.state_space.format(v0), "t_end": s["t_end"], "rate": model.rate,
        "path_jumps": jumps, "zeta": avg.zeta + 1, "zeta_law": avg.probabilities,
        "replicas": M, "jumps_mean": float(batch.jumps.mean()),
        "jumps_expected": mean_jumps,
        "jumps_mean_ci95": 1.96 * np.sqrt(mean_jumps / M),
        "observable": f.name, "observable_mean": float(fx.mean()),
        "observable_var": float(fx.var(ddof=1)) if M > 1 else 0.0,
        "fast_state_histogram": np.bincount(batch.v, minlength=model.state_space.size) / M,
    }))
    log.info("simulation written to %s", out)
    return EXIT_OK


def cmd_converge(cfg: RunConfig):
    s, e = cfg.simulation, cfg.experiment
    model = _model(cfg)
    x0, v0 = _start(cfg, model)
    out = _out(cfg, "converge")
    f = harness.make_observable(**e["observable"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        weak = harness.weak_error_experiment(model, x0, v0, e["t"], f, e["lambda_grid"], e["M"],
                                             s["seed"], s["h"], s["frozen_measure_mode"])
    for w in caught:
        log.warning("%s", w.message)
    atomic_write(out / "weak_error.csv", weak.to_csv())
    atomic_write(out / "weak_error.txt", weak.summary())
    decay = harness.fast_decay_experiment(model, x0, v0, e["decay_grid"] or None)
    atomic_write(out / "decay.csv", decay.to_csv())
    atomic_write(out / "decay.txt", decay.summary())
    if e["delta_grid"] and not model.family.constant_in_x:
        gap = harness.sequence_gap_experiment(model, x0, v0, e["delta_grid"], e["gap_t"], s["lam"],
                                              marginal_lambdas=e["marginal_lambdas"],
                                              M=e["marginal_M"], seed=s["seed"])
        atomic_write(out / "sequence_gap.csv", gap.to_csv())
        atomic_write(out / "coupled_marginal.csv", gap.marginal_csv())
        atomic_write(out / "sequence_gap.txt", gap.summary())
    log.info("convergence reports written to %s (slope %.3f)", out, weak.fitted_slope)
    return EXIT_OK


def cmd_verify(cfg: RunConfig):
    v = cfg.verify
    out = _out(cfg, "verify")
    th = acceptance.Thresholds(**v["thresholds"])
    results = acceptance.run_suite(out, v["seed"], v["profile"], th, log=log.info)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print(f"overall: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "converge": cmd_converge, "verify": cmd_verify}


def build_parser():
    p = argparse.ArgumentParser(prog="slowfast", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="YAML run configuration (default: built-in toy model)")
    p.add_argument("--seed", type=int, help="override simulation and verification seed (u64)")
    p.add_argument("--out", help="override output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


DEFAULT_CONFIG = "model:\n  name: toy\n  n: 2\nsimulation:\n  x0: [0.5, 0.0]\n  v0: [1, -1]\n"


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else parse_config(DEFAULT_CONFIG, "<default>")
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ValidationError("--seed must be an unsigned 64-bit integer")
            cfg.simulation["seed"] = cfg.verify["seed"] = args.seed
        if args.out is not None:
            cfg.output["directory"] = args.out
        return COMMANDS[args.command](cfg)
    except (AssumptionViolation, SingularSystem, NotIrreducible) as exc:
        print(f"slowfast: assumption violated: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (SlowFastError, ValueError, TypeError) as exc:
        print(f"slowfast: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
