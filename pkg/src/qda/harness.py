"""Command-line experiments, instance generators and result records.

Every command runs ``trials`` seeded trials, writes one CSV row per trial and
a JSON summary whose rates carry 95% Clopper-Pearson intervals, and exits
with a code that says whether the checks passed.

Exit codes: 0 pass, 1 a check failed, 2 invalid input, 3 resource cap,
4 output path not writable.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.stats import binomtest

from . import classical_stats as cs
from . import quantum_core as qc
from .errors import InvalidInput, OverBudget, QDAError, ResourceCapExceeded
from .hypothesis_selection import (build_hypothesis_set, select_via_search, select_via_shadow,
                                   unique_decode)
from .noisy_threshold import build_threshold_event, certify_statistics_and_fidelity
from .shadow_tomography import ShadowConfig, shadow_tomography
from .threshold_decision import OrInstance, threshold_decision, verify_or_bounds
from .threshold_search import SearchConfig, ThresholdInstance, search_plan, threshold_search

__all__ = [
    "ExperimentSpec",
    "ResultRecord",
    "Instance",
    "generate_instance",
    "proportion_ci",
    "fit_log_squared",
    "run_experiment",
    "write_outputs",
    "main",
    "COMMANDS",
    "EXIT_PASS",
    "EXIT_FAIL",
    "EXIT_INVALID",
    "EXIT_CAP",
    "EXIT_UNWRITABLE",
]

EXIT_PASS, EXIT_FAIL, EXIT_INVALID, EXIT_CAP, EXIT_UNWRITABLE = 0, 1, 2, 3, 4

COMMANDS = ("verify-classical", "verify-quantum", "run-search", "run-decision", "run-shadow",
            "run-hypothesis", "sweep")


@dataclass
class ExperimentSpec:
    cmd: str
    d: int = 2
    m: int = 4
    eps: float = 0.25
    delta: float = 0.2
    trials: int = 20
    seed: int = 0
    mode: str = "sampled"
    out: Optional[str] = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cmd not in COMMANDS:
            raise InvalidInput(f"unknown command {self.cmd!r}; choose from {COMMANDS}")
        if self.trials < 1:
            raise InvalidInput("trials must be at least 1")
        if self.d < 2 or self.m < 1:
            raise InvalidInput("need d >= 2 and m >= 1")
        if self.mode not in ("sampled", "exact"):
            raise InvalidInput("mode must be 'sampled' or 'exact'")

    def knob(self, key, default):
        raw = self.overrides.get(key)
        if raw is None:
            return default
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes")
        return type(default)(raw) if default is not None else raw


@dataclass
class ResultRecord:
    experiment: str
    spec: dict
    rows: list
    rates: dict
    passed: bool
    copies_used: Optional[int] = None
    wall_time: float = 0.0
    notes: dict = field(default_factory=dict)

    def summary(self):
        out = asdict(self)
        out.pop("rows")
        out["trials"] = len(self.rows)
        return out


def proportion_ci(successes, trials, level=0.95):
    """Clopper-Pearson interval ``(rate, low, high)`` for a binomial proportion."""
    if trials == 0:
        return math.nan, 0.0, 1.0
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level,
                                                              method="exact")
    return successes / trials, float(ci.low), float(ci.high)


def _rate(flags):
    k, n = int(np.sum(flags)), len(flags)
    rate, lo, hi = proportion_ci(k, n)
    return {"successes": k, "trials": n, "rate": rate, "ci_low": lo, "ci_high": hi}


def fit_log_squared(ms, values, intercept=True):
    """Least-squares fit of ``values`` against ``log2(m)^2``.

    Returns ``(coefficients, max relative residual)``; coefficients are
    ``(a, c)`` for ``a + c log^2 m`` or ``(c,)`` without intercept.
    """
    x = np.log2(np.asarray(ms, float)) ** 2
    y = np.asarray(values, float)
    design = np.column_stack([np.ones_like(x), x]) if intercept else x[:, None]
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = np.abs(design @ coef - y) / np.abs(y)
    return tuple(float(c) for c in coef), float(resid.max())


# ---------------------------------------------------------------- instances

@dataclass
class Instance:
    kind: str
    rho: qc.QuantumState
    events: list = field(default_factory=list)
    thresholds: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    hypotheses: Optional[list] = None
    adversary: Optional[Callable] = None

    def expectations(self):
        return np.array([qc.expectation(self.rho, e) for e in self.events])


def _planted_projector(rho, rng, low=0.75):
    """Rank-one projector with expectation in ``[low, lambda_max]`` under ``rho``."""
    w, v = np.linalg.eigh(rho.matrix)
    target = rng.uniform(low, w[-1])
    a = math.sqrt((target - w[0]) / (w[-1] - w[0]))
    vec = a * v[:, -1] + math.sqrt(1 - a * a) * v[:, 0]
    return qc.QuantumEvent(np.outer(vec, vec.conj()), is_projector=True, validate=False)


def _boost(rho, top=0.8):
    """Mix ``rho`` towards its top eigenvector until that eigenvalue is ``top``."""
    w, v = np.linalg.eigh(rho.matrix)
    if w[-1] >= top:
        return rho
    s = (top - w[-1]) / (1 - w[-1])
    proj = np.outer(v[:, -1], v[:, -1].conj())
    return qc.QuantumState(qc.hermitize((1 - s) * rho.matrix + s * proj), validate=False)


def _diagonal_projectors(d):
    """All nonzero diagonal projectors on ``C^d``."""
    masks = [[(k >> i) & 1 for i in range(d)] for k in range(1, 2 ** d)]
    return [qc.QuantumEvent.diagonal(mask) for mask in masks]


def generate_instance(kind, d, m, seed, **knobs):
    """Seeded instance of one of the experiment families.

    Kinds
    -----
    random-events
        Random state, ``m`` random events, uniform thresholds.
    promise
        Random state and ``m`` rank-one projectors, one of which (recorded
        as ``metadata['planted']``) has expectation at least 3/4.
    planted-search
        Diagonal state and diagonal projectors with thresholds planted so
        that the correct answer is known: ``knobs['answer']`` is ``'above'``
        (one planted index with ``E > theta``, the rest at least ``epsilon``
        below) or ``'below'`` (all at least ``epsilon`` below).
    hypothesis-set
        ``m`` hypotheses with pairwise trace distance at least
        ``knobs['alpha_min']`` (rejection sampling). Pure hypotheses (the
        default) come with a pure ``rho`` at trace distance ``knobs['noise']``
        from the planted one; diagonal hypotheses with ``rho`` a mixture of the
        planted one and a random diagonal state of weight ``knobs['noise']``.
    adversarial-stream
        Deterministic adversary over a seeded pool of events: the event at
        step ``t`` is chosen from the pool by the outputs seen so far.
    """
    rng = np.random.default_rng(seed)
    diagonal = bool(knobs.get("diagonal", False))
    if kind == "random-events":
        rho = qc.random_state(d, rng)
        if diagonal:
            rho = qc.QuantumState.diagonal(np.diag(rho.matrix).real)
            events = [qc.QuantumEvent.diagonal(rng.uniform(0, 1, d)) for _ in range(m)]
        else:
            events = [qc.random_event(d, rng) for _ in range(m)]
        return Instance(kind, rho, events, list(rng.uniform(0, 1, m)))
    if kind == "promise":
        rho = _boost(qc.random_state(d, rng))
        events = [qc.random_projector(d, 1, rng) for _ in range(m)]
        planted = int(rng.integers(m))
        events[planted] = _planted_projector(rho, rng)
        return Instance(kind, rho, events, [0.5] * m, {"planted": planted})
    if kind == "planted-search":
        eps = float(knobs.get("epsilon", 0.25))
        answer = knobs.get("answer", "above")
        family = _diagonal_projectors(d)[:-1]  # drop the identity
        probs = rng.dirichlet(np.full(d, 4.0))
        rho = qc.QuantumState.diagonal(probs)
        while True:
            events = [family[i] for i in rng.integers(len(family), size=m)]
            ex = np.array([qc.expectation(rho, e) for e in events])
            if np.all(ex <= 1 - eps):
                break
        thresholds = [min(1.0, x + rng.uniform(eps, eps + 0.1)) for x in ex]
        meta = {"answer": answer}
        if answer == "above":
            planted = int(rng.integers(m))
            thresholds[planted] = max(0.0, ex[planted] - rng.uniform(0.05, 0.2))
            meta["planted"] = planted
        return Instance(kind, rho, events, thresholds, meta)
    if kind == "hypothesis-set":
        alpha = float(knobs.get("alpha_min", 0.3))
        noise = float(knobs.get("noise", 0.0))
        for _ in range(10000):
            if diagonal:
                states = [qc.QuantumState.diagonal(rng.dirichlet(np.ones(d))) for _ in range(m)]
            else:
                states = [qc.random_pure_state(d, rng) for _ in range(m)]
            dist = [qc.trace_distance(a, b) for i, a in enumerate(states) for b in states[i + 1:]]
            if min(dist) >= alpha:
                break
        else:
            raise InvalidInput(f"could not draw {m} hypotheses {alpha} apart in dimension {d}")
        planted = int(rng.integers(m))
        if diagonal:
            other = qc.QuantumState.diagonal(rng.dirichlet(np.ones(d)))
            rho = qc.QuantumState(qc.hermitize((1 - noise) * states[planted].matrix
                                               + noise * other.matrix), validate=False)
        else:
            # pure state at trace distance `noise` from the planted one; staying
            # pure keeps collective simulations in the top spin sector
            v = np.linalg.eigh(states[planted].matrix)[1][:, -1]
            w = rng.normal(size=d) + 1j * rng.normal(size=d)
            w -= np.vdot(v, w) * v
            w /= np.linalg.norm(w)
            a = math.asin(min(max(noise, 0.0), 1.0))
            rho = qc.QuantumState.from_vector(math.cos(a) * v + math.sin(a) * w)
        return Instance(kind, rho, hypotheses=states,
                        metadata={"planted": planted, "alpha_min": alpha, "noise": noise})
    if kind == "adversarial-stream":
        pool_size = int(knobs.get("pool", 8))
        rho = qc.random_state(d, rng)
        if diagonal:
            rho = qc.QuantumState.diagonal(np.diag(rho.matrix).real)
            fam = _diagonal_projectors(d)
            pool = [fam[i] for i in rng.integers(len(fam), size=pool_size)]
        else:
            pool = [qc.random_event(d, rng) for _ in range(pool_size)]
        thresholds = list(rng.uniform(0, 1, pool_size))

        def adversary(t, history):
            # history holds past outputs (strings or floats); the choice is a
            # deterministic function of them
            key = t + sum(int(1000 * h) if isinstance(h, float) else len(h) for h in history)
            i = key % pool_size
            return pool[i], thresholds[i]

        return Instance(kind, rho, pool, thresholds, {"pool": pool_size}, adversary=adversary)
    raise InvalidInput(f"unknown instance kind {kind!r}")


# ---------------------------------------------------------------- commands

def _search_config(spec):
    """``SearchConfig`` with any ``--set`` keys that name one of its fields."""
    base = SearchConfig()
    kw = {}
    for key, raw in spec.overrides.items():
        if key in SearchConfig.__dataclass_fields__:
            default = getattr(base, key)
            kw[key] = int(raw) if default is None else type(default)(raw)
    return base.with_overrides(**kw) if kw else base


def _cmd_verify_classical(spec, seeds):
    grid, c_test = cs.chi2_stability_sweep(range(1, 51), np.linspace(0.05, 0.95, 9),
                                           [0.5, 2 / 3, 0.8], [2.0, 4.0, 8.0, 16.0])
    rows, chain_flags = [], []
    for params, cert in grid:
        law, _ = cs.conditioned_binomial(params)
        base = cs.binomial_pmf(params.n, params.p)
        tv, h, kl, chi = (cs.divergence(k, law, base) for k in ("tv", "hellinger", "kl", "chisq"))
        chain = (tv <= h + 1e-9 and h <= math.sqrt(kl) + 1e-9
                 and math.sqrt(kl) <= math.sqrt(chi) + 1e-9)
        chain_flags.append(chain)
        rows.append({"n": params.n, "p": params.p, "theta": params.theta,
                     "noise_mean": params.noise_mean, "chi2": cert.lhs,
                     "bound_core": cert.bound_core, "ratio": cert.ratio, "chain_ok": chain})
    lam_grid = np.linspace(0, 1, 100)
    ineq = all(lhs <= rhs + 1e-12 for p in lam_grid for lam in lam_grid
               for lhs, rhs in [cs.certify_inequality_1(p, lam)])
    passed = all(chain_flags) and math.isfinite(c_test) and ineq and len(rows) >= 500
    return rows, {"chain": _rate(chain_flags)}, passed, None, {"c_test": c_test,
                                                              "inequality_1": ineq}


def _cmd_verify_quantum(spec, seeds):
    rows, flags = [], []
    for i, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        rho = qc.random_state(2, rng)
        a = qc.random_projector(2, 1, rng)
        n = int(rng.integers(1, 7))
        lam = 1.0 / (4 * math.sqrt(n))
        te = build_threshold_event(a, n, lam, 2 / 3)
        rep = certify_statistics_and_fidelity(te, rho)
        events = [qc.random_event(spec.d, rng) for _ in range(int(rng.integers(1, 7)))]
        nu = float(rng.choice([0.05, 0.1, 0.25, 0.5]))
        sigma = qc.random_state(spec.d, rng)
        lo, val, hi = verify_or_bounds(OrInstance(events, nu), sigma)
        ok = (rep.expectation_residual < 1e-9 and rep.fidelity_residual < 1e-9
              and lo <= val + 1e-9 and val <= hi + 1e-9)
        flags.append(ok)
        rows.append({"trial": i, "n": n, "expectation_residual": rep.expectation_residual,
                     "fidelity_residual": rep.fidelity_residual, "or_lower": lo, "or_value": val,
                     "or_upper": hi, "ok": ok})
    return rows, {"identities": _rate(flags)}, all(flags), None, {}


def _search_truth(inst, result, eps):
    ex = inst.expectations()
    if result.kind == "above":
        return bool(ex[result.index] > inst.thresholds[result.index] - eps)
    return bool(np.all(ex <= np.asarray(inst.thresholds) + 1e-12))


def _cmd_run_search(spec, seeds):
    cfg = _search_config(spec)
    answer = spec.knob("answer", "above")
    diagonal = spec.knob("diagonal", True)
    rows, flags = [], []
    copies = None
    for i, ss in enumerate(seeds):
        inst_seed, run_seed = ss.spawn(2)
        if diagonal:
            inst = generate_instance("planted-search", spec.d, spec.m, inst_seed,
                                     answer=answer, epsilon=spec.eps)
        else:
            inst = generate_instance("promise", spec.d, spec.m, inst_seed)
            inst.thresholds = [0.75] * spec.m
        ti = ThresholdInstance(pairs=list(zip(inst.events, inst.thresholds)), epsilon=spec.eps,
                               delta=spec.delta)
        res = threshold_search(ti, inst.rho, run_seed, cfg)
        ok = _search_truth(inst, res, spec.eps)
        flags.append(ok)
        copies = res.transcript.copies_used
        rows.append({"trial": i, "kind": res.kind, "index": res.index, "correct": ok,
                     "copies_used": copies})
    wrong = [not f for f in flags]
    rates = {"correct": _rate(flags), "wrong": _rate(wrong)}
    return rows, rates, rates["wrong"]["ci_high"] <= spec.delta, copies, {}


def _cmd_run_decision(spec, seeds):
    answer = spec.knob("answer", "above")
    rows, flags = [], []
    for i, ss in enumerate(seeds):
        inst_seed, run_seed = ss.spawn(2)
        inst = generate_instance("planted-search", spec.d, spec.m, inst_seed, answer=answer,
                                 epsilon=spec.eps)
        ti = ThresholdInstance(pairs=list(zip(inst.events, inst.thresholds)), epsilon=spec.eps,
                               delta=spec.delta)
        seed_int = int(run_seed.generate_state(1)[0])
        res = threshold_decision(ti, inst.rho, seed_int, mode=spec.mode)
        ex = inst.expectations()
        th = np.asarray(inst.thresholds)
        if res.kind == "some_above":
            ok = bool(np.any(ex > th - spec.eps))
        else:
            ok = bool(np.all(ex <= th + 1e-12))
        flags.append(ok)
        rows.append({"trial": i, "kind": res.kind, "probability": res.probability,
                     "copies": res.copies, "correct": ok})
    rates = {"correct": _rate(flags), "wrong": _rate([not f for f in flags])}
    return rows, rates, rates["wrong"]["ci_high"] <= spec.delta, None, {}


def _cmd_run_shadow(spec, seeds):
    diagonal = spec.knob("diagonal", True)
    adaptive = spec.knob("adaptive", False)
    cfg = ShadowConfig(spec.eps, spec.delta, spec.knob("mistake_constant", 2.0),
                       _search_config(spec))
    rows, flags = [], []
    copies = None
    for i, ss in enumerate(seeds):
        inst_seed, run_seed = ss.spawn(2)
        if adaptive:
            inst = generate_instance("adversarial-stream", spec.d, spec.m, inst_seed,
                                     diagonal=diagonal)
            chosen = []

            def stream(t, estimates, _inst=inst, _chosen=chosen):
                ev, _ = _inst.adversary(t, [float(x) for x in estimates])
                _chosen.append(ev)
                return ev

            res = shadow_tomography(stream, inst.rho, cfg, run_seed, m=spec.m)
            events = chosen
        else:
            inst = generate_instance("random-events", spec.d, spec.m, inst_seed,
                                     diagonal=False)
            if diagonal:
                fam = _diagonal_projectors(spec.d)
                rng = np.random.default_rng(inst_seed)
                inst.rho = qc.QuantumState.diagonal(rng.dirichlet(np.ones(spec.d)))
                inst.events = [fam[j] for j in rng.integers(len(fam), size=spec.m)]
            res = shadow_tomography(inst.events, inst.rho, cfg, run_seed)
            events = inst.events
        truth = np.array([qc.expectation(inst.rho, e) for e in events])
        err = float(np.max(np.abs(np.asarray(res.estimates) - truth)))
        ok = err <= spec.eps
        flags.append(ok)
        copies = res.copies_budget
        rows.append({"trial": i, "max_error": err, "mistakes": res.mistakes,
                     "rounds": res.rounds, "ok": ok})
    rates = {"all_within_eps": _rate(flags)}
    return rows, rates, rates["all_within_eps"]["ci_low"] >= 1 - spec.delta, copies, {}


def _cmd_run_hypothesis(spec, seeds):
    method = spec.knob("method", "shadow")
    noise = spec.knob("noise", 0.05)
    rows, flags = [], []
    for i, ss in enumerate(seeds):
        inst_seed, run_seed = ss.spawn(2)
        diagonal = method != "decode"
        # unique decoding needs well-separated hypotheses to stay affordable
        alpha = spec.knob("alpha_min", 0.6 if method == "decode" else 0.2)
        inst = generate_instance("hypothesis-set", spec.d, spec.m, inst_seed,
                                 alpha_min=alpha, noise=noise,
                                 diagonal=diagonal)
        hs = build_hypothesis_set(inst.hypotheses)
        dist = np.array([qc.trace_distance(inst.rho, s) for s in hs.states])
        eta = float(dist.min())
        if method == "shadow":
            k = select_via_shadow(hs, inst.rho, spec.eps, spec.delta, run_seed).index
            ok = dist[k] <= 3 * eta + spec.eps + 1e-12
        elif method == "search":
            k = select_via_search(hs, inst.rho, spec.eps, spec.delta, run_seed).index
            ok = dist[k] <= 3.01 * eta + spec.eps + 1e-12
        elif method == "decode":
            res = unique_decode(hs, inst.rho, spec.eps, spec.delta, mode="exact")
            k = res.index
            ok = bool(res.detail["success"][inst.metadata["planted"]] >= 1 - spec.delta)
        else:
            raise InvalidInput(f"unknown method {method!r}")
        flags.append(ok)
        rows.append({"trial": i, "selected": k, "planted": inst.metadata["planted"],
                     "eta": eta, "distance": float(dist[k]), "ok": ok})
    rates = {"success": _rate(flags)}
    return rows, rates, rates["success"]["ci_low"] >= 1 - spec.delta, None, {}


def _cmd_sweep(spec, seeds):
    cfg = _search_config(spec)
    ms = [int(x) for x in str(spec.overrides.get("ms", "2,4,8")).split(",")]
    rows = []
    for m in ms:
        plan = search_plan(m, spec.eps, spec.delta, cfg)
        rows.append({"m": m, "copies_used": plan["copies"], "n_core": plan["n_core"],
                     "batches": plan["batches"], "holdout": plan["holdout"], "n0": plan["n0"]})
    coef, resid = fit_log_squared(ms, [r["copies_used"] for r in rows])
    return rows, {}, resid < 0.25, rows[-1]["copies_used"], {"fit": coef, "max_residual": resid}


_DISPATCH = {
    "verify-classical": _cmd_verify_classical,
    "verify-quantum": _cmd_verify_quantum,
    "run-search": _cmd_run_search,
    "run-decision": _cmd_run_decision,
    "run-shadow": _cmd_run_shadow,
    "run-hypothesis": _cmd_run_hypothesis,
    "sweep": _cmd_sweep,
}


def run_experiment(spec):
    """Run one experiment; deterministic given ``spec`` apart from wall time."""
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.trials)
    start = time.perf_counter()
    rows, rates, passed, copies, notes = _DISPATCH[spec.cmd](spec, seeds)
    return ResultRecord(spec.cmd, asdict(spec), rows, rates, bool(passed), copies,
                        time.perf_counter() - start, notes)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def write_outputs(record, out):
    """Write ``<out>.csv`` (one row per trial) and ``<out>.json`` (summary)."""
    base = Path(out)
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    with open(csv_path, "w", newline="") as fh:
        if record.rows:
            writer = csv.DictWriter(fh, fieldnames=list(record.rows[0].keys()))
            writer.writeheader()
            writer.writerows(record.rows)
    with open(json_path, "w") as fh:
        json.dump(_jsonable(record.summary()), fh, indent=2)
    return csv_path, json_path


def _parse_overrides(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise InvalidInput(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="qda", description=__doc__.splitlines()[0])
    p.add_argument("--cmd", required=True, choices=COMMANDS)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("sampled", "exact"), default="sampled")
    p.add_argument("--out", default=None, help="output path prefix for .csv and .json")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration constant; repeatable")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_INVALID
    try:
        spec = ExperimentSpec(args.cmd, args.d, args.m, args.eps, args.delta, args.trials,
                              args.seed, args.mode, args.out, _parse_overrides(args.set))
        record = run_experiment(spec)
    except ResourceCapExceeded as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InvalidInput, ValueError, TypeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OverBudget as exc:
        print(f"over budget: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if spec.out:
        try:
            write_outputs(record, spec.out)
        except OSError as exc:
            print(f"cannot write output: {exc}", file=sys.stderr)
            return EXIT_UNWRITABLE
    print(json.dumps(_jsonable(record.summary()), indent=2))
    return EXIT_PASS if record.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
