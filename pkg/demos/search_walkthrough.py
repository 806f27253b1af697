"""Walk through one online threshold search on a planted qubit instance.

Prints the resource plan, the exact per-step chain of the core search on a
promise instance, and a few end-to-end runs with their answers checked
against the true expectations.

    python3 demos/search_walkthrough.py
"""
import numpy as np

from qda import harness
from qda import threshold_search as ts

EPS, DELTA, M = 0.25, 0.2, 4


def show_plan():
    plan = ts.search_plan(M, EPS, DELTA)
    print("plan for m=4, eps=0.25, delta=0.2")
    for key in ("n0", "n_core", "batches", "holdout", "failsafe_count", "lam", "copies"):
        print(f"  {key:15s} {plan[key]}")


def show_core_chain():
    inst = harness.generate_instance("promise", 2, M, seed=3)
    runner = ts.CoreSearchRunner(inst.events, inst.rho)
    p, r, q = runner.exact_chain()
    print("\ncore search on a promise instance (n=%d copies, lam=%.4f)" % (runner.n, runner.lam))
    print("  step  E[A]    fire prob  survive")
    for t, e in enumerate(inst.expectations()):
        print(f"  {t:4d}  {e:.3f}   {1 - r[t]:.4f}     {q[t]:.4f}")
    halt = runner.halting_distribution()
    print("  halting distribution:", np.round(halt, 4))


def show_end_to_end():
    print("\nend-to-end searches")
    for answer in ("above", "below"):
        inst = harness.generate_instance("planted-search", 2, M, seed=11, answer=answer,
                                         epsilon=EPS)
        ti = ts.ThresholdInstance(pairs=list(zip(inst.events, inst.thresholds)), epsilon=EPS,
                                  delta=DELTA)
        res = ts.threshold_search(ti, inst.rho, seed=0)
        ex = np.round(inst.expectations(), 3)
        print(f"  planted {answer:5s}: E={ex} thresholds={np.round(inst.thresholds, 3)}"
              f" -> {res.kind} {res.index if res.index is not None else ''}")
        print(f"  copies used: {res.transcript.copies_used}")


if __name__ == "__main__":
    show_plan()
    show_core_chain()
    show_end_to_end()
