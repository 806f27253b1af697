"""Estimate a stream of qubit events online, then pick a nearby hypothesis.

    python3 demos/shadow_and_selection.py
"""
import numpy as np

from qda import harness
from qda import hypothesis_selection as hs
from qda import quantum_core as qc
from qda import shadow_tomography as sh

EPS, DELTA = 0.25, 0.2


def show_shadow():
    rng = np.random.default_rng(5)
    family = harness._diagonal_projectors(2)
    rho = qc.QuantumState.diagonal(rng.dirichlet(np.ones(2)))
    events = [family[j] for j in rng.integers(len(family), size=12)]
    res = sh.shadow_tomography(events, rho, sh.ShadowConfig(EPS, DELTA), seed=1)
    truth = np.array([qc.expectation(rho, e) for e in events])
    print(f"shadow tomography: {len(events)} events, {res.mistakes} mistakes, "
          f"budget {res.rounds} rounds")
    print("  estimate  truth   outcome")
    for est, mu, rec in zip(res.estimates, truth, res.records):
        print(f"  {est:.3f}     {mu:.3f}   {rec['outcome']}")
    print(f"  max error {np.max(np.abs(np.array(res.estimates) - truth)):.3f} (target {EPS})")


def show_selection():
    inst = harness.generate_instance("hypothesis-set", 2, 4, seed=2, alpha_min=0.2, noise=0.05,
                                     diagonal=True)
    hset = hs.build_hypothesis_set(inst.hypotheses)
    dist = np.array([qc.trace_distance(inst.rho, s) for s in hset.states])
    print("\nhypothesis selection, trace distances to the unknown state:", np.round(dist, 3))
    k = hs.select_via_shadow(hset, inst.rho, EPS, DELTA, seed=0).index
    res = hs.select_via_search(hset, inst.rho, EPS, DELTA, seed=0)
    print(f"  shadow route picks {k} (bound 3*eta + eps = {3 * dist.min() + EPS:.3f})")
    print(f"  search route picks {res.index} after {len(res.detail['rounds'])} searches "
          f"(bound 3.01*eta + eps = {3.01 * dist.min() + EPS:.3f})")
    for r in res.detail["rounds"]:
        print(f"    eta_bar={r['eta_bar']:.4f}  {r['kind']}")


if __name__ == "__main__":
    show_shadow()
    show_selection()
