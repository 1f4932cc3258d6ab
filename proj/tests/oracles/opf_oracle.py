"""Brute-force constrained OPF oracle, independent of the C++ library.

Own Newton-Raphson power flow (polar, analytic Jacobian) and own droop
closure, read straight from a network JSON file. Minimises
(P_pcc - P_set)^2 over the (P, Q) of the chosen actors subject to their boxes
and the voltage band on the chosen buses: a coarse grid over the decision
space first, then SLSQP polishing from the best feasible grid points.

usage: opf_oracle.py NETWORK PCC_BRANCH P_SET_W --actors a,b --buses x,y
                     [--fixed id=p:q,...] [--grid N]
"""
import argparse, itertools, json
import numpy as np
from scipy.optimize import minimize


class Plant:
    def __init__(self, path):
        net = json.load(open(path))
        self.sb = net["base_mva"] * 1e6
        self.buses = net["buses"]
        self.idx = {b["id"]: i for i, b in enumerate(self.buses)}
        vn = {b["id"]: b["v_nominal"] for b in self.buses}
        n = len(self.buses)
        self.Y = np.zeros((n, n), complex)
        self.br = {}
        for br in net["branches"]:
            f, t = self.idx[br["from_bus"]], self.idx[br["to_bus"]]
            zb = vn[br["from_bus"]] ** 2 / self.sb
            y = 1 / complex(br["resistance"] / zb, br["reactance"] / zb)
            self.Y[f, f] += y; self.Y[t, t] += y; self.Y[f, t] -= y; self.Y[t, f] -= y
            self.br[br["id"]] = (f, t, y)
        self.slack = next(i for i, b in enumerate(self.buses) if b["bus_kind"] == "slack")
        self.vs = self.buses[self.slack].get("v_setpoint", 1.0)
        self.pq = [i for i in range(n) if i != self.slack]
        self.actors = {a["id"]: a for a in net["actors"]}
        self.n = n

    def nr(self, s):
        Y, pq = self.Y, self.pq
        V = np.full(self.n, self.vs, complex)
        for _ in range(50):
            I = Y @ V
            mis = s - V * np.conj(I)
            F = np.r_[mis.real[pq], mis.imag[pq]]
            if np.max(np.abs(F)) < 1e-12:
                return V
            dth = 1j * np.diag(V) @ np.conj(np.diag(I) - Y @ np.diag(V))
            dvm = np.diag(V) @ np.conj(Y @ np.diag(V / np.abs(V))) + np.diag(V / np.abs(V)) @ np.conj(np.diag(I))
            J = np.block([[dth.real[np.ix_(pq, pq)], dvm.real[np.ix_(pq, pq)]],
                          [dth.imag[np.ix_(pq, pq)], dvm.imag[np.ix_(pq, pq)]]])
            dx = np.linalg.solve(J, F)
            th = np.angle(V); vm = np.abs(V)
            th[pq] += dx[:len(pq)]; vm[pq] += dx[len(pq):]
            V = vm * np.exp(1j * th)
        raise RuntimeError("power flow did not converge")

    def droop(self, a, v):
        d = a["droop"]
        m = np.clip((abs(v - 1) - d["deadband"]) / (d["v_saturation"] - d["deadband"]), 0, 1)
        head = d["q_max_fraction"] * np.sqrt(max(a["s_rated"] ** 2 - a["p_reference"] ** 2, 0))
        return -np.sign(v - 1) * m * head

    def solve(self, setpoints):
        """setpoints: id -> (p, q) in W / var for controllable actors."""
        qv = {i: 0.0 for i, a in self.actors.items() if a["kind"] == "voltvar"}
        for _ in range(500):
            s = np.zeros(self.n, complex)
            for i, a in self.actors.items():
                b = self.idx[a["bus"]]
                if a["kind"] == "fixed_load":
                    s[b] += complex(a["p_reference"], a.get("q_reference", 0.0))
                elif a["kind"] == "voltvar":
                    s[b] += complex(a["p_reference"], qv[i])
                else:
                    p, q = setpoints.get(i, (min(max(a["p_reference"], a["p_min"]), a["p_max"]), 0.0))
                    s[b] += complex(p, q)
            V = self.nr(s / self.sb)
            step = 0.0
            for i in qv:
                new = self.droop(self.actors[i], abs(V[self.idx[self.actors[i]["bus"]]]))
                step = max(step, abs(new - qv[i]))
                qv[i] = 0.5 * qv[i] + 0.5 * new
            if step < 1e-7:
                break
        return V, qv

    def flow(self, V, branch):
        f, t, y = self.br[branch]
        return (V[f] * np.conj((V[f] - V[t]) * y)).real * self.sb


def opf(plant, pcc, p_set, actors, buses, fixed, grid=7):
    box = []
    for a in actors:
        A = plant.actors[a]
        box += [(A["p_min"], A["p_max"]), (A["q_min"], A["q_max"])]
    vb = [plant.idx[b] for b in buses]
    vmin = np.array([plant.buses[i]["v_min"] for i in vb])
    vmax = np.array([plant.buses[i]["v_max"] for i in vb])

    cache = {}

    def run(x):
        key = tuple(np.round(x, 9))
        if key in cache:
            return cache[key]
        sp = dict(fixed)
        for k, a in enumerate(actors):
            sp[a] = (x[2 * k], x[2 * k + 1])
        V, _ = plant.solve(sp)
        cache[key] = (np.abs(V)[vb], plant.flow(V, pcc))
        return cache[key]

    scale = max(abs(p_set), 1e3)
    f = lambda x: ((run(x)[1] - p_set) / scale) ** 2
    g = lambda x: np.r_[vmax - run(x)[0], run(x)[0] - vmin] * 1e3
    starts = []
    for x in itertools.product(*[np.linspace(lo, hi, grid) for lo, hi in box]):
        v, p = run(x)
        if np.all(v <= vmax) and np.all(v >= vmin):
            starts.append((abs(p - p_set), x))
    starts.sort(key=lambda t: t[0])
    lo = np.array([b[0] for b in box]); span = np.array([b[1] - b[0] for b in box])
    span[span == 0] = 1.0
    unit = lambda z: lo + z * span
    best = None
    for _, x0 in starts[:3]:
        r = minimize(lambda z: f(unit(z)), (np.array(x0) - lo) / span, method="SLSQP",
                     bounds=[(0, 1)] * len(box), constraints=[{"type": "ineq", "fun": lambda z: g(unit(z))}],
                     options={"ftol": 1e-12, "maxiter": 200, "eps": 1e-6})
        r.x = unit(r.x)
        if min(g(r.x)) >= -1e-6 and (best is None or r.fun < best.fun):
            best = r
    v, p = run(best.x)
    return best.x, v, p


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("network"); ap.add_argument("pcc"); ap.add_argument("p_set", type=float)
    ap.add_argument("--actors", required=True); ap.add_argument("--buses", required=True)
    ap.add_argument("--fixed", default=""); ap.add_argument("--grid", type=int, default=7)
    a = ap.parse_args()
    fixed = {}
    for item in filter(None, a.fixed.split(",")):
        k, v = item.split("=")
        p, q = v.split(":")
        fixed[k] = (float(p), float(q))
    plant = Plant(a.network)
    x, v, p = opf(plant, a.pcc, a.p_set, a.actors.split(","), a.buses.split(","), fixed, a.grid)
    print(json.dumps({"p_set": a.p_set, "p_pcc": p, "epsilon": abs(a.p_set - p) / abs(a.p_set),
                      "objective": (a.p_set - p) ** 2, "v_max": float(v.max()), "v_min": float(v.min()),
                      "dispatch": {n: [x[2 * k], x[2 * k + 1]] for k, n in enumerate(a.actors.split(","))}},
                     indent=1))
