"""Regenerates the golden files with plain numpy.

Decoherence uses the per-photon Kraus form
    K0 = cos a |H><H|,  K1 = sin a (|V><H| - |H><V|),  K2 = cos a |V><V|
which is independent of the time-ancilla construction used by the crate.
"""
import json
import os

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
X = np.array([[0, 1], [1, 0]])
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1, -1])


def rot(deg):
    t = np.radians(deg)
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


def decohere(rho, deg):
    t = np.radians(deg)
    c, s = np.cos(t), np.sin(t)
    ks = [np.array([[c, 0], [0, 0]]), np.array([[0, -s], [s, 0]]), np.array([[0, 0], [0, c]])]
    out = np.zeros((4, 4), complex)
    for a in ks:
        for b in ks:
            m = np.kron(a, b)
            out += m @ rho @ m.conj().T
    return out


def purify(pair1, pair2):
    rho = np.kron(pair1, pair2)  # A1 B1 A2 B2
    u = np.kron(np.kron(rot(45), rot(45)), np.kron(rot(45), rot(45)))
    rho = u @ rho @ u.T
    keep = [1.0 if ((i >> 3) & 1) == ((i >> 1) & 1) and ((i >> 2) & 1) == (i & 1) else 0.0 for i in range(16)]
    p = np.diag(keep)
    plus = np.full((2, 2), 0.5)
    m = np.kron(np.kron(plus, np.eye(2)), np.kron(np.eye(2), plus)) @ p
    rho = m @ rho @ m.T
    t = rho.reshape([2] * 8)
    out = np.einsum("abcdaefd->cbfe", t).reshape(4, 4)
    w = np.trace(out).real
    return out / w, w


def s_max(r):
    t = np.array([[np.trace(r @ np.kron(a, b)).real for b in (X, Y, Z)] for a in (X, Y, Z)])
    e = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return 2 * np.sqrt(e[0] + e[1])


def tangle(r):
    yy = np.kron(Y, Y)
    lam = np.sort(np.sqrt(np.abs(np.linalg.eigvals(r @ yy @ r.conj() @ yy))))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3]) ** 2


def dump(obj, name):
    with open(os.path.join(HERE, name), "w") as f:
        json.dump(obj, f, indent=1)


def state(r):
    return {"dims": [2, 2], "re": r.real.tolist(), "im": r.imag.tolist()}


phi_minus = np.array([1, 0, 0, -1]) / np.sqrt(2)
src = np.outer(phi_minus, phi_minus).astype(complex)
fw = decohere(src, 50.0)
bw = decohere(src, 62.0)
out, w = purify(bw, fw)
dump(state(fw), "decohered_phi_minus_alpha50.json")
dump(state(out), "purified_fw50_bw62.json")
dump(
    {
        "success_probability": w,
        "s_max": s_max(out),
        "tangle": tangle(out),
        "linear_entropy": 4 / 3 * (1 - np.trace(out @ out).real),
    },
    "purified_fw50_bw62_metrics.json",
)
