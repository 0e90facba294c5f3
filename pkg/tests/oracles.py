"""Reference implementations that share no code with the package.

Each oracle takes a different route to the same number: Legendre values
from numpy's power-series conversion, pseudo-Zernike radials from the
factorial formula, push-sum from the literal ``u - d*w + sum(memory)`` with
per-robot dictionaries, and graph quantities from brute-force reachability.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import legendre as npleg


def legendre(m: int, x):
    return npleg.legval(np.asarray(x, dtype=float), [0] * m + [1])


def legendre_deriv(m: int, x):
    return npleg.legval(np.asarray(x, dtype=float), npleg.legder([0] * m + [1]))


def pz_radial_coeffs(p: int, q: int) -> np.ndarray:
    """Coefficients of r^q .. r^p from the closed factorial form.

    S_pq(r) = sum_s (-1)^s (2p+1-s)! / (s! (p-q-s)! (p+q+1-s)!) r^(p-s)
    """
    out = np.zeros(p - q + 1)
    for s in range(p - q + 1):
        c = (-1) ** s * math.factorial(2 * p + 1 - s) / (
            math.factorial(s) * math.factorial(p - q - s) * math.factorial(p + q + 1 - s)
        )
        out[p - s - q] = c
    return out


def pz_complex(p: int, q: int, x: float, y: float) -> complex:
    """(p+1)/pi * conj(W_pq) at one point, W_pq = S_pq(r) e^{jq theta}."""
    r, theta = math.hypot(x, y), math.atan2(y, x)
    radial = sum(c * r ** (q + k) for k, c in enumerate(pz_radial_coeffs(p, q)))
    return (p + 1) / math.pi * radial * complex(math.cos(q * theta), -math.sin(q * theta))


def lm_phi(order: int, x: float, y: float) -> dict:
    """{(p, q): value} for every p + q in 1..order."""
    return {
        (p, d - p): (2 * p + 1) * (2 * (d - p) + 1) / 4 * legendre(p, x) * legendre(d - p, y)
        for d in range(1, order + 1)
        for p in range(d + 1)
    }


def pzm_phi(order: int, x: float, y: float) -> dict:
    """{(p, q, part): value} with the real/imaginary split of each complex moment."""
    out = {}
    for p in range(1, order + 1):
        for q in range(p + 1):
            z = pz_complex(p, q, x, y)
            out[(p, q, "Re")] = z.real
            if q > 0:
                out[(p, q, "Im")] = z.imag
    return out


def central_difference(f, s, h: float = 1e-5) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        cols.append((np.asarray(f(s + e)) - np.asarray(f(s - e))) / (2 * h))
    return np.stack(cols, axis=1)


def reachable(adj: np.ndarray, start: int) -> set:
    seen, stack = {start}, [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return seen


def strongly_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    return all(len(reachable(adj, i)) == n for i in range(n))


def left_null_vector(laplacian: np.ndarray) -> np.ndarray:
    """z with L^T z = 0 and sum(z) = 1, by a least-squares solve."""
    n = laplacian.shape[0]
    A = np.vstack([laplacian.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


class LiteralPushSum:
    """Per-robot push-sum written exactly as ``v = u - d*w + sum(memory)``.

    ``memory[i]`` maps sender -> [payload, age]. Fine for short runs only:
    the direct subtraction loses precision once ``w`` grows large.
    """

    def __init__(self, n: int, size: int, gamma: float, horizon: int):
        self.w = [np.zeros(size + 1) for _ in range(n)]
        self.v = [np.zeros(size + 1) for _ in range(n)]
        self.memory = [dict() for _ in range(n)]
        self.gamma = gamma
        self.horizon = horizon

    def step(self, u, adj, delivered, broadcasts):
        n = len(self.w)
        for i in range(n):
            mem = self.memory[i]
            for k in mem:
                mem[k][1] += 1
            for k in range(n):
                if delivered[k, i]:
                    mem[k] = [broadcasts[k].copy(), 0]
            for k in [k for k, (_, age) in mem.items() if age > self.horizon]:
                del mem[k]
            d_out = int(adj[i].sum())
            total = np.zeros_like(self.w[i])
            for payload, _ in mem.values():
                total = total + payload
            self.v[i] = u[i] - d_out * self.w[i] + total
        for i in range(n):
            self.w[i] = self.w[i] + self.gamma * self.v[i]
        return [w.copy() for w in self.w]

    def estimates(self):
        return [v[:-1] / v[-1] for v in self.v]
