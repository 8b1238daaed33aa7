"""Deterministic random field suites shared by the CLI, scripts and tests."""

from __future__ import annotations

import numpy as np

from .calculus import laplacian
from .notions import CheckConfig, equivalence_report
from .space import MMGraph, regular_domain


def embedding(space: MMGraph) -> np.ndarray:
    """Ambient coordinates used to build smooth fields (x, y, z on the sphere)."""
    if space.kind == "sphere2":
        c = space.coordinate_names()
        return np.c_[c["x"], c["y"], c["z"]]
    return np.asarray(space.coords, dtype=float)


def _trig_terms(space, rng, terms, max_freq, amplitude):
    X = embedding(space)
    out = np.zeros(space.n)
    lip = 0.0
    for _ in range(terms):
        k = rng.integers(-max_freq, max_freq + 1, size=X.shape[1])
        a = amplitude * rng.normal()
        out += a * np.sin(X @ k + rng.uniform(0, 2 * np.pi))
        lip += abs(a) * float(np.linalg.norm(k))
    return out, lip


def random_smooth_field(space: MMGraph, rng: np.random.Generator, terms: int = 4,
                        max_freq: int = 2, amplitude: float = 0.5) -> np.ndarray:
    """Random trigonometric polynomial in the ambient coordinates."""
    return _trig_terms(space, rng, terms, max_freq, amplitude)[0]


def lipschitz_pair(space: MMGraph, rng: np.random.Generator, f_lip: float = 3.0,
                   eta_lip: float = 1.0):
    """Independent smooth ``(f, eta)`` rescaled to Lipschitz bounds ``f_lip`` and
    ``eta_lip`` in the ambient (chart) metric."""
    out = []
    for target in (f_lip, eta_lip):
        vals, lip = _trig_terms(space, rng, 4, 2, 0.5)
        out.append(vals * (target / lip) if lip > 0 else vals)
    return tuple(out)


def slack_eta(space: MMGraph, f, slack: float) -> np.ndarray:
    """``Lap f + slack``; zero where the one-ring is incomplete."""
    return np.nan_to_num(laplacian(space, f), nan=0.0) + slack


def equivalence_suite(space: MMGraph, count: int, slack: float, seed: int = 0,
                      dom=None, config: CheckConfig | None = None):
    """Agreement matrices for ``count`` random fields with ``eta = Lap f + slack``."""
    rng = np.random.default_rng(seed)
    dom = regular_domain(space) if dom is None else dom
    out = []
    for _ in range(count):
        f = random_smooth_field(space, rng)
        out.append(equivalence_report(space, dom, f, slack_eta(space, f, slack), config))
    return out
