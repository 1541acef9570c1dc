"""Preset families of Sobolev pairs on a grid domain.

Gradients are analytic where the family has a closed form, so pairs are
exact samples of (f, grad f) at cell centers.
"""

import numpy as np

from .errors import ConfigError
from .forms import SobolevPair, gradient


def sine_decay(domain, count, start=1):
    """f_k = sin(2 pi k x1) / (2 pi k), g_k = (cos(2 pi k x1), 0, ...)."""
    x = domain.centers[:, 0]
    out = []
    for k in range(start, start + count):
        g = np.zeros((domain.n_active, domain.dim))
        g[:, 0] = np.cos(2 * np.pi * k * x)
        out.append(SobolevPair(np.sin(2 * np.pi * k * x) / (2 * np.pi * k), g, label=f"k={k}"))
    return out


def sine(domain, count, start=1):
    """f_k = sin(2 pi k x1); gradients grow like k."""
    x = domain.centers[:, 0]
    out = []
    for k in range(start, start + count):
        g = np.zeros((domain.n_active, domain.dim))
        g[:, 0] = 2 * np.pi * k * np.cos(2 * np.pi * k * x)
        out.append(SobolevPair(np.sin(2 * np.pi * k * x), g, label=f"k={k}"))
    return out


def constants(domain, count):
    vals = np.linspace(-1.0, 1.0, count) if count > 1 else np.zeros(1)
    zero = np.zeros((domain.n_active, domain.dim))
    return [SobolevPair(np.full(domain.n_active, v), zero, label=f"c={v:.6g}") for v in vals]


def bump(domain, center, radius, power=2):
    """(1 - |x-c|^2/R^2)_+^power with its analytic gradient; supported in the
    open Euclidean ball of radius R."""
    c = np.asarray(center, dtype=float)
    diff = domain.centers - c
    s = 1.0 - np.sum(diff ** 2, axis=1) / radius ** 2
    inside = s > 0
    f = np.where(inside, np.maximum(s, 0.0) ** power, 0.0)
    coef = np.where(inside, power * np.maximum(s, 0.0) ** (power - 1), 0.0)
    g = (-2.0 / radius ** 2) * coef[:, None] * diff
    return SobolevPair(f, g, support=inside, label=f"bump@{c.tolist()},R={radius:.6g}")


def bumps(domain, count, radius=None, seed=0, region=None):
    """Bumps centered on an even spread of active cells (or cells of ``region``)."""
    idx = np.flatnonzero(region) if region is not None else np.arange(domain.n_active)
    if idx.size == 0:
        raise ConfigError("bump region is empty")
    if radius is None:
        radius = 0.25 * min(hi - lo for lo, hi in domain.bounds)
    pick = idx[np.linspace(0, idx.size - 1, count).round().astype(int)]
    return [bump(domain, domain.centers[i], radius) for i in pick]


def from_scalars(domain, fs):
    """Pairs (f, stencil gradient of f)."""
    return [SobolevPair(f, gradient(domain, f)) for f in fs]


def build_family(domain, spec):
    kind = spec.get("preset", "sine_decay")
    count = int(spec.get("count", 16))
    if count < 1:
        raise ConfigError("family count must be positive")
    if kind == "sine_decay":
        return sine_decay(domain, count, int(spec.get("start", 1)))
    if kind == "sine":
        return sine(domain, count, int(spec.get("start", 1)))
    if kind == "constants":
        return constants(domain, count)
    if kind == "bumps":
        return bumps(domain, count, spec.get("radius"))
    raise ConfigError(f"unknown family preset {kind!r}")
