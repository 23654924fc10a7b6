"""Signed powers, the p-Laplacian, and the quadratic-type forms built on it."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .tree import WeightedTree, as_exponent


def signed_power(x, q):
    """``|x|**(q - 2) * x``, written as ``sign(x) * |x|**(q - 1)`` so that
    ``x = 0`` maps to 0 for every ``q > 1``."""
    if q <= 1:
        raise ValueError("q must exceed 1")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.abs(x) ** (q - 1.0)
    return float(out) if out.ndim == 0 else out


def as_dirichlet(tree: WeightedTree, f) -> np.ndarray:
    """Coerce ``f`` to a float vertex array vanishing at the root."""
    f = np.asarray(f, dtype=float)
    if f.shape != (tree.vertex_count,):
        raise ValueError(f"expected {tree.vertex_count} vertex values, got shape {f.shape}")
    if f[0] != 0.0:
        raise ValueError("vertex functions must vanish at the root")
    if not np.all(np.isfinite(f)):
        raise ValueError("vertex function has non-finite values")
    return f


def edge_flux(tree: WeightedTree, p, f) -> np.ndarray:
    """``nu_j * psi(f_j - f_{j*})`` on every edge (indexed by the child ``j``)."""
    exp = as_exponent(p)
    flux = np.zeros(tree.vertex_count)
    flux[1:] = tree.nu[1:] * signed_power(tree.increments(f)[1:], exp.p)
    return flux


def apply_omega_p(tree: WeightedTree, p, f) -> np.ndarray:
    """The p-Laplacian ``Omega_p f`` on ``V \\ {o}``; entry 0 is reported as 0."""
    f = as_dirichlet(tree, f)
    flux = edge_flux(tree, p, f)
    out = np.bincount(tree.parent[1:], weights=flux[1:], minlength=tree.vertex_count) - flux
    out[0] = 0.0
    return out


def dirichlet_energy(tree: WeightedTree, p, f) -> float:
    exp = as_exponent(p)
    f = as_dirichlet(tree, f)
    return math.fsum(tree.nu[1:] * np.abs(tree.increments(f)[1:]) ** exp.p)


def lp_mass(tree: WeightedTree, p, f) -> float:
    """``mu(|f|^p)`` over the non-root vertices."""
    exp = as_exponent(p)
    f = as_dirichlet(tree, f)
    return math.fsum(tree.mu[1:] * np.abs(f[1:]) ** exp.p)


def rayleigh_quotient(tree: WeightedTree, p, f) -> float:
    mass = lp_mass(tree, p, f)
    if mass == 0.0:
        raise ValueError("Rayleigh quotient of the zero function")
    return dirichlet_energy(tree, p, f) / mass


class Pairing(NamedTuple):
    vertex_form: float
    edge_form: float


def pairing(tree: WeightedTree, p, f, g) -> Pairing:
    """``(-Omega_p f, g)`` summed over vertices, and its summation-by-parts
    edge form ``sum_j nu_j psi(f_j - f_{j*}) (g_j - g_{j*})``."""
    f = as_dirichlet(tree, f)
    g = as_dirichlet(tree, g)
    omega = apply_omega_p(tree, p, f)
    vertex = -math.fsum(omega[1:] * g[1:])
    flux = edge_flux(tree, p, f)
    edge = math.fsum(flux[1:] * tree.increments(g)[1:])
    return Pairing(vertex, edge)
