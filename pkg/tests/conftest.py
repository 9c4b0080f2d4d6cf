"""Shared builders for randomized disintegration tests."""

import numpy as np

from skewfiber.measures import AtomicMeasure
from skewfiber.symbolic import cylinder_mass_vector
from skewfiber.transfer import Disintegration


def random_fiber(rng, n_atoms=3, signed=True, total=None):
    pos = rng.random(n_atoms)
    w = rng.uniform(-1.0, 1.0, n_atoms) if signed else rng.uniform(0.1, 1.0, n_atoms)
    mu = AtomicMeasure(pos, w)
    if total is not None and mu.total_weight() != 0.0:
        mu = mu.scaled(total / mu.total_weight())
    return mu


def random_disintegration(matrix, depth, rng, n_atoms=3, signed=True, unit_mass=False):
    fibers = {}
    for w in matrix.words(depth):
        fibers[w] = random_fiber(rng, n_atoms, signed, total=1.0 if unit_mass else None)
    return Disintegration(matrix, depth, fibers)


def random_vanishing_disintegration(matrix, weights, depth, rng, n_atoms=2):
    """Random signed disintegration whose marginal has zero base mean."""
    fibers = {w: random_fiber(rng, n_atoms, signed=True) for w in matrix.words(depth)}
    dis = Disintegration(matrix, depth, fibers)
    masses = cylinder_mass_vector(weights, matrix, depth)
    mean = float(np.dot(masses, dis.fiber_masses()))
    # shift every fiber's first atom weight to cancel the mean exactly
    correction = AtomicMeasure([0.5], [-mean])
    first = matrix.words(depth)[0]
    scale = 1.0 / float(masses[matrix.word_index(depth)[first]])
    fibers[first] = AtomicMeasure(
        np.concatenate([fibers[first].positions, correction.positions]),
        np.concatenate([fibers[first].weights, correction.weights * scale]),
    )
    return Disintegration(matrix, depth, fibers)
