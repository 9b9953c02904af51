"""Reference plants used by the demos, the CLI and the tests."""

import numpy as np

from .lti import StateSpace


def case1_plant():
    """``G(z) = (z - 1.5)(z - 0.5) / z^2`` in controllable canonical form.

    Impulse response ``1, -2, 0.75, 0, ...``; one MP zero and one NMP zero.
    """
    return StateSpace([[0.0, 0.0], [1.0, 0.0]], [[1.0], [0.0]], [[-2.0, 0.75]], [[1.0]])


def case3_plant():
    """Four-state, two-input, two-output plant with zeros 0.6072 and 1.9928."""
    A = [[0.6, -0.3, 0.0, 0.0],
         [0.1, 1.0, 0.0, 0.0],
         [-0.4, -1.5, 0.4, -0.3],
         [0.3, 1.1, 0.2, 0.9]]
    B = [[0.0, 0.4], [0.0, 0.0], [0.0, -0.1], [0.1, 0.1]]
    C = [[1.0, 2.0, 3.0, 4.0], [2.0, 1.0, 5.0, 6.0]]
    return StateSpace(A, B, C, np.zeros((2, 2)))


CASE4_ZEROS = (-1.0, -3.0, -0.5, 0.5)
CASE4_POLES = (0.0, 0.0, 0.5 + 0.5j, 0.5 - 0.5j)


def case4_plant():
    """``G(z) = (z+1)(z+3)(z+0.5)(z-0.5) / (z^2 (z^2 - z + 0.5))``."""
    return StateSpace.from_zpk(CASE4_ZEROS, CASE4_POLES, 1.0)


def random_input(n_steps, m=1, seed=0, scale=1.0):
    """Seeded standard-normal input, shape ``(n_steps, m)``."""
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal((n_steps, m))


def square_wave_mix(n_steps):
    """Periodic non-smooth trajectory (period 250): sine plus square wave."""
    k = np.arange(n_steps)
    return np.sin(2 * np.pi * k / 50) + 0.5 * np.sign(np.sin(2 * np.pi * k / 125 + 0.1))


def smooth_trajectory(n_steps, ts=1e-4):
    """``t^2 sin(5 pi t)`` sampled at ``t = k ts``."""
    t = np.arange(n_steps) * ts
    return t ** 2 * np.sin(5 * np.pi * t)


def burn_in(design):
    """Transient cut ``5 n / (1 - rho(A_hat))``, rounded up."""
    rho = float(np.max(np.abs(np.linalg.eigvals(design.gains.A_hat)))) if design.gains.q else 0.0
    return int(np.ceil(5 * design.n / (1.0 - rho)))
