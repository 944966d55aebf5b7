"""Central finite differences, with optional Richardson refinement.

Used both as a derivative engine (supcode residuals) and as a test oracle
for analytic gradients (network back-propagation).
"""

import logging
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


def central_difference(func: Callable[[float], np.ndarray],
                       step: float) -> np.ndarray:
    """(f(+h) - f(-h)) / 2h for a function of one scalar offset."""
    return (np.asarray(func(step)) - np.asarray(func(-step))) / (2 * step)


def richardson_derivative(func: Callable[[float], np.ndarray],
                          step: float = 1e-6) -> np.ndarray:
    """Derivative at zero offset with one Richardson refinement.

    Combines central differences at `step` and `step / 2` so the leading
    O(h^2) truncation term cancels: (4 D(h/2) - D(h)) / 3.
    """
    coarse = central_difference(func, step)
    fine = central_difference(func, step / 2)
    return (4 * fine - coarse) / 3


def convergence_order(func: Callable[[float], np.ndarray],
                      exact: np.ndarray,
                      step: float = 1e-3) -> float:
    """Observed order of the plain central difference under step halving.

    Should be close to 2 for a smooth function, as long as `step` is large
    enough that round-off does not dominate.
    """
    err_h = np.max(np.abs(central_difference(func, step) - exact))
    err_half = np.max(np.abs(central_difference(func, step / 2) - exact))
    order = float(np.log2(err_h / err_half))
    logger.debug("Step-halving errors %.3e -> %.3e (order %.2f)", err_h,
                 err_half, order)
    return order


def gradient(func: Callable[[np.ndarray], float],
             x: np.ndarray,
             step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array.

    `x` may have any shape; the gradient has the same shape. `x` is not
    modified.
    """
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat_x.size):
        original = flat_x[i]
        flat_x[i] = original + step
        f_plus = func(x)
        flat_x[i] = original - step
        f_minus = func(x)
        flat_x[i] = original
        flat_grad[i] = (f_plus - f_minus) / (2 * step)
    return grad
