import numpy as np
import pytest


def random_stable_theta(rng: np.random.Generator, d: int, max_modulus: float = 0.95) -> np.ndarray:
    """Coefficients whose characteristic roots all lie strictly inside the unit disk.

    Roots are drawn as real values or conjugate pairs, so theta is real.
    """
    roots = []
    while len(roots) < d:
        if d - len(roots) >= 2 and rng.random() < 0.5:
            r = max_modulus * np.sqrt(rng.random())
            phi = rng.uniform(0, np.pi)
            roots += [r * np.exp(1j * phi), r * np.exp(-1j * phi)]
        else:
            roots.append(rng.uniform(-max_modulus, max_modulus))
    coeffs = np.real(np.poly(roots))
    return -coeffs[1:]


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240607)
