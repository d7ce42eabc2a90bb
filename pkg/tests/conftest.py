import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from capsule_bim import InterfaceState, ShapeSpec, get_grid, idft, resample_equal_arclength

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_band_limited(n: int, rng: np.random.Generator, decay: float = 0.0, complex_out=False):
    """Random sequence with zero mean and zero Nyquist mode."""
    grid = get_grid(n)
    k = grid.band
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    c *= np.exp(-decay * np.abs(k))
    c[k == 0] = 0.0
    c[k == n // 2] = 0.0
    if not complex_out:
        # hermitian symmetry for a real sequence
        full = dict(zip(k, c))
        c = np.array([full[kk] if kk > 0 else (np.conj(full[-kk]) if kk < 0 else 0.0) for kk in k])
        return idft(c).real
    return idft(c)


def smooth_state(n: int, seed: int = 0, amp: float = 0.15, hookean_map: bool = True) -> InterfaceState:
    """Equal-arclength state of a random smooth star-shaped curve.

    The backward map gets a small smooth periodic part so that Hookean
    tension is not uniform.
    """
    rng = np.random.default_rng(seed)
    modes = tuple((k, amp * rng.standard_normal() / k**2, amp * rng.standard_normal() / k**2) for k in range(2, 6))
    st = resample_equal_arclength(ShapeSpec(kind="fourier", modes=modes), n)
    if hookean_map:
        x = st.grid.nodes
        a = 0.05 * np.sin(x + rng.uniform(0, 2 * np.pi)) + 0.02 * np.cos(2 * x)
        st = st.replace(alpha0=a)
    return st


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
