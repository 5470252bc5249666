import numpy as np
import pytest

from cavimag import MagnonMode, PhotonMode, PortCoupling, SystemSpec, TwoModeParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def single_mode_spec(freq=14.0, gamma0=0.002, gamma1=0.002, phase1=0.0):
    return SystemSpec(
        photon_modes=(
            PhotonMode(
                "c0", freq, (PortCoupling(gamma0, 0.0), PortCoupling(gamma1, phase1))
            ),
        ),
        n_ports=2,
    )


def photon_magnon_spec(freq=14.0, gamma=0.002, g=0.02, omega_m=14.0, magnon_loss=0.0):
    return SystemSpec(
        photon_modes=(
            PhotonMode(
                "c0", freq, (PortCoupling(gamma, 0.0), PortCoupling(gamma, 0.0)), (g,)
            ),
        ),
        magnon_modes=(MagnonMode("m", omega_m, magnon_loss),),
        n_ports=2,
    )


def random_two_mode_params(rng, phases=None, magnon_loss=0.0):
    """Random two-photon(+magnon) parameter set with phases in {0, pi}."""
    if phases is None:
        phases = rng.choice([0.0, np.pi], size=4)
    w0, w1 = np.sort(rng.uniform(10.0, 20.0, size=2))
    return TwoModeParams(
        omega0=float(w0),
        gamma00=float(10 ** rng.uniform(-4, -1)),
        gamma01=float(10 ** rng.uniform(-4, -1)),
        phi00=float(phases[0]),
        phi01=float(phases[1]),
        omega1=float(w1),
        gamma10=float(10 ** rng.uniform(-4, -1)),
        gamma11=float(10 ** rng.uniform(-4, -1)),
        phi10=float(phases[2]),
        phi11=float(phases[3]),
        g0=float(rng.uniform(0.0, 0.1)),
        g1=float(rng.uniform(0.0, 0.1)),
        omega_m=float(rng.uniform(10.0, 20.0)),
        magnon_loss=magnon_loss,
    )


def crosstalk_free_params(rng):
    """Random draw constrained so the inter-mode crosstalk vanishes exactly."""
    g00 = 10 ** rng.uniform(-4, -1)
    g01 = 10 ** rng.uniform(-4, -1)
    g10 = 10 ** rng.uniform(-4, -1)
    g11 = g00 * g10 / g01
    phi01 = float(rng.choice([0.0, np.pi]))
    phi10 = float(rng.choice([0.0, np.pi]))
    phi11 = (phi01 + phi10 + np.pi) % (2 * np.pi)
    w0, w1 = np.sort(rng.uniform(10.0, 20.0, size=2))
    return TwoModeParams(
        omega0=float(w0),
        gamma00=float(g00),
        gamma01=float(g01),
        phi00=0.0,
        phi01=phi01,
        omega1=float(w1),
        gamma10=float(g10),
        gamma11=float(g11),
        phi10=phi10,
        phi11=phi11,
        g0=float(rng.uniform(0.0, 0.1)),
        g1=float(rng.uniform(0.0, 0.1)),
        omega_m=float(rng.uniform(10.0, 20.0)),
    )
