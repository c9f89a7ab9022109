import numpy as np

from atomreg.atoms import Atom, Pattern


def draw_atom(gen, tau_scale=2.0, sigma_lo=0.3, sigma_hi=2.0):
    """One random atom with the usual experiment parameter ranges."""
    return Atom(
        float(gen.uniform(-1.0, 1.0)),
        float(gen.uniform(0.0, np.pi)),
        tuple(gen.uniform(-tau_scale, tau_scale, 2)),
        tuple(gen.uniform(sigma_lo, sigma_hi, 2)),
    )


def draw_pattern(gen, n_atoms, **kwargs):
    return Pattern(tuple(draw_atom(gen, **kwargs) for _ in range(n_atoms)))
