"""Named analytic forcing fixtures for the fluid body force f and the shell load g."""

from dataclasses import dataclass

import numpy as np
from scipy.special import i0e

from .errors import ConfigError

KINDS = ("zero", "constant", "pulse", "wave")
SHAPES = ("cos", "bump")


@dataclass(frozen=True)
class Fixture:
    """Spatial profile times a time profile.

    The profile is ``cos(k (x - c t))`` or, for ``shape = bump``, the
    zero-mean concentrated peak ``exp(k (cos(x - c t) - 1)) - I0(k) e^-k``
    centred at the origin.  ``constant`` holds the amplitude fixed in time, ``pulse`` multiplies by
    ``exp(-((t - t0) / width)^2)`` and ``wave`` travels with speed ``c``.
    For the fluid force, ``component`` picks the direction (x or z).
    """

    kind: str = "zero"
    amplitude: float = 0.0
    wavenumber: int = 1
    speed: float = 0.0
    t0: float = 0.0
    width: float = 1.0
    component: str = "z"
    shape: str = "cos"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown forcing shape '{self.shape}'", key="shape")
        if self.kind not in KINDS:
            raise ConfigError(f"unknown forcing kind '{self.kind}'", key="kind")
        if self.component not in ("x", "z"):
            raise ConfigError("component must be 'x' or 'z'", key="component")
        if self.kind == "pulse" and not self.width > 0:
            raise ConfigError("pulse width must be positive", key="width")

    @property
    def is_zero(self):
        return self.kind == "zero" or self.amplitude == 0.0

    def time_profile(self, t):
        if self.is_zero:
            return 0.0
        if self.kind == "pulse":
            return self.amplitude * float(np.exp(-(((t - self.t0) / self.width) ** 2)))
        return self.amplitude

    def spatial(self, t, x):
        shift = self.speed * t if self.kind == "wave" else 0.0
        x = np.asarray(x) - shift
        if self.shape == "bump":
            k = float(self.wavenumber)
            return np.exp(k * (np.cos(x) - 1.0)) - i0e(k)
        return np.cos(self.wavenumber * x)

    def shell(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        return self.time_profile(t) * self.spatial(t, x)

    def fluid(self, t, x, z):
        x = np.asarray(x, dtype=float)
        out = np.zeros((2,) + x.shape)
        if self.is_zero:
            return out
        out[0 if self.component == "x" else 1] = self.time_profile(t) * self.spatial(t, x)
        return out

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


ZERO = Fixture()
