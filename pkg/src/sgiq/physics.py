"""Closed-form channel math: transmissivity, capacity, purification and noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, NonPhysical, Unreachable

DEFAULT_TARGET_FIDELITY = 0.99
MAX_PURIFICATION_ROUNDS = 64


@dataclass(frozen=True)
class OpticalParams:
    """Geometry and optics of a single satellite-to-ground downlink.

    All lengths are in meters and the extinction coefficient is per meter.
    """

    transmitter_diameter_m: float
    receiver_diameter_m: float
    wavelength_m: float
    extinction_coeff_per_m: float
    free_space_distance_m: float
    atmosphere_depth_m: float

    def __post_init__(self) -> None:
        for name in (
            "transmitter_diameter_m",
            "receiver_diameter_m",
            "wavelength_m",
            "free_space_distance_m",
            "atmosphere_depth_m",
        ):
            if not getattr(self, name) > 0:
                raise NonPhysical(f"{name} must be strictly positive")
        # zero extinction is the vacuum limit and is accepted
        if not self.extinction_coeff_per_m >= 0:
            raise NonPhysical("extinction_coeff_per_m must be non-negative")
        if self.atmosphere_depth_m > self.free_space_distance_m:
            raise NonPhysical("atmosphere_depth_m exceeds free_space_distance_m")


def transmissivity(p: OpticalParams) -> float:
    """Far-field transmissivity of a free-space optical channel.

    Ratio of the transmitter and receiver aperture areas to the squared
    diffraction spread, attenuated exponentially through the atmosphere.

    Raises:
        NonPhysical: if the geometry yields a value of 1 or more, where the
            far-field approximation no longer holds.
    """
    area_t = math.pi * (p.transmitter_diameter_m / 2.0) ** 2
    area_r = math.pi * (p.receiver_diameter_m / 2.0) ** 2
    spread = (p.wavelength_m * p.free_space_distance_m) ** 2
    eta = area_t * area_r / spread * math.exp(-p.extinction_coeff_per_m * p.atmosphere_depth_m)
    if eta >= 1.0:
        raise NonPhysical(f"transmissivity {eta!r} >= 1; far-field model invalid")
    return eta


def channel_capacity(eta: float) -> float:
    """Capacity ``-log2(1 - eta)`` of a lossy channel with transmissivity ``eta``."""
    if not 0.0 < eta < 1.0:
        raise DomainError(f"transmissivity must lie in (0, 1), got {eta!r}")
    return -math.log2(1.0 - eta)


def _check_fidelity(value: float, name: str) -> None:
    if not 0.0 < value <= 1.0:
        raise DomainError(f"{name} must lie in (0, 1], got {value!r}")


def purify(rho1: float, rho2: float) -> float:
    """Fidelity after one pairwise purification of two entangled pairs."""
    _check_fidelity(rho1, "rho1")
    _check_fidelity(rho2, "rho2")
    both = rho1 * rho2
    denom = both + (1.0 - rho1) * (1.0 - rho2)
    if denom == 0.0:
        raise DomainError("purification denominator vanished")
    return both / denom


def noise_of(fidelity: float) -> float:
    """Additive noise ``ln(1/fidelity)``; zero for a perfect link."""
    _check_fidelity(fidelity, "fidelity")
    return -math.log(fidelity)


def purified_fidelity(gamma: float, rounds: int) -> float:
    """Fidelity of a pair at ``gamma`` after ``rounds`` purifications with fresh copies at ``gamma``."""
    if rounds < 0:
        raise DomainError("rounds must be non-negative")
    rho = gamma
    for _ in range(rounds):
        rho = purify(rho, gamma)
    return rho


def purification_count(gamma: float, target: float = DEFAULT_TARGET_FIDELITY) -> int:
    """Smallest number of purifications lifting ``gamma`` to at least ``target``.

    Each round consumes a fresh pair at the edge's base fidelity ``gamma``.

    Raises:
        Unreachable: if ``MAX_PURIFICATION_ROUNDS`` rounds do not suffice
            (always the case for ``gamma <= 0.5``).
    """
    _check_fidelity(gamma, "gamma")
    _check_fidelity(target, "target")
    rho = gamma
    for k in range(MAX_PURIFICATION_ROUNDS + 1):
        if rho >= target:
            return k
        rho = purify(rho, gamma)
    raise Unreachable(
        f"fidelity {gamma!r} cannot reach {target!r} within {MAX_PURIFICATION_ROUNDS} rounds"
    )


def purification_effect(mu: float, kappa: int) -> float:
    """Noise removed by one purification when ``kappa`` of them clear ``mu``."""
    if kappa < 1:
        raise DomainError("kappa must be at least 1")
    if mu < 0:
        raise DomainError("noise must be non-negative")
    return mu / kappa
