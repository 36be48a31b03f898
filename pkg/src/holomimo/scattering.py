"""Angular scattering densities over the front hemisphere.

Two families are modeled. The isotropic density cos(theta)/(2*pi) spreads
power uniformly over the hemisphere. The clustered density is a mixture of
von Mises lobes in azimuth/elevation deviation around per-cluster nominal
angles, weighted by the antenna directivity pattern cos^a(phi) cos^b(theta)
and the cos(theta) solid-angle factor.

Von Mises factors exp(cos(2*x)/(4*sigma^2)) overflow float64 for angular
spreads below roughly 1.5 degrees, so every internal evaluation works with
the peak-referenced factor exp((cos(2*x) - 1)/(4*sigma^2)) instead, which
lies in (0, 1]. The common peak factor cancels between a cluster's mass and
the mixture normalization, so correlation builders never need it; only the
standalone normalization constant reintroduces it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .geometry import Direction

_HALF_PI = np.pi / 2


@dataclass(frozen=True)
class Cluster:
    """One scattering cluster: nominal arrival angles (radians) and relative power.

    A specular cluster concentrates its power exactly at the nominal angles
    (the zero-spread limit) instead of a von Mises lobe.
    """

    azimuth: float
    elevation: float
    power: float
    specular: bool = False

    def __post_init__(self) -> None:
        if not -_HALF_PI < self.azimuth < _HALF_PI:
            raise ValueError(f"cluster azimuth {self.azimuth!r} outside (-pi/2, pi/2)")
        if not -_HALF_PI < self.elevation < _HALF_PI:
            raise ValueError(f"cluster elevation {self.elevation!r} outside (-pi/2, pi/2)")
        if not self.power >= 0:
            raise ValueError(f"cluster power must be nonnegative, got {self.power}")


@dataclass(frozen=True)
class ScatteringConfig:
    """Clustered scattering model shared by all correlation builders.

    Parameters
    ----------
    clusters:
        Mixture components; at least one must carry positive power.
    sigma_azimuth, sigma_elevation:
        Angular spreads of the von Mises deviation lobes, in radians.
    directivity_a, directivity_b:
        Exponents of the antenna gain pattern cos^a(phi) cos^b(theta).
        Zero on both axes models isotropic elements.
    gain:
        Average channel gain beta; the matched correlation matrix has trace
        num_antennas * gain.
    """

    clusters: tuple[Cluster, ...]
    sigma_azimuth: float
    sigma_elevation: float
    directivity_a: float = 0.0
    directivity_b: float = 0.0
    gain: float = 1.0

    def __post_init__(self) -> None:
        if not self.clusters:
            raise ValueError("scattering config needs at least one cluster")
        if not any(c.power > 0 for c in self.clusters):
            raise ValueError("at least one cluster must have positive power")
        if not self.sigma_azimuth > 0:
            raise ValueError(f"sigma_azimuth must be positive, got {self.sigma_azimuth}")
        if not self.sigma_elevation > 0:
            raise ValueError(f"sigma_elevation must be positive, got {self.sigma_elevation}")
        if self.directivity_a < 0 or self.directivity_b < 0:
            raise ValueError("directivity exponents must be nonnegative")
        if not self.gain > 0:
            raise ValueError(f"gain must be positive, got {self.gain}")

    @property
    def has_specular(self) -> bool:
        return any(c.specular for c in self.clusters)


def isotropic_density(direction: Direction) -> float:
    """Isotropic scattering density cos(elevation)/(2*pi); integrates to one."""
    return math.cos(direction.elevation) / (2 * np.pi)


def _clamped_cos_power(angle: np.ndarray, exponent: float) -> np.ndarray:
    """cos(angle)**exponent with the cosine clamped at zero.

    At the hemisphere edge cos can round to a tiny negative, which a
    fractional exponent would turn into NaN.
    """
    c = np.maximum(np.cos(angle), 0.0)
    if exponent == 0.0:
        return np.ones_like(c)
    return c**exponent


def peak_relative_lobe(deviation: np.ndarray, sigma: float) -> np.ndarray:
    """Von Mises deviation factor referenced to its peak, exp((cos(2x) - 1)/(4 sigma^2))."""
    return np.exp((np.cos(2.0 * np.asarray(deviation, dtype=float)) - 1.0) / (4.0 * sigma**2))


def azimuth_profile(config: ScatteringConfig, n: int, deviation: np.ndarray) -> np.ndarray:
    """Azimuth factor of cluster n's density in peak-referenced form.

    Evaluates cos^a(azimuth_n + deviation) * exp((cos(2*deviation) - 1) /
    (4*sigma_azimuth^2)) elementwise; zero outside the hemisphere.
    """
    cluster = config.clusters[n]
    deviation = np.asarray(deviation, dtype=float)
    angle = cluster.azimuth + deviation
    inside = np.abs(angle) <= _HALF_PI
    value = _clamped_cos_power(angle, config.directivity_a)
    value = value * peak_relative_lobe(deviation, config.sigma_azimuth)
    return np.where(inside, value, 0.0)


def elevation_profile(config: ScatteringConfig, n: int, deviation: np.ndarray) -> np.ndarray:
    """Elevation factor of cluster n's density in peak-referenced form.

    Evaluates cos^(b+1)(elevation_n + deviation) * exp((cos(2*deviation) - 1) /
    (4*sigma_elevation^2)); the extra cosine power is the solid-angle factor.
    """
    cluster = config.clusters[n]
    deviation = np.asarray(deviation, dtype=float)
    angle = cluster.elevation + deviation
    inside = np.abs(angle) <= _HALF_PI
    value = _clamped_cos_power(angle, config.directivity_b + 1.0)
    value = value * peak_relative_lobe(deviation, config.sigma_elevation)
    return np.where(inside, value, 0.0)


def unnormalized_cluster_density(
    config: ScatteringConfig, n: int, deviation_azimuth: float, deviation_elevation: float
) -> float:
    """Cluster n's density at the given angular deviations, before normalization.

    This is the product of the two axis profiles times the shared peak factor
    exp(1/(4*sigma_azimuth^2) + 1/(4*sigma_elevation^2)); it overflows for
    spreads below roughly 1.5 degrees, in which case the peak-referenced
    profiles should be used directly. Specular clusters have no pointwise
    density (their mass is a point mass at zero deviation).
    """
    if config.clusters[n].specular:
        raise ValueError("specular clusters have no pointwise density")
    peak = math.exp(
        1.0 / (4.0 * config.sigma_azimuth**2) + 1.0 / (4.0 * config.sigma_elevation**2)
    )
    value = (
        config.clusters[n].power
        * azimuth_profile(config, n, deviation_azimuth)
        * elevation_profile(config, n, deviation_elevation)
    )
    return float(value) * peak


def deviation_window(
    nominal: float, sigma: float, support_radius: float | None
) -> tuple[float, float]:
    """Deviation interval over which a cluster axis profile is nonzero.

    The hemisphere limits the deviation to [-pi/2 - nominal, pi/2 - nominal];
    when `support_radius` is given the window is additionally truncated to
    +/- support_radius * sigma around the lobe peak, outside of which the
    peak-referenced factor is negligible for any support_radius >= 10.
    """
    lo = -_HALF_PI - nominal
    hi = _HALF_PI - nominal
    if support_radius is not None:
        lo = max(lo, -support_radius * sigma)
        hi = min(hi, support_radius * sigma)
    if not lo < hi:
        raise ValueError("empty deviation window; nominal angle sits on the hemisphere edge")
    return lo, hi


def _axis_reference_mass(
    config: ScatteringConfig, n: int, axis: str, support_radius: float | None = None
) -> float:
    """Adaptive-quadrature integral of one axis profile (peak-referenced)."""
    if axis == "azimuth":
        nominal, sigma = config.clusters[n].azimuth, config.sigma_azimuth
        profile = azimuth_profile
    else:
        nominal, sigma = config.clusters[n].elevation, config.sigma_elevation
        profile = elevation_profile
    lo, hi = deviation_window(nominal, sigma, support_radius)
    points = [0.0] if lo < 0.0 < hi else None
    value, _ = integrate.quad(
        lambda x: float(profile(config, n, x)),
        lo,
        hi,
        points=points,
        limit=400,
        epsabs=0.0,
        epsrel=1e-12,
    )
    return value


def _specular_width_factors(config: ScatteringConfig) -> tuple[float, float]:
    """Peak-referenced lobe areas shared by all specular point masses.

    A specular cluster is the zero-spread limit of a von Mises lobe, whose
    mass factorizes as (peak density) * (lobe area); mixing point masses with
    finite-spread clusters therefore weights each specular cluster by the
    same lobe-area factors a vanishing lobe would carry.
    """
    w_az, _ = integrate.quad(
        lambda x: float(peak_relative_lobe(x, config.sigma_azimuth)),
        -_HALF_PI,
        _HALF_PI,
        points=[0.0],
        limit=400,
        epsabs=0.0,
        epsrel=1e-12,
    )
    w_el, _ = integrate.quad(
        lambda x: float(peak_relative_lobe(x, config.sigma_elevation)),
        -_HALF_PI,
        _HALF_PI,
        points=[0.0],
        limit=400,
        epsabs=0.0,
        epsrel=1e-12,
    )
    return w_az, w_el


def cluster_reference_masses(config: ScatteringConfig) -> np.ndarray:
    """Peak-referenced mass of each cluster, shape (N,).

    Entry n is the cluster's contribution to the mixture integral divided by
    the shared peak factor exp(1/(4*sigma_azimuth^2) + 1/(4*sigma_elevation^2)).
    Computed with adaptive quadrature; serves as the accuracy reference for
    the fixed-node rules used by the correlation builders.
    """
    masses = np.zeros(len(config.clusters))
    specular_factors: tuple[float, float] | None = None
    for n, cluster in enumerate(config.clusters):
        if cluster.power == 0.0:
            continue
        if cluster.specular:
            if specular_factors is None:
                specular_factors = _specular_width_factors(config)
            masses[n] = (
                cluster.power
                * float(_clamped_cos_power(np.asarray(cluster.azimuth), config.directivity_a))
                * float(
                    _clamped_cos_power(np.asarray(cluster.elevation), config.directivity_b + 1.0)
                )
                * specular_factors[0]
                * specular_factors[1]
            )
        else:
            masses[n] = (
                cluster.power
                * _axis_reference_mass(config, n, "azimuth")
                * _axis_reference_mass(config, n, "elevation")
            )
    return masses


def normalization_constant(config: ScatteringConfig) -> float:
    """Constant scaling the cluster mixture to integrate to one.

    Underflows to zero for angular spreads below roughly 1.5 degrees because
    the constant has to cancel the astronomically large von Mises peak; the
    correlation builders work in peak-referenced form and never hit this.
    """
    log_peak = 1.0 / (4.0 * config.sigma_azimuth**2) + 1.0 / (4.0 * config.sigma_elevation**2)
    total = float(np.sum(cluster_reference_masses(config)))
    return math.exp(-(log_peak + math.log(total)))


def directivity_gain(direction: Direction, a: float = 0.0, b: float = 0.0) -> float:
    """Antenna gain cos^a(azimuth) cos^b(elevation), normalized to radiate 4*pi.

    The normalization makes the gain integrate to 4*pi against the
    solid-angle measure cos(elevation) over the front hemisphere, so a = b = 0
    gives the constant 2 (all power radiated forward).
    """
    if a < 0 or b < 0:
        raise ValueError("directivity exponents must be nonnegative")
    # Hemisphere integrals of cos^p are Wallis integrals sqrt(pi)*G((p+1)/2)/G(p/2+1).
    az_integral = math.sqrt(np.pi) * special.gamma((a + 1) / 2) / special.gamma(a / 2 + 1)
    el_integral = math.sqrt(np.pi) * special.gamma((b + 2) / 2) / special.gamma((b + 1) / 2 + 1)
    scale = 4 * np.pi / (az_integral * el_integral)
    return scale * float(
        _clamped_cos_power(np.asarray(direction.azimuth), a)
        * _clamped_cos_power(np.asarray(direction.elevation), b)
    )


def generate_clusters(
    count: int,
    power_decay: float,
    azimuth_range: tuple[float, float],
    elevation_range: tuple[float, float],
    rng: np.random.Generator,
) -> tuple[Cluster, ...]:
    """Draw a random cluster set with an exponential power profile.

    Cluster n (1-based) has power proportional to exp(-n / power_decay); the
    powers are normalized to sum to one. Nominal angles are uniform over the
    given (low, high) ranges in radians, which must lie strictly inside the
    front hemisphere.
    """
    if count < 1:
        raise ValueError(f"cluster count must be at least 1, got {count}")
    if not power_decay > 0:
        raise ValueError(f"power decay must be positive, got {power_decay}")
    for name, (lo, hi) in (("azimuth", azimuth_range), ("elevation", elevation_range)):
        if not (-_HALF_PI < lo <= hi < _HALF_PI):
            raise ValueError(f"{name} range {lo, hi} not inside (-pi/2, pi/2)")
    powers = np.exp(-np.arange(1, count + 1) / power_decay)
    powers /= powers.sum()
    azimuths = rng.uniform(azimuth_range[0], azimuth_range[1], size=count)
    elevations = rng.uniform(elevation_range[0], elevation_range[1], size=count)
    return tuple(
        Cluster(azimuth=float(az), elevation=float(el), power=float(p))
        for az, el, p in zip(azimuths, elevations, powers)
    )
