"""Network geometry and channel sampling.

A source S talks to a destination D through two half-duplex relays R1, R2
that transmit in alternating slots, each assisted by a reconfigurable
surface (I1 near R1, I2 near R2) with M passive elements apiece.  All
surface-related links are Rician with distance-dependent line-of-sight and
scattered components; the direct S-R1 and R2-D links are Rayleigh.  The
inter-relay link R2-R1 is Rician by default and can be switched to
Rayleigh for the no-surface baseline.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np


class ConfigError(ValueError):
    """Invalid scenario or sweep configuration."""


NODE_IDS = ("S", "D", "R1", "R2", "I1", "I2")

# Links the signal model actually uses; every one must have positive length.
MODELED_LINKS = (
    ("S", "R1"), ("R2", "R1"), ("R2", "D"),
    ("S", "I1"), ("S", "I2"), ("I1", "R1"), ("I2", "R1"),
    ("R2", "I1"), ("R2", "I2"), ("I1", "D"), ("I2", "D"),
)

_DEFAULT_COORDS = {
    "S": (0.0, 0.0),
    "D": (100.0, 0.0),
    "R1": (50.0, 25.0),
    "R2": (50.0, -25.0),
    "I1": (50.0, 30.0),
    "I2": (50.0, -30.0),
}


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


@dataclass
class Scenario:
    """Static system parameters for one simulated deployment.

    k_r is the Rician K-factor in linear scale; config files carry it in dB
    and convert at the boundary.  p is the total transmit power budget and
    power_split the fraction assigned to the source (the rest goes to R2),
    so the default split gives p_s = p_r2 = p/2.
    """

    M: int = 32
    p: float = 1.0
    power_split: float = 0.5
    sigma2: float = 1.0
    k_r: float = db_to_linear(5.0)
    alpha_los: float = 2.3
    alpha_nlos: float = 3.5
    iri_fading: str = "rician"
    coords: dict = field(default_factory=lambda: dict(_DEFAULT_COORDS))

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError("M: must be an integer >= 1")
        self.M = int(self.M)
        if not (self.p > 0):
            raise ConfigError("p: must be > 0")
        if not (0.0 < self.power_split < 1.0):
            raise ConfigError("power_split: must be in (0, 1)")
        if not (self.sigma2 > 0):
            raise ConfigError("sigma2: must be > 0")
        if not (self.k_r >= 0):
            raise ConfigError("k_r: must be >= 0")
        if not (self.alpha_los > 0 and self.alpha_nlos > 0):
            raise ConfigError("alpha_los/alpha_nlos: must be > 0")
        if self.iri_fading not in ("rician", "rayleigh"):
            raise ConfigError("iri_fading: must be 'rician' or 'rayleigh'")
        missing = [n for n in NODE_IDS if n not in self.coords]
        if missing:
            raise ConfigError(f"coords: missing node(s) {missing}")
        for name, xy in self.coords.items():
            if len(xy) != 2 or not all(math.isfinite(float(c)) for c in xy):
                raise ConfigError(f"coords.{name}: must be a finite (x, y) pair")
        for a, b in MODELED_LINKS:
            if link_distance(self, a, b) <= 0.0:
                raise ConfigError(f"coords: nodes {a} and {b} coincide but are linked")

    @property
    def p_s(self):
        return self.power_split * self.p

    @property
    def p_r2(self):
        return (1.0 - self.power_split) * self.p

    def with_snr_db(self, snr_db):
        """Copy with total power set so that p / sigma2 equals the given SNR."""
        return replace(self, p=self.sigma2 * db_to_linear(snr_db))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "k_r_db" in d:
            if "k_r" in d:
                raise ConfigError("scenario: give k_r_db or k_r, not both")
            d["k_r"] = db_to_linear(float(d.pop("k_r_db")))
        if "coords" in d:
            d["coords"] = {k: tuple(float(c) for c in v) for k, v in d["coords"].items()}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"scenario: unknown field(s) {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return {
            "M": self.M,
            "p": self.p,
            "power_split": self.power_split,
            "sigma2": self.sigma2,
            "k_r_db": 10.0 * math.log10(self.k_r) if self.k_r > 0 else -math.inf,
            "alpha_los": self.alpha_los,
            "alpha_nlos": self.alpha_nlos,
            "iri_fading": self.iri_fading,
            "coords": {k: list(v) for k, v in self.coords.items()},
        }


def link_distance(scenario, a, b):
    """Euclidean distance between two nodes of the scenario."""
    for n in (a, b):
        if n not in scenario.coords:
            raise ConfigError(f"unknown node id {n!r}")
    (xa, ya), (xb, yb) = scenario.coords[a], scenario.coords[b]
    return math.hypot(xa - xb, ya - yb)


def sample_rician_vector(d, m_elements, k_r, alphas, rng):
    """Draw one Rician-faded M-element channel vector.

    Parameters
    ----------
    d : float
        Link distance, must be positive.
    m_elements : int
        Number of elements.
    k_r : float
        K-factor in linear scale; np.inf gives the pure line-of-sight limit.
    alphas : (float, float)
        Path loss exponents (line-of-sight, scattered).
    rng : np.random.Generator

    The line-of-sight part has per-element magnitude d**(-alpha_los/2) with
    an independent uniform phase per element per call; the scattered part is
    circularly-symmetric Gaussian with per-element variance d**(-alpha_nlos).
    """
    if not (d > 0):
        raise ValueError("d: must be > 0")
    a_los, a_nlos = alphas
    phases = rng.uniform(0.0, 2.0 * np.pi, size=m_elements)
    h_los = d ** (-a_los / 2.0) * np.exp(1j * phases)
    scale = d ** (-a_nlos / 2.0) / np.sqrt(2.0)
    h_nlos = scale * (rng.standard_normal(m_elements) + 1j * rng.standard_normal(m_elements))
    if np.isinf(k_r):
        return h_los
    return np.sqrt(k_r / (k_r + 1.0)) * h_los + np.sqrt(1.0 / (1.0 + k_r)) * h_nlos


def sample_rayleigh_scalar(d, alpha_nlos, rng):
    """Draw one Rayleigh-faded scalar channel with variance d**(-alpha_nlos)."""
    if not (d > 0):
        raise ValueError("d: must be > 0")
    scale = d ** (-alpha_nlos / 2.0) / np.sqrt(2.0)
    re, im = rng.standard_normal(2)
    return complex(scale * re, scale * im)


@dataclass
class ChannelRealization:
    """One draw of every modeled channel.

    Scalars: h_sr1 (S to R1), h_r2r1 (inter-relay), h_r2d (R2 to D).
    Vectors, one per surface and hop: h_si1/h_si2 (S to surface),
    h_i1r1/h_i2r1 (surface to R1), h_r2i1/h_r2i2 (R2 to surface),
    h_i1d/h_i2d (surface to D).  Stacked views concatenate surface 1 then
    surface 2, giving vectors of length 2M indexed like the phase vector.
    """

    h_sr1: complex
    h_r2r1: complex
    h_r2d: complex
    h_si1: np.ndarray
    h_si2: np.ndarray
    h_i1r1: np.ndarray
    h_i2r1: np.ndarray
    h_r2i1: np.ndarray
    h_r2i2: np.ndarray
    h_i1d: np.ndarray
    h_i2d: np.ndarray

    def __post_init__(self):
        m = len(self.h_si1)
        vecs = (self.h_si2, self.h_i1r1, self.h_i2r1, self.h_r2i1,
                self.h_r2i2, self.h_i1d, self.h_i2d)
        if any(len(v) != m for v in vecs):
            raise ValueError("per-surface vectors must share one length M")

    @property
    def M(self):
        return len(self.h_si1)

    @property
    def h_si(self):
        return np.concatenate([self.h_si1, self.h_si2])

    @property
    def h_ir1(self):
        return np.concatenate([self.h_i1r1, self.h_i2r1])

    @property
    def h_r2i(self):
        return np.concatenate([self.h_r2i1, self.h_r2i2])

    @property
    def h_id(self):
        return np.concatenate([self.h_i1d, self.h_i2d])


def sample_realization(scenario, rng):
    """Draw a full channel realization for the scenario.

    Draw order is fixed (surface links, then direct links, then the
    inter-relay link), so a given (scenario, seed) pair always yields the
    same realization.
    """
    alphas = (scenario.alpha_los, scenario.alpha_nlos)

    def rice(a, b):
        return sample_rician_vector(link_distance(scenario, a, b),
                                    scenario.M, scenario.k_r, alphas, rng)

    h_si1 = rice("S", "I1")
    h_si2 = rice("S", "I2")
    h_i1r1 = rice("I1", "R1")
    h_i2r1 = rice("I2", "R1")
    h_r2i1 = rice("R2", "I1")
    h_r2i2 = rice("R2", "I2")
    h_i1d = rice("I1", "D")
    h_i2d = rice("I2", "D")
    h_sr1 = sample_rayleigh_scalar(link_distance(scenario, "S", "R1"),
                                   scenario.alpha_nlos, rng)
    h_r2d = sample_rayleigh_scalar(link_distance(scenario, "R2", "D"),
                                   scenario.alpha_nlos, rng)
    d_iri = link_distance(scenario, "R2", "R1")
    if scenario.iri_fading == "rician":
        h_r2r1 = complex(sample_rician_vector(d_iri, 1, scenario.k_r, alphas, rng)[0])
    else:
        h_r2r1 = sample_rayleigh_scalar(d_iri, scenario.alpha_nlos, rng)
    return ChannelRealization(
        h_sr1=h_sr1, h_r2r1=h_r2r1, h_r2d=h_r2d,
        h_si1=h_si1, h_si2=h_si2, h_i1r1=h_i1r1, h_i2r1=h_i2r1,
        h_r2i1=h_r2i1, h_r2i2=h_r2i2, h_i1d=h_i1d, h_i2d=h_i2d,
    )
