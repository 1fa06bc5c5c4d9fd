"""Frequency-dependent material physics for building interactions.

Material properties follow the ITU power-law parameterization
(eps_r' = a * f_GHz^b, sigma = c * f_GHz^d S/m); the default table is seeded
from ITU-R P.2040-1 and ships as an editable JSON file (data/materials.json).
Slab transmission loss uses the lossy-dielectric single-pass attenuation

    PL_T = 12.27 * pi * f * t * sqrt(mu0*eps0*eps_r')
           * (sqrt(1 + (sigma / (2*pi*f*eps0*eps_r'))^2) - 1)^0.5   [dB]

summed per layer in dB (internal multiple reflections are not modeled).
Reflection magnitude comes from the Fresnel coefficient of an equivalent
half-space with complex permittivity eps_r' - j*sigma/(2*pi*f*eps0).
Edge diffraction excess loss is a configurable scalar
L0 + 10*gamma*log10(f/f0) on top of the free-space loss of the full
two-leg path.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from importlib import resources

from .constants import (
    SPEED_OF_LIGHT,
    VACUUM_PERMEABILITY,
    VACUUM_PERMITTIVITY,
)

__all__ = [
    "Material",
    "SlabLayer",
    "SlabSpec",
    "Band",
    "DiffractionLossModel",
    "MaterialLibrary",
    "permittivity",
    "conductivity",
    "complex_permittivity",
    "transmission_loss_db",
    "free_space_path_loss_db",
    "reflection_loss_db",
    "diffraction_loss_db",
    "load_material_library",
    "default_material_library",
]


@dataclass(frozen=True)
class Material:
    """ITU power-law fit parameters for one building material."""

    name: str
    a: float  # permittivity coefficient
    b: float  # permittivity frequency exponent
    c: float  # conductivity coefficient (S/m at 1 GHz)
    d: float  # conductivity frequency exponent

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError(f"material {self.name!r}: permittivity coefficient a must be > 0")
        if self.c < 0:
            raise ValueError(f"material {self.name!r}: conductivity coefficient c must be >= 0")


@dataclass(frozen=True)
class SlabLayer:
    material: Material
    thickness_m: float

    def __post_init__(self) -> None:
        if not self.thickness_m > 0:
            raise ValueError("layer thickness must be positive")


@dataclass(frozen=True)
class SlabSpec:
    """Ordered layer stack of one wall/floor construction."""

    name: str
    layers: tuple[SlabLayer, ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError(f"slab {self.name!r} has no layers")

    @property
    def facing_material(self) -> Material:
        return self.layers[0].material


@dataclass(frozen=True)
class Band:
    """Radio parameters of one operating band."""

    label: str
    center_frequency_hz: float
    bandwidth_hz: float
    tx_power_dbm: float
    rx_processing_gain_db: float = 0.0

    def __post_init__(self) -> None:
        if not self.center_frequency_hz > 0:
            raise ValueError("center frequency must be positive")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class DiffractionLossModel:
    """Scalar excess loss for edge diffraction: l0 + 10*gamma*log10(f/f0)."""

    l0_db: float = 15.0
    gamma: float = 0.0
    f0_hz: float = 1e9


def permittivity(material: Material, f_hz: float) -> float:
    """Real relative permittivity eps_r' = a * f_GHz^b."""
    if not f_hz > 0:
        raise ValueError("frequency must be positive")
    return material.a * (f_hz / 1e9) ** material.b


def conductivity(material: Material, f_hz: float) -> float:
    """Electrical conductivity sigma = c * f_GHz^d in S/m."""
    if not f_hz > 0:
        raise ValueError("frequency must be positive")
    return material.c * (f_hz / 1e9) ** material.d


def complex_permittivity(material: Material, f_hz: float) -> complex:
    """Relative complex permittivity eps_r' - j*sigma/(2*pi*f*eps0)."""
    eps = permittivity(material, f_hz)
    sig = conductivity(material, f_hz)
    return eps - 1j * sig / (2.0 * math.pi * f_hz * VACUUM_PERMITTIVITY)


def _layer_transmission_loss_db(material: Material, thickness_m: float, f_hz: float) -> float:
    eps = permittivity(material, f_hz)
    sig = conductivity(material, f_hz)
    loss_tangent = sig / (2.0 * math.pi * f_hz * VACUUM_PERMITTIVITY * eps)
    attenuation = (math.sqrt(1.0 + loss_tangent ** 2) - 1.0) ** 0.5
    return (
        12.27 * math.pi * f_hz * thickness_m
        * math.sqrt(VACUUM_PERMEABILITY * VACUUM_PERMITTIVITY * eps)
        * attenuation
    )


def transmission_loss_db(slab: SlabSpec, f_hz: float) -> float:
    """Total single-pass transmission loss of the layer stack, in dB.

    Lossless layers (sigma = 0, e.g. air gaps) contribute exactly zero.
    """
    if not f_hz > 0:
        raise ValueError("frequency must be positive")
    return sum(
        _layer_transmission_loss_db(layer.material, layer.thickness_m, f_hz)
        for layer in slab.layers
    )


def free_space_path_loss_db(distance_m: float, f_hz: float) -> float:
    """Friis free-space loss 20*log10(4*pi*d*f/c) in dB."""
    if not distance_m > 0:
        raise ValueError("distance must be positive")
    if not f_hz > 0:
        raise ValueError("frequency must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * f_hz / SPEED_OF_LIGHT)


def reflection_loss_db(
    slab: SlabSpec,
    f_hz: float,
    incidence_angle_rad: float,
    polarization: str = "TE",
) -> float:
    """Reflection loss -20*log10(|Gamma|) off the slab's facing material.

    The slab is treated as an equivalent lossy half-space; the incidence
    angle is measured from the surface normal and must lie in [0, pi/2).
    Index-matched materials reflect nothing: the loss is +inf and no
    reflected path should be generated.
    """
    if not 0.0 <= incidence_angle_rad < math.pi / 2.0:
        raise ValueError("incidence angle must lie in [0, pi/2)")
    if polarization not in ("TE", "TM"):
        raise ValueError(f"unknown polarization {polarization!r}")

    eps = complex_permittivity(slab.facing_material, f_hz)
    cos_i = math.cos(incidence_angle_rad)
    sin_i = math.sin(incidence_angle_rad)
    transmitted = cmath.sqrt(eps - sin_i ** 2)
    if polarization == "TE":
        gamma = (cos_i - transmitted) / (cos_i + transmitted)
    else:
        gamma = (eps * cos_i - transmitted) / (eps * cos_i + transmitted)
    magnitude = abs(gamma)
    if magnitude == 0.0:
        return math.inf
    return -20.0 * math.log10(magnitude)


def diffraction_loss_db(model: DiffractionLossModel, f_hz: float) -> float:
    """Excess diffraction loss in dB (applied on top of two-leg Friis loss)."""
    if not f_hz > 0:
        raise ValueError("frequency must be positive")
    return model.l0_db + 10.0 * model.gamma * math.log10(f_hz / model.f0_hz)


# ---------------------------------------------------------------------------
# Material configuration file
# ---------------------------------------------------------------------------

class MaterialLibrary:
    """Materials and named slab stacks loaded from a JSON config file."""

    def __init__(self, materials: dict[str, Material], slabs: dict[str, SlabSpec]):
        self.materials = dict(materials)
        self.slabs = dict(slabs)

    def material(self, name: str) -> Material:
        try:
            return self.materials[name]
        except KeyError:
            raise KeyError(f"unknown material {name!r}; have {sorted(self.materials)}") from None

    def slab(self, name: str) -> SlabSpec:
        try:
            return self.slabs[name]
        except KeyError:
            raise KeyError(f"unknown slab {name!r}; have {sorted(self.slabs)}") from None


def _library_from_dict(doc: dict) -> MaterialLibrary:
    if doc.get("schema") != "materials/1":
        raise ValueError(f"unsupported materials schema: {doc.get('schema')!r}")
    materials = {
        name: Material(name=name, a=entry["a"], b=entry["b"], c=entry["c"], d=entry["d"])
        for name, entry in doc["materials"].items()
    }
    slabs = {}
    for name, layers in doc.get("slabs", {}).items():
        slabs[name] = SlabSpec(
            name=name,
            layers=tuple(
                SlabLayer(material=materials[mat_name], thickness_m=float(thickness))
                for mat_name, thickness in layers
            ),
        )
    return MaterialLibrary(materials, slabs)


def load_material_library(path) -> MaterialLibrary:
    """Load a material/slab table from a JSON file (schema "materials/1")."""
    with open(path, "r", encoding="utf-8") as fh:
        return _library_from_dict(json.load(fh))


def default_material_library() -> MaterialLibrary:
    """The packaged default table (ITU-seeded values; user-overridable)."""
    doc = json.loads(
        resources.files("diffpos").joinpath("data/materials.json").read_text(encoding="utf-8")
    )
    return _library_from_dict(doc)
