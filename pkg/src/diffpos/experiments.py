"""Scenario construction, frequency sweeps, and plot-ready exports.

The default scene is a seven-floor concrete building with drywall interior
partitions, window rows on both long facades, four UAV anchors hovering
outside at low height, and a receiver grid on the upper floors. The sweep
walks a frequency ladder; per (frequency, anchor, receiver) it synthesizes
the PDP, keeps the strongest 25 components, selects the first arriving path,
and aggregates FAP group statistics, SNR quartiles, and 3D error samples for
the two estimators next to the position error bound.

Everything is deterministic under a fixed seed: per-trial noise generators
are derived from (seed, frequency index, receiver index, trial).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import (
    BandPlan,
    InteriorWall,
    MpcGroup,
    PathLimits,
    Pdp,
    RadioConfig,
    SceneConfig,
    SceneGeometry,
    WindowRect,
    build_scene_geometry,
    enumerate_mpcs,
    receiver_grid,
    truncate_top_k,
)
from .fap import (
    NoDetectionError,
    mean_squared_bandwidth,
    range_sigma_m,
    select_fap,
)
from .geometry import Point3, WindowEdge
from .materials import (
    DiffractionLossModel,
    Material,
    SlabLayer,
    SlabSpec,
    default_material_library,
)
from .positioning import (
    MeasurementSet,
    SingularGeometryError,
    SolverDivergedError,
    dnls_solve,
    initial_guess,
    lls_solve,
    peb,
)

__all__ = [
    "DEFAULT_FREQUENCY_LADDER_HZ",
    "SweepConfig",
    "FrequencyReport",
    "SweepReport",
    "build_default_scene",
    "p_fap_stats",
    "run_sweep",
    "export_report",
    "scene_to_dict",
    "scene_from_dict",
    "save_scene",
    "load_scene",
    "report_to_dict",
    "report_from_dict",
]

# Representative points in FR1, FR3, and FR2 (band edges are config, and the
# ladder is overridable per sweep).
DEFAULT_FREQUENCY_LADDER_HZ = (0.7e9, 3.5e9, 5.8e9, 10e9, 15e9, 28e9, 39e9)

_GROUP_ORDER = (MpcGroup.MPC1, MpcGroup.MPC2, MpcGroup.MPC3, MpcGroup.MPC4)


def build_default_scene(
    grid_spacing: float = 2.0,
    receiver_floors: tuple[int, ...] = (3, 4),
    full_scale: bool = False,
    materials=None,
) -> SceneConfig:
    """Seven-floor concrete building with windowed facades and UAV anchors.

    The desk-scale default (2 m grid, two receiver floors) sweeps in minutes;
    ``full_scale=True`` switches to a 0.5 m grid over floors 3-7.
    """
    lib = materials if materials is not None else default_material_library()
    if full_scale:
        grid_spacing = 0.5
        receiver_floors = (3, 4, 5, 6, 7)

    lx, ly = 30.0, 20.0
    floor_count, floor_height = 7, 3.0

    windows = []
    for coord in (0.0, ly):
        for floor in range(1, floor_count + 1):
            base = (floor - 1) * floor_height
            for center in np.arange(2.5, lx, 5.0):
                windows.append(WindowRect(
                    axis="y", coord=coord,
                    u_lo=float(center - 1.0), u_hi=float(center + 1.0),
                    z_lo=base + 0.8, z_hi=base + 2.8,
                ))

    top = floor_count * floor_height
    interior_walls = tuple(
        [InteriorWall("y", y, 0.0, lx, 0.0, top) for y in (7.5, 13.5)]
        + [InteriorWall("x", x, 0.0, ly, 0.0, top) for x in (6.5, 12.5, 18.5, 24.5)]
    )

    anchors = (
        (7.5, -20.0, 3.2),
        (22.5, -20.0, 4.2),
        (7.5, 40.0, 4.9),
        (22.5, 40.0, 5.8),
    )

    return SceneConfig(
        footprint_x=lx,
        footprint_y=ly,
        floor_count=floor_count,
        floor_height=floor_height,
        exterior_slab=lib.slab("exterior_concrete"),
        interior_slab=lib.slab("interior_drywall"),
        windows=tuple(windows),
        interior_walls=interior_walls,
        anchors=anchors,
        receiver_floors=tuple(receiver_floors),
        receiver_spacing=grid_spacing,
    )


def p_fap_stats(groups_by_anchor) -> dict[MpcGroup, float]:
    """FAP group shares in percent, normalized so the four groups sum to 100.

    ``groups_by_anchor`` maps anchor id -> sequence of FAP groups (one per
    receiver with a detection).
    """
    counts = {g: 0 for g in _GROUP_ORDER}
    total = 0
    for groups in groups_by_anchor.values():
        for g in groups:
            counts[g] += 1
            total += 1
    if total == 0:
        raise ValueError("no FAP selections to aggregate")
    return {g: 100.0 * counts[g] / total for g in _GROUP_ORDER}


@dataclass
class SweepConfig:
    scene: SceneConfig
    frequencies_hz: tuple[float, ...] = DEFAULT_FREQUENCY_LADDER_HZ
    t_fap_db: float = 20.0
    trials: int = 1
    seed: int = 0
    top_k: int = 25
    noiseless: bool = False

    def __post_init__(self) -> None:
        freqs = tuple(float(f) for f in self.frequencies_hz)
        if not freqs or list(freqs) != sorted(freqs):
            raise ValueError("frequency ladder must be non-empty and sorted")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        self.frequencies_hz = freqs


@dataclass
class FrequencyReport:
    frequency_hz: float
    p_fap_pct: dict[MpcGroup, float]
    fap_snr_quartiles_db: tuple[float, float, float] | None
    dnls_errors_m: np.ndarray  # sorted 3D errors
    lls_errors_m: np.ndarray
    peb_m: np.ndarray
    exclusions: dict[str, int]
    n_receivers: int
    n_pairs: int


@dataclass
class SweepReport:
    seed: int
    t_fap_db: float
    trials: int
    noiseless: bool
    frequencies: list[FrequencyReport] = field(default_factory=list)


def _fap_edge_for(pdp: Pdp, fap_mpc, geom: SceneGeometry, anchor: np.ndarray) -> WindowEdge:
    """Window edge the diffraction model uses for this anchor's measurement.

    Preference order: the FAP's own edge when it is a diffraction path, then
    the earliest diffraction component in the PDP, then the geometrically
    nearest edge to the anchor (pure mismatch case).
    """
    if fap_mpc.group is MpcGroup.MPC3 and fap_mpc.edge_id is not None:
        return geom.edges[fap_mpc.edge_id]
    for m in pdp.mpcs:
        if m.group is MpcGroup.MPC3 and m.edge_id is not None:
            return geom.edges[m.edge_id]
    midpoints = [0.5 * (e.endpoints_world()[0] + e.endpoints_world()[1]) for e in geom.edges]
    nearest = int(np.argmin([np.linalg.norm(mid - anchor) for mid in midpoints]))
    return geom.edges[nearest]


def _dnls_with_retries(meas: MeasurementSet, scene: SceneConfig):
    """D-NLS with a deterministic retry ladder for hard mismatch valleys.

    Plain Gauss-Newton first; on failure, the damped variant from the same
    init, then a strongly damped run from the bounds centroid. Receivers
    failing all three are excluded and counted (plain Gauss-Newton can limit-
    cycle when the first arriving path does not follow the diffraction
    model).
    """
    lo, hi = scene.bounds
    attempts = (
        (initial_guess(meas, scene.bounds), {}),
        (initial_guess(meas, scene.bounds), {"damping": 0.1, "max_iters": 400}),
        (Point3.from_array(0.5 * (lo + hi)), {"damping": 1.0, "max_iters": 400}),
    )
    for init, kwargs in attempts:
        try:
            est = dnls_solve(meas, init, **kwargs)
        except (SingularGeometryError, SolverDivergedError, ValueError):
            continue
        if est.converged:
            return est
    return None


def run_sweep(cfg: SweepConfig) -> SweepReport:
    """Run the full pipeline over the frequency ladder; deterministic."""
    scene = cfg.scene
    geom = build_scene_geometry(scene)
    receivers = receiver_grid(scene)
    n_anchors = len(scene.anchors)
    anchors_arr = np.asarray(scene.anchors, dtype=float)
    report = SweepReport(seed=cfg.seed, t_fap_db=cfg.t_fap_db,
                         trials=cfg.trials, noiseless=cfg.noiseless)

    for fi, f_hz in enumerate(cfg.frequencies_hz):
        geom.prepare_frequency(f_hz)
        band = scene.radio.band_for(f_hz)
        beta_sq = mean_squared_bandwidth(band)
        groups_by_anchor: dict[int, list[MpcGroup]] = {a: [] for a in range(n_anchors)}
        fap_snrs: list[float] = []
        dnls_errors: list[float] = []
        lls_errors: list[float] = []
        peb_values: list[float] = []
        excl = {"no_detection": 0, "dnls_failed": 0, "lls_failed": 0, "peb_singular": 0}

        for ri, rx in enumerate(receivers):
            faps = []
            pdps = []
            detected = True
            for a in range(n_anchors):
                pdp = truncate_top_k(
                    enumerate_mpcs(scene, a, rx, f_hz, geometry=geom), cfg.top_k)
                try:
                    fap = select_fap(pdp, cfg.t_fap_db)
                except NoDetectionError:
                    detected = False
                    break
                pdps.append(pdp)
                faps.append(fap)
            if not detected:
                excl["no_detection"] += 1
                continue

            for a in range(n_anchors):
                groups_by_anchor[a].append(faps[a].chosen.group)
                fap_snrs.append(faps[a].chosen.snr_db)

            edges = tuple(
                _fap_edge_for(pdps[a], faps[a].chosen, geom, anchors_arr[a])
                for a in range(n_anchors))
            sigmas = np.array([
                range_sigma_m(beta_sq, 10 ** (faps[a].chosen.snr_db / 10))
                for a in range(n_anchors)])
            true_ranges = np.array([
                faps[a].chosen.path_length_m for a in range(n_anchors)])
            rx_true = rx.as_array()

            # Bound at the true position, using the strongest isolation
            # assumption: the earliest diffraction path of each anchor.
            peb_anchor_idx = []
            peb_edges = []
            peb_snrs = []
            for a in range(n_anchors):
                mpc3 = next((m for m in pdps[a].mpcs
                             if m.group is MpcGroup.MPC3 and m.edge_id is not None), None)
                if mpc3 is not None:
                    peb_anchor_idx.append(a)
                    peb_edges.append(geom.edges[mpc3.edge_id])
                    peb_snrs.append(10 ** (mpc3.snr_db / 10))
            if len(peb_anchor_idx) >= 3:
                bound = peb(rx_true, anchors_arr[peb_anchor_idx], tuple(peb_edges),
                            np.array(peb_snrs), beta_sq)
                if bound.singular:
                    excl["peb_singular"] += 1
                else:
                    peb_values.append(bound.peb_m)
            else:
                excl["peb_singular"] += 1

            for trial in range(cfg.trials):
                rng = np.random.default_rng(
                    np.random.SeedSequence([cfg.seed, fi, ri, trial]))
                noise = np.zeros(n_anchors) if cfg.noiseless \
                    else sigmas * rng.standard_normal(n_anchors)
                meas = MeasurementSet(anchors_arr, true_ranges + noise, sigmas, edges)

                try:
                    est = lls_solve(meas)
                    lls_errors.append(float(np.linalg.norm(
                        est.alpha_hat.as_array() - rx_true)))
                except (SingularGeometryError, ValueError):
                    excl["lls_failed"] += 1

                est = _dnls_with_retries(meas, scene)
                if est is not None:
                    dnls_errors.append(float(np.linalg.norm(
                        est.alpha_hat.as_array() - rx_true)))
                else:
                    excl["dnls_failed"] += 1

        quartiles = None
        if fap_snrs:
            q = np.percentile(fap_snrs, [25, 50, 75])
            quartiles = (float(q[0]), float(q[1]), float(q[2]))
        report.frequencies.append(FrequencyReport(
            frequency_hz=f_hz,
            p_fap_pct=p_fap_stats(groups_by_anchor),
            fap_snr_quartiles_db=quartiles,
            dnls_errors_m=np.sort(np.asarray(dnls_errors)),
            lls_errors_m=np.sort(np.asarray(lls_errors)),
            peb_m=np.sort(np.asarray(peb_values)),
            exclusions=excl,
            n_receivers=len(receivers),
            n_pairs=len(receivers) * n_anchors,
        ))
    return report


# ---------------------------------------------------------------------------
# Report export
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _freq_label(f_hz: float) -> str:
    return f"{f_hz / 1e9:g}GHz"


def export_report(report: SweepReport, out_dir) -> list[Path]:
    """Write plot-ready CSVs; returns the created file paths.

    Per ladder: p_fap.csv, fap_snr_quartiles.csv, exclusions.csv. Per
    frequency and estimator: cdf_<estimator>_<label>.csv with one sorted
    error sample per row and empirical probability k/n.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def open_csv(name, header):
        path = out / name
        written.append(path)
        fh = open(path, "w", newline="", encoding="utf-8")
        writer = csv.writer(fh)
        writer.writerow(header)
        return fh, writer

    fh, writer = open_csv("p_fap.csv",
                          ["frequency_hz", "mpc1_pct", "mpc2_pct", "mpc3_pct", "mpc4_pct"])
    with fh:
        for fr in report.frequencies:
            writer.writerow([_fmt(fr.frequency_hz)]
                            + [_fmt(fr.p_fap_pct[g]) for g in _GROUP_ORDER])

    fh, writer = open_csv("fap_snr_quartiles.csv",
                          ["frequency_hz", "q25_db", "q50_db", "q75_db"])
    with fh:
        for fr in report.frequencies:
            if fr.fap_snr_quartiles_db is not None:
                writer.writerow([_fmt(fr.frequency_hz)]
                                + [_fmt(q) for q in fr.fap_snr_quartiles_db])

    fh, writer = open_csv("exclusions.csv",
                          ["frequency_hz", "n_receivers", "n_pairs", "no_detection",
                           "dnls_failed", "lls_failed", "peb_singular"])
    with fh:
        for fr in report.frequencies:
            writer.writerow([_fmt(fr.frequency_hz), fr.n_receivers, fr.n_pairs,
                             fr.exclusions["no_detection"], fr.exclusions["dnls_failed"],
                             fr.exclusions["lls_failed"], fr.exclusions["peb_singular"]])

    for fr in report.frequencies:
        label = _freq_label(fr.frequency_hz)
        for name, samples in (("dnls", fr.dnls_errors_m),
                              ("lls", fr.lls_errors_m),
                              ("peb", fr.peb_m)):
            fh, writer = open_csv(f"cdf_{name}_{label}.csv", ["error_m", "probability"])
            with fh:
                n = len(samples)
                for k, err in enumerate(samples, start=1):
                    writer.writerow([_fmt(err), _fmt(k / n)])
    return written


# ---------------------------------------------------------------------------
# Scene / report (de)serialization
# ---------------------------------------------------------------------------

def _slab_to_dict(slab: SlabSpec) -> dict:
    return {
        "name": slab.name,
        "layers": [
            {"material": {"name": l.material.name, "a": l.material.a, "b": l.material.b,
                          "c": l.material.c, "d": l.material.d},
             "thickness_m": l.thickness_m}
            for l in slab.layers
        ],
    }


def _slab_from_dict(doc: dict) -> SlabSpec:
    return SlabSpec(
        name=doc["name"],
        layers=tuple(
            SlabLayer(material=Material(**l["material"]), thickness_m=l["thickness_m"])
            for l in doc["layers"]
        ),
    )


def scene_to_dict(scene: SceneConfig) -> dict:
    return {
        "schema": "scene/1",
        "footprint_x": scene.footprint_x,
        "footprint_y": scene.footprint_y,
        "floor_count": scene.floor_count,
        "floor_height": scene.floor_height,
        "exterior_slab": _slab_to_dict(scene.exterior_slab),
        "interior_slab": _slab_to_dict(scene.interior_slab),
        "windows": [vars(w).copy() for w in scene.windows],
        "interior_walls": [vars(w).copy() for w in scene.interior_walls],
        "anchors": [list(a) for a in scene.anchors],
        "receiver_floors": list(scene.receiver_floors),
        "receiver_spacing": scene.receiver_spacing,
        "receiver_margin": scene.receiver_margin,
        "receiver_height": scene.receiver_height,
        "radio": {
            "bands": [vars(b).copy() for b in scene.radio.bands],
            "bandwidth_hz": scene.radio.bandwidth_hz,
            "noise_temperature_k": scene.radio.noise_temperature_k,
            "polarization": scene.radio.polarization,
            "diffraction_loss": vars(scene.radio.diffraction_loss).copy(),
        },
        "limits": vars(scene.limits).copy(),
        "include_ground": scene.include_ground,
    }


def scene_from_dict(doc: dict) -> SceneConfig:
    if doc.get("schema") != "scene/1":
        raise ValueError(f"unsupported scene schema {doc.get('schema')!r}")
    radio = doc["radio"]
    return SceneConfig(
        footprint_x=doc["footprint_x"],
        footprint_y=doc["footprint_y"],
        floor_count=doc["floor_count"],
        floor_height=doc["floor_height"],
        exterior_slab=_slab_from_dict(doc["exterior_slab"]),
        interior_slab=_slab_from_dict(doc["interior_slab"]),
        windows=tuple(WindowRect(**w) for w in doc["windows"]),
        interior_walls=tuple(InteriorWall(**w) for w in doc["interior_walls"]),
        anchors=tuple(tuple(a) for a in doc["anchors"]),
        receiver_floors=tuple(doc["receiver_floors"]),
        receiver_spacing=doc["receiver_spacing"],
        receiver_margin=doc["receiver_margin"],
        receiver_height=doc["receiver_height"],
        radio=RadioConfig(
            bands=tuple(BandPlan(**b) for b in radio["bands"]),
            bandwidth_hz=radio["bandwidth_hz"],
            noise_temperature_k=radio["noise_temperature_k"],
            polarization=radio["polarization"],
            diffraction_loss=DiffractionLossModel(**radio["diffraction_loss"]),
        ),
        limits=PathLimits(**doc["limits"]),
        include_ground=doc["include_ground"],
    )


def save_scene(scene: SceneConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2)
        fh.write("\n")


def load_scene(path) -> SceneConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_from_dict(json.load(fh))


def report_to_dict(report: SweepReport) -> dict:
    return {
        "schema": "sweep-report/1",
        "seed": report.seed,
        "t_fap_db": report.t_fap_db,
        "trials": report.trials,
        "noiseless": report.noiseless,
        "frequencies": [
            {
                "frequency_hz": fr.frequency_hz,
                "p_fap_pct": {g.name: fr.p_fap_pct[g] for g in _GROUP_ORDER},
                "fap_snr_quartiles_db": (
                    list(fr.fap_snr_quartiles_db)
                    if fr.fap_snr_quartiles_db is not None else None),
                "dnls_errors_m": [float(x) for x in fr.dnls_errors_m],
                "lls_errors_m": [float(x) for x in fr.lls_errors_m],
                "peb_m": [float(x) for x in fr.peb_m],
                "exclusions": dict(fr.exclusions),
                "n_receivers": fr.n_receivers,
                "n_pairs": fr.n_pairs,
            }
            for fr in report.frequencies
        ],
    }


def report_from_dict(doc: dict) -> SweepReport:
    if doc.get("schema") != "sweep-report/1":
        raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
    report = SweepReport(seed=doc["seed"], t_fap_db=doc["t_fap_db"],
                         trials=doc["trials"], noiseless=doc["noiseless"])
    for fr in doc["frequencies"]:
        quartiles = fr["fap_snr_quartiles_db"]
        report.frequencies.append(FrequencyReport(
            frequency_hz=fr["frequency_hz"],
            p_fap_pct={g: fr["p_fap_pct"][g.name] for g in _GROUP_ORDER},
            fap_snr_quartiles_db=tuple(quartiles) if quartiles is not None else None,
            dnls_errors_m=np.asarray(fr["dnls_errors_m"]),
            lls_errors_m=np.asarray(fr["lls_errors_m"]),
            peb_m=np.asarray(fr["peb_m"]),
            exclusions=dict(fr["exclusions"]),
            n_receivers=fr["n_receivers"],
            n_pairs=fr["n_pairs"],
        ))
    return report
