"""Full experiment assembly: the interferometric (two-arm) and collinear
two-crystal source schemes, compensation bookkeeping, phase knobs, and
fringe scans.

Timing model (collinear, crystals listed in beam order):

* amplitude a = pairs from the first crystal.  They cross the second
  crystal as its extraordinary ray (the crystals' axes are orthogonal);
  this crossing is modeled as a rigid retardation at the mean e-ray group
  delay evaluated on the phase-matching cut.  The ``cross_dispersion``
  toggle adds each arm's deviation of that e-ray from ordinary-ray
  propagation - the residual that actually distinguishes the amplitudes.
* amplitude b = pairs from the second crystal.  Its pump component first
  crosses the first crystal as an ordinary ray (slow), so amplitude b lags;
  the birefringent compensator pre-advances that pump component.
* the per-arm quartz plates (the signal/idler phase knobs) retard the
  polarization parallel to their axis; their phase delay difference is the
  fringe phase, their group-delay difference shifts the envelopes.

All constant carrier phases are folded into the amplitude values, so the
fringe position is simply the argument of the complex overlap; the pump
knob contributes the scanned phase 2 pi dx / lambda_p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import yaml

from . import biphoton, polarization
from .biphoton import AmplitudePair, JointSpectralAmplitude
from .dispersion import (
    BirefringentElement,
    Material,
    angled_extraordinary_group_index,
    angled_extraordinary_index,
    element_delays,
    get_material,
    group_index,
    phase_matching_cut_angle,
    refractive_index,
    MM_TO_NM,
)
from .errors import ConfigError, GridTruncationError, InfeasibleError
from .spectral import (
    NO_FILTER,
    FrequencyGrid,
    PhaseMatchingSpec,
    PumpPulse,
    SpectralFilter,
    build_jsa,
    make_grid,
)
from .units import C_NM_PER_FS

SCAN_AXIS_KINDS = ("pump_delay", "signal_tilt", "idler_tilt", "both_tilts", "analyzer2_angle")

# Grid spacing must stay below pi / (largest applied group delay) by this
# safety factor, otherwise the discrete overlap aliases.
DELAY_SAMPLING_SAFETY = 1.3
MAX_GRID_POINTS = 4096


@dataclass(frozen=True)
class CrystalConfig:
    """One down-conversion crystal and the pair centers it is cut for."""

    material: Material
    thickness_mm: float
    axis_orientation: str
    signal_center_nm: float
    idler_center_nm: float

    def element(self) -> BirefringentElement:
        return BirefringentElement(
            material=self.material,
            thickness_mm=self.thickness_mm,
            axis_orientation=self.axis_orientation,
        )

    def pair_polarization(self) -> str:
        # Type-I pairs are ordinary rays, polarized orthogonal to the axis.
        return "V" if self.axis_orientation == "horizontal" else "H"


@dataclass(frozen=True)
class PhaseKnobs:
    pump_delta_x_nm: float = 0.0
    signal_tilt_deg: float = 0.0
    idler_tilt_deg: float = 0.0


@dataclass(frozen=True)
class SourceConfig:
    scheme: str
    pump: PumpPulse
    crystals: tuple
    compensator: tuple
    filters: tuple
    signal_plate: BirefringentElement
    idler_plate: BirefringentElement
    cross_dispersion_enabled: bool = False
    pump_amplitude_ratio: float = 1.0

    def __post_init__(self):
        if self.scheme not in ("collinear", "mzi"):
            raise ConfigError(f"scheme must be collinear|mzi, got {self.scheme!r}")
        if len(self.crystals) != 2:
            raise ConfigError("exactly two crystals are required")
        a, b = self.crystals
        if {a.axis_orientation, b.axis_orientation} != {"horizontal", "vertical"}:
            raise ConfigError("the two crystals must have orthogonal axis orientations")
        if len(self.filters) != 2:
            raise ConfigError("exactly two filters are required (signal, idler)")
        if not (math.isfinite(self.pump_amplitude_ratio) and self.pump_amplitude_ratio >= 0.0):
            raise ConfigError("pump_amplitude_ratio must be finite and >= 0")


@dataclass(frozen=True)
class ScanSettings:
    axis_kind: str = "pump_delay"
    start: float | None = None
    stop: float | None = None
    steps: int = 129
    analyzer1_deg: float = 45.0
    analyzer2_deg: float = 45.0
    grid_points: int = 128
    grid_span_factor: float = 5.0
    noise: str = "none"
    mean_counts: float = 1000.0

    def __post_init__(self):
        if self.axis_kind not in SCAN_AXIS_KINDS:
            raise ConfigError(f"axis_kind must be one of {SCAN_AXIS_KINDS}, got {self.axis_kind!r}")
        if self.noise not in ("none", "poisson"):
            raise ConfigError(f"noise must be none|poisson, got {self.noise!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceConfig
    knobs: PhaseKnobs
    scan: ScanSettings


@dataclass(frozen=True)
class FringeScan:
    axis: np.ndarray
    axis_kind: str
    rates: np.ndarray
    metadata: dict

    def __post_init__(self):
        if self.axis.shape != self.rates.shape or self.axis.ndim != 1:
            raise ConfigError("axis and rates must be equal-length 1-D arrays")
        if np.any(self.rates < 0.0):
            raise ConfigError("rates must be nonnegative")


# --------------------------------------------------------------------------
# Crystal physics derived from the material table


def phase_matching_spec(crystal: CrystalConfig, pump: PumpPulse) -> PhaseMatchingSpec:
    """Inverse group velocities on the phase-matching cut: extraordinary
    pump, ordinary pair."""
    theta = crystal_cut_angle(crystal, pump)
    m = crystal.material
    inv = lambda n_g: n_g * MM_TO_NM / C_NM_PER_FS  # fs per mm of crystal
    return PhaseMatchingSpec(
        crystal_length_mm=crystal.thickness_mm,
        signal_center_nm=crystal.signal_center_nm,
        idler_center_nm=crystal.idler_center_nm,
        inverse_group_velocity_pump_fs_per_mm=inv(
            angled_extraordinary_group_index(m, theta, pump.center_wavelength_nm)
        ),
        inverse_group_velocity_signal_fs_per_mm=inv(group_index(m, "o", crystal.signal_center_nm)),
        inverse_group_velocity_idler_fs_per_mm=inv(group_index(m, "o", crystal.idler_center_nm)),
    )


def crystal_cut_angle(crystal: CrystalConfig, pump: PumpPulse) -> float:
    return phase_matching_cut_angle(
        crystal.material,
        pump.center_wavelength_nm,
        crystal.signal_center_nm,
        crystal.idler_center_nm,
    )


def _crossing_delays(first: CrystalConfig, second: CrystalConfig, pump: PumpPulse):
    """Group/phase delays of the first crystal's pairs crossing the second
    as its extraordinary ray, and of the second crystal's pump component
    crossing the first as an ordinary ray."""
    theta2 = crystal_cut_angle(second, pump)
    m2 = second.material
    length2_nm = second.thickness_mm * MM_TO_NM

    def e_delays(wavelength_nm):
        n_g = angled_extraordinary_group_index(m2, theta2, wavelength_nm)
        n_p = angled_extraordinary_index(m2, theta2, wavelength_nm)
        return n_g * length2_nm / C_NM_PER_FS, n_p * length2_nm / C_NM_PER_FS

    def o_excess(wavelength_nm):
        n_e = angled_extraordinary_group_index(m2, theta2, wavelength_nm)
        n_o = group_index(m2, "o", wavelength_nm)
        return (n_e - n_o) * length2_nm / C_NM_PER_FS

    sig_g, sig_p = e_delays(first.signal_center_nm)
    idl_g, idl_p = e_delays(first.idler_center_nm)

    length1_nm = first.thickness_mm * MM_TO_NM
    pump_o_group = group_index(first.material, "o", pump.center_wavelength_nm) * length1_nm / C_NM_PER_FS
    pump_o_phase = refractive_index(first.material, "o", pump.center_wavelength_nm) * length1_nm / C_NM_PER_FS

    return {
        "pair_e_group_mean": 0.5 * (sig_g + idl_g),
        "pair_e_phase_mean": 0.5 * (sig_p + idl_p),
        "xd_excess_signal": o_excess(first.signal_center_nm),
        "xd_excess_idler": o_excess(first.idler_center_nm),
        "pump_o_group": pump_o_group,
        "pump_o_phase": pump_o_phase,
    }


def _plate_differential(plate: BirefringentElement, tilt_deg: float, wavelength_nm: float):
    """(group, phase) delay of the plate's e-ray minus its o-ray at a tilt."""
    tilted = replace(plate, tilt_deg=tilt_deg)
    rep_e = element_delays(tilted, "e", wavelength_nm)
    rep_o = element_delays(tilted, "o", wavelength_nm)
    return (
        rep_e.group_delay_fs - rep_o.group_delay_fs,
        rep_e.phase_delay_fs - rep_o.phase_delay_fs,
    )


def _plate_effect_on_a(source: SourceConfig, plate, tilt_deg, arm_center_nm):
    """(group, phase) retardation of amplitude a relative to amplitude b
    caused by one per-arm plate: positive when amplitude a's photon rides
    the slow extraordinary axis."""
    diff_g, diff_p = _plate_differential(plate, tilt_deg, arm_center_nm)
    pair_a = source.crystals[0].pair_polarization()
    a_is_extraordinary = (pair_a == "V") == (plate.axis_orientation == "vertical")
    sign = 1.0 if a_is_extraordinary else -1.0
    return sign * diff_g, sign * diff_p


def _compensator_advance(source: SourceConfig) -> tuple:
    """(group, phase) pre-advance of amplitude b's pump component relative
    to amplitude a's, produced by the compensator elements."""
    pump_nm = source.pump.center_wavelength_nm
    pol_b_pump = "V" if source.crystals[1].axis_orientation == "vertical" else "H"
    adv_g = 0.0
    adv_p = 0.0
    for element in source.compensator:
        rep_e = element_delays(element, "e", pump_nm)
        rep_o = element_delays(element, "o", pump_nm)
        b_is_extraordinary = (pol_b_pump == "V") == (element.axis_orientation == "vertical")
        # advance of b = delay of the *other* component minus delay of b's.
        sign = 1.0 if b_is_extraordinary else -1.0
        adv_g += sign * (rep_o.group_delay_fs - rep_e.group_delay_fs)
        adv_p += sign * (rep_o.phase_delay_fs - rep_e.phase_delay_fs)
    return adv_g, adv_p


def required_compensation_fs(source: SourceConfig, knobs: PhaseKnobs | None = None) -> float:
    """Group pre-advance of amplitude b's pump component that equalizes the
    two amplitudes' symmetric envelope retardations (exact, nondegenerate;
    includes the standing per-arm plates and the cross-dispersion toggle)."""
    knobs = knobs or PhaseKnobs()
    lag_b = 0.0
    lag_a = 0.0
    if source.scheme == "collinear":
        cross = _crossing_delays(source.crystals[0], source.crystals[1], source.pump)
        lag_b += cross["pump_o_group"]
        lag_a += cross["pair_e_group_mean"]
        if source.cross_dispersion_enabled:
            lag_a += 0.5 * (cross["xd_excess_signal"] + cross["xd_excess_idler"])
    sig_g, _ = _plate_effect_on_a(
        source, source.signal_plate, knobs.signal_tilt_deg, source.crystals[0].signal_center_nm
    )
    idl_g, _ = _plate_effect_on_a(
        source, source.idler_plate, knobs.idler_tilt_deg, source.crystals[0].idler_center_nm
    )
    lag_a += 0.5 * (sig_g + idl_g)
    return lag_b - lag_a


# --------------------------------------------------------------------------
# Amplitude assembly


def _pump_weights(source: SourceConfig) -> tuple:
    """Normalized amplitude weights (w_a, w_b); the ratio knob multiplies
    the horizontally-polarized pair amplitude."""
    chi = math.radians(source.pump.polarization_angle_deg)
    by_pol = {"H": abs(math.sin(chi)), "V": abs(math.cos(chi))}
    # Crystal k is pumped by the component parallel to its axis.
    w = []
    for crystal in source.crystals:
        pumped_by = "H" if crystal.axis_orientation == "horizontal" else "V"
        weight = by_pol[pumped_by]
        if crystal.pair_polarization() == "H":
            weight *= source.pump_amplitude_ratio
        w.append(weight)
    norm = math.hypot(*w)
    if norm == 0.0:
        raise ConfigError("pump weights vanish for both crystals")
    return w[0] / norm, w[1] / norm


def _grid_for(source: SourceConfig, knobs: PhaseKnobs, points: int, span_factor: float,
              compensation_override_fs):
    """Grid sized for the envelopes and refined to sample applied delays."""
    spec0 = phase_matching_spec(source.crystals[0], source.pump)
    base = make_grid(source.pump, spec0, filters=source.filters,
                     points=max(points, 8), span_factor=span_factor)
    half_span = 0.5 * float(base.signal_axis[-1] - base.signal_axis[0])

    # Largest net group retardation difference between the amplitudes.
    adv = compensation_override_fs
    if adv is None:
        adv, _ = _compensator_advance(source)
    residual = abs(required_compensation_fs(source, knobs) - adv)
    sig_g, _ = _plate_effect_on_a(source, source.signal_plate, knobs.signal_tilt_deg,
                                  source.crystals[0].signal_center_nm)
    idl_g, _ = _plate_effect_on_a(source, source.idler_plate, knobs.idler_tilt_deg,
                                  source.crystals[0].idler_center_nm)
    max_delay = residual + abs(sig_g) + abs(idl_g)
    if source.scheme == "collinear" and source.cross_dispersion_enabled:
        cross = _crossing_delays(source.crystals[0], source.crystals[1], source.pump)
        max_delay += abs(cross["xd_excess_signal"] - cross["xd_excess_idler"])

    needed = points
    if max_delay > 0.0:
        min_points = int(math.ceil(2.0 * half_span * max_delay * DELAY_SAMPLING_SAFETY / math.pi))
        while needed < min_points:
            needed *= 2
    if needed > MAX_GRID_POINTS:
        raise GridTruncationError(
            f"applied delays (~{max_delay:.0f} fs) would need {needed} grid points "
            f"(cap {MAX_GRID_POINTS}); reduce the delay or widen the cap"
        )
    if needed == points:
        return base, points
    refined = make_grid(source.pump, spec0, filters=source.filters,
                        points=needed, span_factor=span_factor)
    return refined, needed


def build_amplitudes(
    source: SourceConfig,
    knobs: PhaseKnobs | None = None,
    grid: FrequencyGrid | None = None,
    grid_points: int = 128,
    grid_span_factor: float = 5.0,
    compensation_override_fs: float | None = None,
) -> AmplitudePair:
    """Assemble the two interfering amplitudes for the configured scheme.

    ``compensation_override_fs`` replaces the compensator elements with an
    ideal nondispersive pre-advance (used by sweeps and exactness tests).
    """
    knobs = knobs or PhaseKnobs()
    points_used = grid_points
    if grid is None:
        grid, points_used = _grid_for(source, knobs, grid_points, grid_span_factor,
                                      compensation_override_fs)

    pump = source.pump
    first, second = source.crystals
    w_a, w_b = _pump_weights(source)

    spec_a = phase_matching_spec(first, pump)
    jsa = build_jsa(pump, spec_a, source.filters[0], source.filters[1], grid, label=first.axis_orientation)
    same_cut = (
        second.material.name == first.material.name
        and second.thickness_mm == first.thickness_mm
        and second.signal_center_nm == first.signal_center_nm
        and second.idler_center_nm == first.idler_center_nm
    )
    if same_cut:
        jsa_b = JointSpectralAmplitude(grid=grid, values=jsa.values,
                                       metadata=dict(jsa.metadata, crystal_label=second.axis_orientation))
    else:
        spec_b = phase_matching_spec(second, pump)
        jsa_b = build_jsa(pump, spec_b, source.filters[0], source.filters[1], grid,
                          label=second.axis_orientation)

    omega_s = spec_a.signal_center_angular_frequency
    omega_i = spec_a.idler_center_angular_frequency
    omega_p = pump.center_angular_frequency

    # Amplitude a: crossing of the second crystal (collinear) + plate effects.
    a_sig_group = a_idl_group = 0.0
    a_carrier = 0.0
    if source.scheme == "collinear":
        cross = _crossing_delays(first, second, pump)
        a_sig_group += cross["pair_e_group_mean"]
        a_idl_group += cross["pair_e_group_mean"]
        a_carrier += (omega_s + omega_i) * cross["pair_e_phase_mean"]
        if source.cross_dispersion_enabled:
            a_sig_group += cross["xd_excess_signal"]
            a_idl_group += cross["xd_excess_idler"]
    plate_sig_g, plate_sig_p = _plate_effect_on_a(source, source.signal_plate,
                                                  knobs.signal_tilt_deg, first.signal_center_nm)
    plate_idl_g, plate_idl_p = _plate_effect_on_a(source, source.idler_plate,
                                                  knobs.idler_tilt_deg, first.idler_center_nm)
    a_sig_group += plate_sig_g
    a_idl_group += plate_idl_g
    a_carrier += omega_s * plate_sig_p + omega_i * plate_idl_p

    amp_a = biphoton.apply_envelope_phase(
        jsa,
        signal_group_delay_fs=-a_sig_group,
        idler_group_delay_fs=-a_idl_group,
        carrier_phase_rad=-a_carrier,
        signal_center=omega_s,
        idler_center=omega_i,
        note="retard_a",
    )

    # Amplitude b: pump crossing of the first crystal minus compensation.
    b_group = 0.0
    b_carrier = 0.0
    if source.scheme == "collinear":
        b_group += cross["pump_o_group"]
        b_carrier += omega_p * cross["pump_o_phase"]
    if compensation_override_fs is not None:
        b_group -= compensation_override_fs
        b_carrier -= omega_p * compensation_override_fs
    else:
        adv_g, adv_p = _compensator_advance(source)
        b_group -= adv_g
        b_carrier -= omega_p * adv_p

    amp_b = biphoton.apply_envelope_phase(
        jsa_b,
        signal_group_delay_fs=-b_group,
        idler_group_delay_fs=-b_group,
        carrier_phase_rad=-b_carrier,
        signal_center=omega_s,
        idler_center=omega_i,
        note="retard_b",
    )

    if w_a != 1.0:
        amp_a = biphoton.scale(amp_a, w_a)
    if w_b != 1.0:
        amp_b = biphoton.scale(amp_b, w_b)
    amp_a.metadata["grid_points"] = points_used
    amp_b.metadata["grid_points"] = points_used

    return AmplitudePair(
        amp_a=amp_a,
        amp_b=amp_b,
        relative_phase_rad=pump_knob_phase(source, knobs.pump_delta_x_nm),
    )


def pump_knob_phase(source: SourceConfig, delta_x_nm: float) -> float:
    """The pump spatial-delay knob as a pure phase K_p dx = 2 pi dx / lambda_p."""
    return 2.0 * math.pi * delta_x_nm / source.pump.center_wavelength_nm


def coherence_label(visibility: float) -> str:
    """How to read a prepared state at this coherence factor."""
    return "coherent" if visibility > 0.5 else "incoherent-mixture-equivalent"


# --------------------------------------------------------------------------
# Scans


def _polarized_rate(source, norm_a_sq, norm_b_sq, cross_term, theta1_deg, theta2_deg, phase):
    """Analyzer-resolved normalized rate; peak 2 for ideal Bell settings."""
    t1, t2 = math.radians(theta1_deg), math.radians(theta2_deg)
    pair_a = source.crystals[0].pair_polarization()
    # <theta|V> = cos, <theta|H> = sin.
    fa = (math.cos(t1) * math.cos(t2)) if pair_a == "V" else (math.sin(t1) * math.sin(t2))
    fb = (math.sin(t1) * math.sin(t2)) if pair_a == "V" else (math.cos(t1) * math.cos(t2))
    total = norm_a_sq + norm_b_sq
    cross = (cross_term * np.exp(1j * phase)).real
    return 4.0 * (fa * fa * norm_a_sq + fb * fb * norm_b_sq + 2.0 * fa * fb * cross) / total


def _signal_plate_axis_value(source, knobs, tilt_deg) -> float:
    """Effective optical path delay (nm) of the signal plate at a tilt,
    relative to the standing tilt."""
    _, p_now = _plate_effect_on_a(source, source.signal_plate, tilt_deg,
                                  source.crystals[0].signal_center_nm)
    _, p_ref = _plate_effect_on_a(source, source.signal_plate, knobs.signal_tilt_deg,
                                  source.crystals[0].signal_center_nm)
    return (p_now - p_ref) * C_NM_PER_FS


def _idler_plate_axis_value(source, knobs, tilt_deg) -> float:
    _, p_now = _plate_effect_on_a(source, source.idler_plate, tilt_deg,
                                  source.crystals[0].idler_center_nm)
    _, p_ref = _plate_effect_on_a(source, source.idler_plate, knobs.idler_tilt_deg,
                                  source.crystals[0].idler_center_nm)
    return (p_now - p_ref) * C_NM_PER_FS


def default_scan_range(source: SourceConfig, axis_kind: str) -> tuple:
    """Reconstructed defaults: about four fringe periods per scan."""
    if axis_kind == "pump_delay":
        span = 2.0 * source.pump.center_wavelength_nm
        return (-span, span)
    if axis_kind in ("signal_tilt", "idler_tilt", "both_tilts"):
        return (5.0, 35.0)
    return (0.0, 360.0)  # analyzer2_angle


def scan(
    source: SourceConfig,
    axis_kind: str,
    scan_range: tuple | None = None,
    steps: int = 129,
    analyzers: polarization.AnalyzerSetting | None = None,
    knobs: PhaseKnobs | None = None,
    grid_points: int = 128,
    grid_span_factor: float = 5.0,
    compensation_override_fs: float | None = None,
    noise: str = "none",
    mean_counts: float = 1000.0,
    seed: int | None = None,
) -> FringeScan:
    """Coincidence fringe versus one scanned knob, analyzers fixed.

    Sensible fits need steps >= 8 spanning >= 1.5 periods; shorter scans
    still produce data (the CLI writes the CSV before the fit rejects it).
    """
    if axis_kind not in SCAN_AXIS_KINDS:
        raise ConfigError(f"axis_kind must be one of {SCAN_AXIS_KINDS}, got {axis_kind!r}")
    if steps < 2:
        raise ConfigError(f"scan needs at least 2 steps, got {steps}")
    knobs = knobs or PhaseKnobs()
    analyzers = analyzers or polarization.AnalyzerSetting(45.0, 45.0)
    if scan_range is None:
        scan_range = default_scan_range(source, axis_kind)
    start, stop = (float(scan_range[0]), float(scan_range[1]))
    if not stop > start:
        raise ConfigError(f"scan range must satisfy stop > start, got ({start}, {stop})")
    values = np.linspace(start, stop, steps)

    build = lambda kn: build_amplitudes(
        source, kn, grid_points=grid_points, grid_span_factor=grid_span_factor,
        compensation_override_fs=compensation_override_fs,
    )

    axis = values.copy()
    rates = np.empty_like(values)
    if axis_kind in ("pump_delay", "analyzer2_angle"):
        pair = build(knobs)
        na, nb, cross = biphoton.interference_terms(pair)
        grid_points_used = pair.amp_a.metadata.get("grid_points", grid_points)
        for k, v in enumerate(values):
            if axis_kind == "pump_delay":
                phase = pump_knob_phase(source, v)
                rates[k] = _polarized_rate(source, na, nb, cross,
                                           analyzers.theta1_deg, analyzers.theta2_deg, phase)
            else:
                rates[k] = _polarized_rate(source, na, nb, cross,
                                           analyzers.theta1_deg, v, pair.relative_phase_rad)
    else:
        grid_points_used = grid_points
        for k, v in enumerate(values):
            if axis_kind == "signal_tilt":
                kn = replace(knobs, signal_tilt_deg=v)
                axis[k] = _signal_plate_axis_value(source, knobs, v)
            elif axis_kind == "idler_tilt":
                kn = replace(knobs, idler_tilt_deg=v)
                axis[k] = _idler_plate_axis_value(source, knobs, v)
            else:  # both_tilts, equal angles; axis = mean effective delay
                kn = replace(knobs, signal_tilt_deg=v, idler_tilt_deg=v)
                axis[k] = 0.5 * (
                    _signal_plate_axis_value(source, knobs, v)
                    + _idler_plate_axis_value(source, knobs, v)
                )
            pair = build(kn)
            na, nb, cross = biphoton.interference_terms(pair)
            grid_points_used = pair.amp_a.metadata.get("grid_points", grid_points)
            rates[k] = _polarized_rate(source, na, nb, cross,
                                       analyzers.theta1_deg, analyzers.theta2_deg,
                                       pair.relative_phase_rad)

    # Rates are physically nonnegative; destructive-interference points can
    # round to tiny negative values.
    np.maximum(rates, 0.0, out=rates)

    metadata = {
        "axis_kind": axis_kind,
        "scan_range": (start, stop),
        "steps": steps,
        "scanned_values": tuple(float(v) for v in values),
        "analyzers": (analyzers.theta1_deg, analyzers.theta2_deg),
        "knobs": {
            "pump_delta_x_nm": knobs.pump_delta_x_nm,
            "signal_tilt_deg": knobs.signal_tilt_deg,
            "idler_tilt_deg": knobs.idler_tilt_deg,
        },
        "grid_points": grid_points_used,
        "grid_span_factor": grid_span_factor,
        "compensation_override_fs": compensation_override_fs,
        "noise": noise,
        "source": source_snapshot(source),
    }
    if noise == "poisson":
        if seed is None:
            raise ConfigError("poisson noise requires a seed")
        rng = np.random.Generator(np.random.PCG64(seed))
        counts = rng.poisson(np.maximum(rates, 0.0) * mean_counts)
        rates = counts.astype(float) / mean_counts
        metadata["seed"] = seed
        metadata["mean_counts"] = mean_counts

    return FringeScan(axis=axis, axis_kind=axis_kind, rates=rates, metadata=metadata)


def prepare_bell(
    source: SourceConfig,
    target: str,
    knobs: PhaseKnobs | None = None,
    grid_points: int = 128,
    grid_span_factor: float = 5.0,
    compensation_override_fs: float | None = None,
) -> PhaseKnobs:
    """Pump-knob setting that puts the space-time fringe at its maximum
    (phi+) or minimum (phi-); the returned knobs are verified by rate
    evaluation by the caller's tests."""
    if target not in ("phi+", "phi-"):
        raise ConfigError(f"target must be phi+|phi-, got {target!r}")
    knobs = knobs or PhaseKnobs()
    pair = build_amplitudes(source, knobs, grid_points=grid_points,
                            grid_span_factor=grid_span_factor,
                            compensation_override_fs=compensation_override_fs)
    visibility = biphoton.normalized_overlap_magnitude(pair.amp_a, pair.amp_b)
    if visibility <= 0.9:
        raise InfeasibleError(
            f"cannot prepare {target}: |overlap| = {visibility:.4f} <= 0.9 "
            "(compensation or balance insufficient)"
        )
    standing = pump_knob_phase(source, knobs.pump_delta_x_nm)
    constant = np.angle(biphoton.overlap(pair.amp_a, pair.amp_b)) + standing
    wanted = 0.0 if target == "phi+" else math.pi
    delta_phase = (wanted - constant) % (2.0 * math.pi)
    delta_x = delta_phase * source.pump.center_wavelength_nm / (2.0 * math.pi)
    return replace(knobs, pump_delta_x_nm=knobs.pump_delta_x_nm + delta_x)


def effective_polarization_state(
    source: SourceConfig,
    knobs: PhaseKnobs | None = None,
    grid_points: int = 128,
    grid_span_factor: float = 5.0,
    compensation_override_fs: float | None = None,
):
    """Pure-state polarization coefficients with the effective fringe phase,
    plus the separately reported coherence factor V = |overlap|."""
    knobs = knobs or PhaseKnobs()
    pair = build_amplitudes(source, knobs, grid_points=grid_points,
                            grid_span_factor=grid_span_factor,
                            compensation_override_fs=compensation_override_fs)
    na, nb, cross = biphoton.interference_terms(pair)
    w_a, w_b = math.sqrt(na), math.sqrt(nb)
    visibility = 0.0 if w_a * w_b == 0.0 else min(abs(cross) / (w_a * w_b), 1.0)
    phase = pair.relative_phase_rad + (np.angle(cross) if w_a * w_b > 0.0 else 0.0)

    # The fringe phase rides on the horizontally-polarized pair amplitude.
    pair_a_pol = source.crystals[0].pair_polarization()
    if pair_a_pol == "V":
        c_hh, c_vv = w_b * np.exp(1j * phase), w_a + 0j
    else:
        c_hh, c_vv = w_a * np.exp(1j * phase), w_b + 0j
    norm = math.hypot(w_a, w_b)
    coeffs = np.array([c_hh, 0.0, 0.0, c_vv], dtype=complex) / norm
    state = polarization.PolarizationState(
        coefficients=coeffs,
        labels=(source.crystals[0].signal_center_nm, source.crystals[0].idler_center_nm),
    )
    return state, visibility


# --------------------------------------------------------------------------
# Configuration files


def source_snapshot(source: SourceConfig) -> dict:
    """Plain-data echo of the source for scan metadata and manifests."""
    return {
        "scheme": source.scheme,
        "pump": {
            "center_wavelength_nm": source.pump.center_wavelength_nm,
            "duration_fs": source.pump.duration_fs,
            "duration_convention": "intensity_fwhm",
            "polarization_angle_deg": source.pump.polarization_angle_deg,
        },
        "crystals": [
            {
                "material": c.material.name,
                "thickness_mm": c.thickness_mm,
                "axis_orientation": c.axis_orientation,
                "signal_center_nm": c.signal_center_nm,
                "idler_center_nm": c.idler_center_nm,
            }
            for c in source.crystals
        ],
        "compensator": [
            {
                "material": e.material.name,
                "thickness_mm": e.thickness_mm,
                "axis_orientation": e.axis_orientation,
                "tilt_deg": e.tilt_deg,
            }
            for e in source.compensator
        ],
        "filters": [
            {"center_nm": f.center_nm, "fwhm_nm": f.fwhm_nm, "shape": f.shape}
            for f in source.filters
        ],
        "plates": {
            arm: {
                "material": p.material.name,
                "thickness_mm": p.thickness_mm,
                "axis_orientation": p.axis_orientation,
            }
            for arm, p in (("signal", source.signal_plate), ("idler", source.idler_plate))
        },
        "cross_dispersion_enabled": source.cross_dispersion_enabled,
        "pump_amplitude_ratio": source.pump_amplitude_ratio,
        "approximations": (
            "e_index_on_phase_matching_cut",
            "plate_tilt_o_index_geometry",
            "first_order_group_velocity_expansion",
            "air_treated_as_vacuum",
        ),
    }


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"config section {context!r} is missing key {key!r}")
    return mapping[key]


def _parse_element(entry: dict, context: str) -> BirefringentElement:
    return BirefringentElement(
        material=get_material(str(_require(entry, "material", context))),
        thickness_mm=float(_require(entry, "thickness_mm", context)),
        axis_orientation=str(entry.get("axis_orientation", "vertical")),
        tilt_deg=float(entry.get("tilt_deg", 0.0)),
    )


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a parsed YAML mapping into an ExperimentConfig."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    for section in ("pump", "crystals", "filters", "scheme"):
        if section not in data:
            raise ConfigError(f"config is missing the {section!r} section")

    p = data["pump"]
    pump = PumpPulse(
        center_wavelength_nm=float(_require(p, "center_wavelength_nm", "pump")),
        duration_fs=float(_require(p, "duration_fs", "pump")),
        polarization_angle_deg=float(p.get("polarization_angle_deg", 45.0)),
    )

    crystals = []
    raw_crystals = data["crystals"]
    if not isinstance(raw_crystals, list) or len(raw_crystals) != 2:
        raise ConfigError("config section 'crystals' must list exactly two crystals")
    for k, entry in enumerate(raw_crystals):
        context = f"crystals[{k}]"
        crystals.append(
            CrystalConfig(
                material=get_material(str(_require(entry, "material", context))),
                thickness_mm=float(_require(entry, "thickness_mm", context)),
                axis_orientation=str(_require(entry, "axis_orientation", context)),
                signal_center_nm=float(_require(entry, "signal_center_nm", context)),
                idler_center_nm=float(_require(entry, "idler_center_nm", context)),
            )
        )

    filters = []
    raw_filters = data["filters"]
    if not isinstance(raw_filters, list) or len(raw_filters) != 2:
        raise ConfigError("config section 'filters' must list exactly two filters")
    for k, entry in enumerate(raw_filters):
        shape = str(entry.get("shape", "gaussian"))
        if shape == "none":
            filters.append(NO_FILTER)
        else:
            context = f"filters[{k}]"
            filters.append(
                SpectralFilter(
                    center_nm=float(_require(entry, "center_nm", context)),
                    fwhm_nm=float(_require(entry, "fwhm_nm", context)),
                    shape=shape,
                )
            )

    compensator = tuple(
        _parse_element(entry, f"compensator[{k}]")
        for k, entry in enumerate(data.get("compensator", []) or [])
    )

    scheme = data["scheme"]
    knobs_raw = data.get("knobs", {}) or {}
    plates = {}
    for arm in ("signal_plate", "idler_plate"):
        entry = knobs_raw.get(arm)
        if entry is None:
            entry = {"material": "quartz", "thickness_mm": 3.0, "axis_orientation": "vertical"}
        plates[arm] = _parse_element(entry, f"knobs.{arm}")

    source = SourceConfig(
        scheme=str(_require(scheme, "kind", "scheme")),
        pump=pump,
        crystals=tuple(crystals),
        compensator=compensator,
        filters=tuple(filters),
        signal_plate=plates["signal_plate"],
        idler_plate=plates["idler_plate"],
        cross_dispersion_enabled=bool(scheme.get("cross_dispersion", False)),
        pump_amplitude_ratio=float(scheme.get("pump_amplitude_ratio", 1.0)),
    )

    knobs = PhaseKnobs(
        pump_delta_x_nm=float(knobs_raw.get("pump_delta_x_nm", 0.0)),
        signal_tilt_deg=float(knobs_raw.get("signal_tilt_deg", 0.0)),
        idler_tilt_deg=float(knobs_raw.get("idler_tilt_deg", 0.0)),
    )

    s = data.get("scan", {}) or {}
    scan_settings = ScanSettings(
        axis_kind=str(s.get("axis_kind", "pump_delay")),
        start=None if s.get("start") is None else float(s["start"]),
        stop=None if s.get("stop") is None else float(s["stop"]),
        steps=int(s.get("steps", 129)),
        analyzer1_deg=float(s.get("analyzer1_deg", 45.0)),
        analyzer2_deg=float(s.get("analyzer2_deg", 45.0)),
        grid_points=int(s.get("grid_points", 128)),
        grid_span_factor=float(s.get("grid_span_factor", 5.0)),
        noise=str(s.get("noise", "none")),
        mean_counts=float(s.get("mean_counts", 1000.0)),
    )

    return ExperimentConfig(source=source, knobs=knobs, scan=scan_settings)


def load_config(path) -> ExperimentConfig:
    """Load and validate a scenario config file (YAML)."""
    try:
        with open(path, "r") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(data)


def default_config_path():
    """Path of the packaged default scenario file."""
    from importlib import resources

    return resources.files("bellsim.data").joinpath("default.yaml")
