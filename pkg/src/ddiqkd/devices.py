"""Detector and measurement-unit device models.

Two response regimes are modeled. In quantum mode a single photon is projected
onto the Bell basis and the matching detector fires subject to its efficiency;
dark counts fire independently. In blinded (linear) mode the detectors ignore
single photons entirely and click only when the classical optical power they
receive meets a per-detector threshold.

Efficiencies and thresholds are wavelength-dependent tables; lookups at an
unlisted wavelength use the nearest listed entry (lower wavelength on ties).
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .errors import ValidationError
from .states import (
    BellOutcome,
    JointPhotonState,
    PolarizationQubit,
    SpatialQubit,
    bell_probabilities,
    tensor,
)

DEFAULT_WAVELENGTH_NM = 1550.0

ClickPattern = tuple[bool, bool, bool, bool]


def _nearest(table: Mapping[float, float], wavelength: float) -> float:
    return table[min(table, key=lambda wl: (abs(wl - wavelength), wl))]


@dataclass(frozen=True)
class DetectorSpec:
    """One single-photon detector: which Bell outcome it serves, its
    wavelength-indexed quantum efficiency, per-slot dark-count probability,
    and the wavelength-indexed classical power threshold it obeys when
    blinded (mW)."""

    outcome: BellOutcome
    efficiency: Mapping[float, float] = field(default_factory=lambda: {DEFAULT_WAVELENGTH_NM: 0.2})
    dark_count_prob: float = 0.0
    blind_threshold: Mapping[float, float] = field(default_factory=lambda: {DEFAULT_WAVELENGTH_NM: 1.0})

    def __post_init__(self) -> None:
        if not self.efficiency:
            raise ValidationError("efficiency table must not be empty")
        if not self.blind_threshold:
            raise ValidationError("blind_threshold table must not be empty")
        for wl, eta in self.efficiency.items():
            if not 0.0 <= eta <= 1.0:
                raise ValidationError(f"efficiency at {wl} nm must be in [0,1], got {eta}")
        for wl, p_th in self.blind_threshold.items():
            if p_th <= 0.0:
                raise ValidationError(f"blind_threshold at {wl} nm must be > 0, got {p_th}")
        if not 0.0 <= self.dark_count_prob <= 1.0:
            raise ValidationError(f"dark_count_prob must be in [0,1], got {self.dark_count_prob}")

    def efficiency_at(self, wavelength: float) -> float:
        return _nearest(self.efficiency, wavelength)

    def threshold_at(self, wavelength: float) -> float:
        return _nearest(self.blind_threshold, wavelength)


def make_detectors(
    efficiency: float | Mapping[float, float] = 0.2,
    dark_count_prob: float = 0.0,
    blind_threshold: float | Mapping[float, float] = 1.0,
    wavelength: float = DEFAULT_WAVELENGTH_NM,
) -> tuple[DetectorSpec, DetectorSpec, DetectorSpec, DetectorSpec]:
    """Four identical detectors, one per Bell outcome; scalars become
    single-entry wavelength tables at `wavelength`."""
    eff = dict(efficiency) if isinstance(efficiency, Mapping) else {wavelength: float(efficiency)}
    thr = dict(blind_threshold) if isinstance(blind_threshold, Mapping) else {wavelength: float(blind_threshold)}
    return tuple(DetectorSpec(k, eff, dark_count_prob, thr) for k in BellOutcome)  # type: ignore[return-value]


@dataclass(frozen=True)
class BrightPulse:
    """Classical bright pulse: peak power (mW), wavelength (nm), polarization."""

    peak_power: float
    wavelength: float
    polarization: PolarizationQubit

    def __post_init__(self) -> None:
        if self.peak_power <= 0.0:
            raise ValidationError(f"peak_power must be > 0, got {self.peak_power}")


@dataclass(frozen=True)
class DetectionResult:
    """Which detectors fired in one slot: none, a single outcome, or several."""

    clicked: frozenset[BellOutcome]

    @property
    def is_no_click(self) -> bool:
        return not self.clicked

    @property
    def is_single(self) -> bool:
        return len(self.clicked) == 1

    @property
    def is_double(self) -> bool:
        return len(self.clicked) >= 2

    @property
    def outcome(self) -> BellOutcome | None:
        """The announced outcome for a single click, else None."""
        if self.is_single:
            return next(iter(self.clicked))
        return None


NO_CLICK = DetectionResult(frozenset())


def classify(pattern: Sequence[bool]) -> DetectionResult:
    """Fold a 4-detector click pattern into no-click / single / double."""
    if len(pattern) != 4:
        raise ValidationError(f"click pattern needs 4 entries, got {len(pattern)}")
    clicked = frozenset(BellOutcome(i) for i, c in enumerate(pattern) if c)
    return DetectionResult(clicked)


def sample_outcome(probabilities: Sequence[float], u: float) -> int:
    """Map a uniform draw u in [0,1) to an outcome index by cumulative sums."""
    acc = 0.0
    for k, p in enumerate(probabilities):
        acc += p
        if u < acc:
            return k
    return len(probabilities) - 1


def sample_clicks(
    probabilities: Sequence[float],
    efficiencies: Sequence[float],
    dark_probs: Sequence[float],
    rng,
) -> ClickPattern:
    """Shared single-photon click sampling given precomputed Bell probabilities.

    One Bell outcome is drawn, then that detector fires with its efficiency;
    a photon that fails the trial is absorbed silently (detectors are
    independent absorbers, no re-sampling). Dark counts fire independently.
    """
    clicks = [False, False, False, False]
    k = sample_outcome(probabilities, rng.random())
    if rng.random() < efficiencies[k]:
        clicks[k] = True
    for i, p_dark in enumerate(dark_probs):
        if p_dark > 0.0 and rng.random() < p_dark:
            clicks[i] = True
    return tuple(clicks)  # type: ignore[return-value]


def bsm_measure_photon(
    state: JointPhotonState,
    detectors: Sequence[DetectorSpec],
    wavelength: float,
    rng,
) -> DetectionResult:
    """Quantum-mode measurement of one photon by the four-detector unit."""
    probs = bell_probabilities(state)
    etas = [d.efficiency_at(wavelength) for d in detectors]
    darks = [d.dark_count_prob for d in detectors]
    return classify(sample_clicks(probs, etas, darks, rng))


def bsm_respond_bright(
    pulse: BrightPulse,
    bob_spatial: SpatialQubit,
    detectors: Sequence[DetectorSpec],
) -> ClickPattern:
    """Blinded-mode response: the pulse power splits across detectors in
    proportion to the Bell probabilities of (pulse polarization x spatial
    state); detector k clicks iff its share meets its threshold. Deterministic."""
    probs = bell_probabilities(tensor(pulse.polarization, bob_spatial))
    return tuple(
        pulse.peak_power * p >= d.threshold_at(pulse.wavelength)
        for p, d in zip(probs, detectors)
    )  # type: ignore[return-value]
