"""Bright-light blinding of the measurement unit's detectors.

The interceptor measures each incoming photon in a random BB84 basis and
resends a bright classical pulse along the measured eigenstate. Blinded
detectors respond linearly: detector k clicks iff the pulse power landing on
it (peak power times the Bell probability of pulse polarization x receiver
spatial state) meets its classical threshold. With one threshold for all four
detectors the attack betrays itself through double clicks on every
basis-matched round. Thresholds differ across real detectors and drift with
wavelength, so the interceptor can pick a (wavelength, power) pair for which
exactly one low-threshold detector fires on every basis-matched round and
nothing fires on basis-mismatched rounds; that is what optimize_pulse
searches for.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import EveInterceptConfig, intercept_resend
from .devices import BrightPulse, DetectionResult, DetectorSpec, bsm_respond_bright, classify
from .errors import NoViablePlanError, ValidationError
from .states import (
    Basis,
    BellOutcome,
    PolarizationQubit,
    SpatialQubit,
    prepare_polarization,
    prepare_spatial,
    xor_from_outcome,
)

_SETTINGS = tuple((basis, bit) for basis in Basis for bit in (0, 1))


@dataclass(frozen=True)
class BlindingPlan:
    """A vetted (wavelength, power) working point with its predicted click
    census over the 16 equally likely interceptor/receiver settings.

    The probabilities are conditional on the basis relation: single and
    double click probabilities are per basis-matched round, cross_click_prob
    is per basis-mismatched round and must be exactly 0 for a usable plan
    (any cross-basis click would cause key errors and expose the attack).
    """

    wavelength: float
    peak_power: float
    single_click_prob: float
    double_click_prob: float
    cross_click_prob: float

    def __post_init__(self) -> None:
        for name in ("single_click_prob", "double_click_prob", "cross_click_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must be in [0,1], got {v}")
        if self.cross_click_prob != 0.0:
            raise ValidationError(
                f"a valid plan has zero cross-basis clicks, got {self.cross_click_prob}"
            )


def evaluate_pulse(
    detectors: Sequence[DetectorSpec], wavelength: float, peak_power: float
) -> tuple[float, float, float]:
    """Deterministic click census of one (wavelength, power) candidate.

    Enumerates all 16 (interceptor eigenstate x receiver spatial setting)
    combinations and returns (single-click fraction among the 8 basis-matched
    ones, double-click fraction among those, any-click fraction among the 8
    basis-mismatched ones).
    """
    same_single = 0
    same_double = 0
    cross_any = 0
    for eve_basis, eve_bit in _SETTINGS:
        pulse = BrightPulse(peak_power, wavelength, prepare_polarization(eve_basis, eve_bit))
        for bob_basis, bob_bit in _SETTINGS:
            spatial = prepare_spatial(bob_basis, bob_bit)
            result = classify(bsm_respond_bright(pulse, spatial, detectors))
            if eve_basis == bob_basis:
                same_single += result.is_single
                same_double += result.is_double
            else:
                cross_any += not result.is_no_click
    return same_single / 8.0, same_double / 8.0, cross_any / 8.0


def optimize_pulse(
    detectors: Sequence[DetectorSpec],
    wavelength_grid: Sequence[float],
    power_grid: Sequence[float],
) -> BlindingPlan:
    """Grid search for the best blinding working point.

    Candidates with any cross-basis click, or with no basis-matched click at
    all, are discarded. Among the rest the plan maximizes the single-click
    probability, breaking ties by lower double-click probability, then lower
    power, then grid order. Raises NoViablePlanError when nothing qualifies.
    """
    if len(wavelength_grid) == 0 or len(power_grid) == 0:
        raise ValidationError("wavelength and power grids must be non-empty")
    best: BlindingPlan | None = None
    best_key: tuple[float, float, float] | None = None
    for wl in wavelength_grid:
        for power in power_grid:
            if power <= 0.0:
                raise ValidationError(f"pulse powers must be > 0, got {power}")
            single, double, cross = evaluate_pulse(detectors, wl, power)
            if cross > 0.0 or single + double == 0.0:
                continue
            key = (-single, double, power)
            if best_key is None or key < best_key:
                best = BlindingPlan(wl, power, single, double, cross)
                best_key = key
    if best is None:
        raise NoViablePlanError(
            f"no (wavelength, power) candidate over {len(wavelength_grid)} wavelengths x "
            f"{len(power_grid)} powers clicks on basis-matched rounds while staying silent "
            "on basis-mismatched ones"
        )
    return best


def blinding_round(
    alice_pol: PolarizationQubit,
    bob_spatial: SpatialQubit,
    cfg: EveInterceptConfig,
    detectors: Sequence[DetectorSpec],
    rng,
) -> tuple[DetectionResult, Basis, int]:
    """One intercepted transmission: measure, resend bright, threshold clicks.

    Returns the click result plus the interceptor's measured basis and bit,
    which the leakage accounting compares against the legitimate record.
    """
    intercepted = intercept_resend(alice_pol, cfg, rng)
    result = classify(bsm_respond_bright(intercepted.pulse, bob_spatial, detectors))
    return result, intercepted.basis, intercepted.bit


@dataclass(frozen=True)
class BlindingStats:
    """Attack-facing summary of a blinding-mode transcript."""

    detection_rate: float
    qber: float | None
    double_click_rate: float
    eve_key_fraction: float


def eve_recovered_bits(transcript) -> np.ndarray:
    """Receiver bits the interceptor reconstructs for single-click slots.

    She combines her own measurement record with the public outcome: the
    announced Bell state fixes the XOR of her bit and the receiver's whenever
    their bases agree, which under a valid plan is the only way a blinded
    round clicks. Returns an array aligned with transcript.reported_slots().
    """
    slots = transcript.reported_slots()
    bits = np.empty(len(slots), dtype=np.int8)
    for i, s in enumerate(slots):
        basis = Basis(int(transcript.eve_basis[s]))
        outcome = BellOutcome(int(transcript.reported[s]))
        bits[i] = int(transcript.eve_bit[s]) ^ xor_from_outcome(outcome, basis)
    return bits


def blinding_session_stats(transcript) -> BlindingStats:
    """Aggregate detection rate, QBER, double-click rate, and the fraction of
    sifted receiver bits the interceptor recovered."""
    from .protocol import compute_qber, sift

    n = transcript.n_slots
    singles = transcript.reported_slots()
    doubles = int(np.count_nonzero(transcript.double_click))
    detection_rate = (len(singles) + doubles) / n
    sifted = sift(transcript)
    qber = compute_qber(transcript, sifted)
    if len(sifted) == 0:
        eve_fraction = 0.0
    else:
        recovered = eve_recovered_bits(transcript)
        at_sifted = {int(s): int(b) for s, b in zip(singles, recovered)}
        hits = sum(at_sifted[int(s)] == int(transcript.bob_bit[s]) for s in sifted)
        eve_fraction = hits / len(sifted)
    return BlindingStats(detection_rate, qber, doubles / n, eve_fraction)
