"""Covert reporting channel inside the untrusted measurement unit.

The malicious controller of the measurement unit sees far more detections
than the receiver expects (its real detectors are better than advertised) and
is free to stay silent about any of them. It leaks the receiver's encoder
bits by choosing WHICH detections to announce: the slot-index gap between
consecutive announcements is made even or odd according to the bit attached
to the earlier announcement, optionally XOR-masked by a pre-shared key
stream. The outside accomplice recovers the bits from the public announcement
indices alone. Announced Bell outcomes are always the honest measurement
results, so the scheme adds no errors.

Rate bookkeeping: with per-slot detection probability p and uniform target
parities, the mean gap to the next usable detection is 2/p (even target) or
2/p - 1 (odd target), giving a top announcement rate of 2p/(4-p). Thinning
each parity-valid candidate with acceptance q scales p to p*q inside that
formula, which is inverted by thinning_acceptance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Protocol, Sequence

import numpy as np

from .errors import InfeasibleRateError, ValidationError


class Parity(IntEnum):
    EVEN = 0
    ODD = 1


class KeyStream(Protocol):
    def next_bit(self) -> int: ...


class ParityKeyStream:
    """Pre-shared deterministic bit stream; both ends draw the same seed.

    One bit is consumed per announced event. The generator is PCG64, so a
    64-bit seed fully reproduces the stream.
    """

    def __init__(self, seed: int) -> None:
        self.seed = seed
        self.position = 0
        self._rng = np.random.Generator(np.random.PCG64(seed))

    def next_bit(self) -> int:
        self.position += 1
        return int(self._rng.integers(0, 2))


class NullKeyStream:
    """Keying disabled: every key bit is 0, exposing the raw parity rule."""

    def __init__(self) -> None:
        self.position = 0

    def next_bit(self) -> int:
        self.position += 1
        return 0


def required_parity(bit: int, key_bit: int) -> Parity:
    """Gap parity that encodes `bit` under `key_bit`: with key 0, bit 1 needs
    an even gap and bit 0 an odd gap; key 1 flips the convention."""
    return Parity.EVEN if (bit ^ key_bit) == 1 else Parity.ODD


def achievable_report_rate(detection_prob: float) -> float:
    """Top long-run announcement rate 2p/(4-p) for uniform encoded bits."""
    if not 0.0 < detection_prob <= 1.0:
        raise ValidationError(f"detection probability must be in (0,1], got {detection_prob}")
    return 2.0 * detection_prob / (4.0 - detection_prob)


def thinning_acceptance(detection_prob: float, target_report_rate: float) -> float:
    """Acceptance probability q that brings the announcement rate down to the
    target: q = 4*r / (p*(2+r)). Raises when the target exceeds 2p/(4-p)."""
    if not 0.0 < detection_prob <= 1.0:
        raise ValidationError(f"detection probability must be in (0,1], got {detection_prob}")
    if target_report_rate <= 0.0:
        raise ValidationError(f"target report rate must be > 0, got {target_report_rate}")
    q = 4.0 * target_report_rate / (detection_prob * (2.0 + target_report_rate))
    if q > 1.0 + 1e-12:
        raise InfeasibleRateError(
            f"target rate {target_report_rate} exceeds achievable rate "
            f"{achievable_report_rate(detection_prob)} at detection probability "
            f"{detection_prob} (acceptance q = {q:.4f} > 1)"
        )
    return min(q, 1.0)


def attack_feasible(transmittance: float, eta_true: float, eta_expected: float) -> bool:
    """Whether the covert channel can match the receiver's expected rate:
    2p/(4-p) >= T*eta_expected with p = T*eta_true."""
    for name, v in (("transmittance", transmittance), ("eta_true", eta_true),
                    ("eta_expected", eta_expected)):
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name} must be in [0,1], got {v}")
    p = transmittance * eta_true
    expected = transmittance * eta_expected
    if p <= 0.0:
        return expected <= 0.0
    return achievable_report_rate(p) >= expected


@dataclass
class CovertReporter:
    """Sequential announce/stay-silent state machine for the malicious unit.

    The first usable detection is always announced (nothing pending yet).
    Afterwards a detection is announced only when the gap since the last
    announcement has the parity that encodes the pending bit under the
    current key bit, and an independent thinning trial with probability
    `thinning_prob` accepts it. Announcing stores the new slot and that
    slot's receiver bit, and draws the key bit for the next gap.
    """

    thinning_prob: float
    key_stream: KeyStream = field(default_factory=NullKeyStream)
    last_reported_slot: int | None = None
    pending_bit: int | None = None
    gap_key_bit: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.thinning_prob <= 1.0:
            raise ValidationError(f"thinning_prob must be in (0,1], got {self.thinning_prob}")

    @classmethod
    def for_rates(
        cls,
        detection_prob: float,
        target_report_rate: float,
        key_stream: KeyStream,
    ) -> "CovertReporter":
        """Build a reporter whose long-run rate matches the target; raises
        InfeasibleRateError when the target is out of reach."""
        q = thinning_acceptance(detection_prob, target_report_rate)
        return cls(thinning_prob=q, key_stream=key_stream)

    def observe(self, slot: int, detected: bool, bob_bit: int | None, rng) -> bool:
        """Process one slot; returns True when this detection is announced.

        A detection with unknown receiver bit (failed encoder readout) is
        never announced: it could not be encoded onto the next gap.
        """
        if not detected or bob_bit is None:
            return False
        if self.last_reported_slot is None:
            self._announce(slot, bob_bit)
            return True
        gap = slot - self.last_reported_slot
        if gap <= 0:
            raise ValidationError("slots must be processed in ascending order")
        assert self.pending_bit is not None and self.gap_key_bit is not None
        if Parity(gap % 2) != required_parity(self.pending_bit, self.gap_key_bit):
            return False
        if self.thinning_prob < 1.0 and not rng.random() < self.thinning_prob:
            return False
        self._announce(slot, bob_bit)
        return True

    def _announce(self, slot: int, bob_bit: int) -> None:
        self.last_reported_slot = slot
        self.pending_bit = bob_bit
        self.gap_key_bit = self.key_stream.next_bit()


def eve_decode(reported_slots: Sequence[int], key_stream: KeyStream) -> list[int]:
    """Recover the encoded bits from announced slot indices.

    m announcements carry m-1 bits: for each consecutive pair the gap parity
    gives (even -> 1, odd -> 0), XORed with that event's key bit. The key
    stream must start from the same seed position the reporter used.
    """
    slots = list(reported_slots)
    for a, b in zip(slots, slots[1:]):
        if b <= a:
            raise ValidationError(f"reported slots must be strictly increasing, got {a} then {b}")
    bits = []
    for a, b in zip(slots, slots[1:]):
        key_bit = key_stream.next_bit()
        gap = b - a
        bits.append((1 if gap % 2 == 0 else 0) ^ key_bit)
    return bits
