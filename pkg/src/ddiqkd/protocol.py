"""Session orchestration: honest runs and the three attack configurations.

A session is slot-synchronous: per slot the sender draws a BB84 basis/bit and
emits one polarization-encoded photon, the lossy channel forwards it, the
receiver draws his own basis/bit and encodes them on the photon's spatial
mode, and the measurement unit announces (or withholds) a Bell outcome. The
transcript records ground truth per slot; the public view is the subset an
outside observer sees. Sifting keeps announced single clicks where the bases
matched, double clicks are discarded from key material but counted.

Determinism contract: a session is fully determined by (config, seed). Party
settings and arrivals are drawn in bulk in a fixed order, then the
mode-specific loop consumes scalar draws slot by slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, Iterator, Union

import numpy as np

from .analysis import DetectabilityReport, PublicView, detectability_report
from .blinding import BlindingPlan, blinding_session_stats, blinding_round, optimize_pulse
from .channel import ChannelSpec, EveInterceptConfig, TrojanProbe, eve_measure_resend, trojan_readout
from .covert import CovertReporter, NullKeyStream, ParityKeyStream, eve_decode
from .devices import (
    DEFAULT_WAVELENGTH_NM,
    DetectorSpec,
    classify,
    make_detectors,
    sample_clicks,
    sample_outcome,
)
from .errors import ConfigError, InfeasibleRateError, ValidationError
from .states import (
    Basis,
    BellOutcome,
    bell_probabilities,
    prepare_polarization,
    prepare_spatial,
    tensor,
    xor_from_outcome,
)

DOUBLE_CLICK_POLICY = "discard_and_count"


@dataclass(frozen=True)
class HonestMode:
    """No adversary; the measurement unit announces what it measures."""

    kind: ClassVar[str] = "honest"


@dataclass(frozen=True)
class CovertAttackMode:
    """Malicious measurement unit leaking receiver bits through gap parity.

    The unit's real detectors have efficiency eta_true, typically far above
    the eta_expected the receiver was sold; the surplus detections are the
    silence budget the encoding spends. The encoder readout probe must be
    enabled, otherwise the unit never learns the bits it is supposed to leak.
    target_report_rate defaults to the rate the receiver expects,
    transmittance * eta_expected.
    """

    kind: ClassVar[str] = "covert"
    eta_true: float = 0.9
    key_seed: int = 0
    keyed: bool = True
    target_report_rate: float | None = None
    trojan: TrojanProbe = field(default_factory=lambda: TrojanProbe(enabled=True))

    def __post_init__(self) -> None:
        if not 0.0 < self.eta_true <= 1.0:
            raise ValidationError(f"eta_true must be in (0,1], got {self.eta_true}")
        if self.target_report_rate is not None and self.target_report_rate <= 0.0:
            raise ValidationError(
                f"target_report_rate must be > 0, got {self.target_report_rate}"
            )
        if not self.trojan.enabled:
            raise ValidationError("covert attack requires the encoder readout probe enabled")


@dataclass(frozen=True)
class BlindingMode:
    """Bright-pulse intercept-resend against blinded detectors.

    Either a fixed (wavelength, pulse_power) working point, or optimize=True
    to grid-search one; enabled=False degrades to the honest path so that
    attack-off runs are seed-for-seed identical to honest sessions.
    """

    kind: ClassVar[str] = "blinding"
    enabled: bool = True
    pulse_power: float = 2.0
    wavelength: float = DEFAULT_WAVELENGTH_NM
    optimize: bool = False
    wavelength_grid: tuple[float, ...] = ()
    power_grid: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.optimize:
            if len(self.wavelength_grid) == 0 or len(self.power_grid) == 0:
                raise ValidationError("optimize=True needs non-empty wavelength and power grids")
        elif self.enabled and self.pulse_power <= 0.0:
            raise ValidationError(f"pulse_power must be > 0, got {self.pulse_power}")


@dataclass(frozen=True)
class InterceptResendMode:
    """Textbook single-photon intercept-resend on the sender-receiver link;
    the error-rate baseline the covert and blinding attacks are measured
    against."""

    kind: ClassVar[str] = "intercept_resend"


Mode = Union[HonestMode, CovertAttackMode, BlindingMode, InterceptResendMode]


@dataclass(frozen=True)
class SessionConfig:
    """Everything a session run depends on; hash of this plus the seed pins
    the outputs byte for byte.

    basis_choice_prob is each party's probability of picking the diagonal
    basis; bob_bit_bias is the receiver's probability of encoding bit 1 (0.5
    unless exercising degenerate scenarios); eta_expected is the efficiency
    the receiver believes his measurement unit has.
    """

    n_slots: int = 10_000
    seed: int = 0
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    detectors: tuple[DetectorSpec, ...] = field(default_factory=make_detectors)
    eta_expected: float = 0.2
    basis_choice_prob: float = 0.5
    bob_bit_bias: float = 0.5
    signal_wavelength_nm: float = DEFAULT_WAVELENGTH_NM
    alpha: float = 0.01
    double_click_policy: str = DOUBLE_CLICK_POLICY
    mode: Mode = field(default_factory=HonestMode)

    def __post_init__(self) -> None:
        if self.n_slots < 1:
            raise ValidationError(f"n_slots must be >= 1, got {self.n_slots}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if len(self.detectors) != 4:
            raise ValidationError(f"need exactly 4 detectors, got {len(self.detectors)}")
        for name in ("eta_expected", "basis_choice_prob", "bob_bit_bias"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must be in [0,1], got {v}")
        if self.signal_wavelength_nm <= 0.0:
            raise ValidationError(f"signal_wavelength_nm must be > 0, got {self.signal_wavelength_nm}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must be in (0,1), got {self.alpha}")
        if self.double_click_policy != DOUBLE_CLICK_POLICY:
            raise ValidationError(
                f"unsupported double_click_policy {self.double_click_policy!r}; "
                f"only {DOUBLE_CLICK_POLICY!r} is implemented"
            )

    def expected_report_rate(self) -> float:
        """Announcements per slot the receiver expects from an honest unit."""
        return self.channel.transmittance * self.eta_expected


@dataclass(frozen=True)
class SlotRecord:
    """One slot of ground truth, row view over the columnar transcript."""

    slot: int
    alice_basis: Basis
    alice_bit: int
    bob_basis: Basis
    bob_bit: int
    arrived: bool
    detected: bool
    reported: BellOutcome | None
    double_click: bool
    eve_basis: Basis | None = None
    eve_bit: int | None = None


@dataclass
class Transcript:
    """Columnar per-slot record of a session, ground truth included.

    reported holds the announced Bell outcome index or -1; eve_basis/eve_bit
    hold the in-channel adversary's measurement record or -1 where absent.
    detected is the ground-truth flag that the unit registered the photon,
    whether or not it announced.
    """

    n_slots: int
    alice_basis: np.ndarray
    alice_bit: np.ndarray
    bob_basis: np.ndarray
    bob_bit: np.ndarray
    arrived: np.ndarray
    detected: np.ndarray
    reported: np.ndarray
    double_click: np.ndarray
    eve_basis: np.ndarray
    eve_bit: np.ndarray

    def reported_slots(self) -> np.ndarray:
        return np.nonzero(self.reported >= 0)[0]

    def record(self, slot: int) -> SlotRecord:
        out = int(self.reported[slot])
        eb = int(self.eve_basis[slot])
        return SlotRecord(
            slot=slot,
            alice_basis=Basis(int(self.alice_basis[slot])),
            alice_bit=int(self.alice_bit[slot]),
            bob_basis=Basis(int(self.bob_basis[slot])),
            bob_bit=int(self.bob_bit[slot]),
            arrived=bool(self.arrived[slot]),
            detected=bool(self.detected[slot]),
            reported=BellOutcome(out) if out >= 0 else None,
            double_click=bool(self.double_click[slot]),
            eve_basis=Basis(eb) if eb >= 0 else None,
            eve_bit=int(self.eve_bit[slot]) if eb >= 0 else None,
        )

    def records(self) -> Iterator[SlotRecord]:
        return (self.record(i) for i in range(self.n_slots))

    def public_view(self) -> PublicView:
        singles = self.reported_slots()
        return PublicView(
            n_slots=self.n_slots,
            reported_slots=singles,
            outcomes=self.reported[singles].copy(),
            bob_basis_at_reported=self.bob_basis[singles].copy(),
            double_click_slots=np.nonzero(self.double_click)[0],
        )


@dataclass(frozen=True)
class SessionReport:
    """Aggregate session outcome plus the monitor summary."""

    mode: str
    sent: int
    arrived: int
    reported: int
    sifted: int
    qber: float | None
    key_rate: float
    reported_rate: float
    double_click_rate: float
    eve_leak_fraction: float
    expected_report_rate: float
    detectability: DetectabilityReport
    plan: BlindingPlan | None = None


# bit-relation lookup derived from the single authoritative rule
_XOR_TABLE = np.array(
    [[xor_from_outcome(o, b) for o in BellOutcome] for b in Basis], dtype=np.int8
)

_JOINT_PROBS: dict[tuple[int, int, int, int], tuple[float, ...]] = {}


def _joint_probs(ab: int, abit: int, bb: int, bbit: int) -> tuple[float, ...]:
    """Bell outcome probabilities for a (sender setting, receiver setting)
    pair, cached: only 16 distinct preparations exist."""
    key = (ab, abit, bb, bbit)
    probs = _JOINT_PROBS.get(key)
    if probs is None:
        state = tensor(prepare_polarization(Basis(ab), abit), prepare_spatial(Basis(bb), bbit))
        probs = bell_probabilities(state)
        _JOINT_PROBS[key] = probs
    return probs


def binary_entropy(q: float) -> float:
    if q <= 0.0 or q >= 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def key_rate(qber: float, sifted_fraction: float) -> float:
    """Asymptotic one-way rate per slot: sifted_fraction * max(0, 1 - 2 H2(q)).

    QBER estimates above 0.5 already yield rate 0, so q is clamped there.
    """
    if not 0.0 <= qber <= 1.0:
        raise ValidationError(f"qber must be in [0,1], got {qber}")
    if not 0.0 <= sifted_fraction <= 1.0:
        raise ValidationError(f"sifted_fraction must be in [0,1], got {sifted_fraction}")
    q = min(qber, 0.5)
    return sifted_fraction * max(0.0, 1.0 - 2.0 * binary_entropy(q))


def sift(transcript: Transcript) -> np.ndarray:
    """Slots of announced single clicks where the parties' bases agree."""
    slots = transcript.reported_slots()
    same = transcript.alice_basis[slots] == transcript.bob_basis[slots]
    return slots[same]


def compute_qber(transcript: Transcript, sifted_slots: np.ndarray) -> float | None:
    """Fraction of sifted events where the outcome-implied sender bit differs
    from the actual one; None when nothing was sifted."""
    if len(sifted_slots) == 0:
        return None
    outcomes = transcript.reported[sifted_slots]
    bases = transcript.bob_basis[sifted_slots]
    inferred = transcript.bob_bit[sifted_slots] ^ _XOR_TABLE[bases, outcomes]
    return float(np.mean(inferred != transcript.alice_bit[sifted_slots]))


def _draw_settings(config: SessionConfig, rng) -> Transcript:
    """Bulk-draw party settings and arrivals in a fixed order."""
    n = config.n_slots
    return Transcript(
        n_slots=n,
        alice_basis=(rng.random(n) < config.basis_choice_prob).astype(np.int8),
        alice_bit=rng.integers(0, 2, size=n, dtype=np.int8),
        bob_basis=(rng.random(n) < config.basis_choice_prob).astype(np.int8),
        bob_bit=(rng.random(n) < config.bob_bit_bias).astype(np.int8),
        arrived=rng.random(n) < config.channel.transmittance,
        detected=np.zeros(n, dtype=bool),
        reported=np.full(n, -1, dtype=np.int8),
        double_click=np.zeros(n, dtype=bool),
        eve_basis=np.full(n, -1, dtype=np.int8),
        eve_bit=np.full(n, -1, dtype=np.int8),
    )


def _record_clicks(t: Transcript, slot: int, result) -> None:
    if result.is_single:
        t.detected[slot] = True
        t.reported[slot] = int(result.outcome)
    elif result.is_double:
        t.detected[slot] = True
        t.double_click[slot] = True


def _dark_only_pattern(darks, rng):
    return tuple(p > 0.0 and rng.random() < p for p in darks)


def _run_honest(config: SessionConfig, t: Transcript, rng) -> None:
    wl = config.signal_wavelength_nm
    effs = [d.efficiency_at(wl) for d in config.detectors]
    darks = [d.dark_count_prob for d in config.detectors]
    any_dark = any(p > 0.0 for p in darks)
    slots = range(t.n_slots) if any_dark else np.nonzero(t.arrived)[0]
    for slot in slots:
        if t.arrived[slot]:
            probs = _joint_probs(
                int(t.alice_basis[slot]), int(t.alice_bit[slot]),
                int(t.bob_basis[slot]), int(t.bob_bit[slot]),
            )
            pattern = sample_clicks(probs, effs, darks, rng)
        else:
            pattern = _dark_only_pattern(darks, rng)
        _record_clicks(t, slot, classify(pattern))


def _covert_reporter(config: SessionConfig, mode: CovertAttackMode) -> CovertReporter:
    """Feasibility gate: construction fails before any sampling happens."""
    transmittance = config.channel.transmittance
    target = mode.target_report_rate
    if target is None:
        target = transmittance * config.eta_expected
    p_candidate = transmittance * mode.eta_true * mode.trojan.readout_success_prob
    if p_candidate <= 0.0:
        raise InfeasibleRateError(
            "covert reporting needs a nonzero per-slot detection probability "
            f"(transmittance {transmittance}, eta_true {mode.eta_true}, "
            f"readout success {mode.trojan.readout_success_prob})"
        )
    key_stream = ParityKeyStream(mode.key_seed) if mode.keyed else NullKeyStream()
    return CovertReporter.for_rates(p_candidate, target, key_stream)


def _run_covert(
    config: SessionConfig, mode: CovertAttackMode, reporter: CovertReporter, t: Transcript, rng
) -> None:
    detected = t.arrived & (rng.random(t.n_slots) < mode.eta_true)
    t.detected[:] = detected
    for slot in np.nonzero(detected)[0]:
        readout = trojan_readout(
            Basis(int(t.bob_basis[slot])), int(t.bob_bit[slot]), mode.trojan, rng
        )
        known_bit = readout[1] if readout is not None else None
        if reporter.observe(int(slot), True, known_bit, rng):
            probs = _joint_probs(
                int(t.alice_basis[slot]), int(t.alice_bit[slot]),
                int(t.bob_basis[slot]), int(t.bob_bit[slot]),
            )
            # outcomes pass through from honest measurement, never altered
            t.reported[slot] = sample_outcome(probs, rng.random())


def _run_blinding(
    config: SessionConfig, mode: BlindingMode, t: Transcript, rng
) -> BlindingPlan | None:
    if mode.optimize:
        plan = optimize_pulse(config.detectors, mode.wavelength_grid, mode.power_grid)
        wavelength, power = plan.wavelength, plan.peak_power
    else:
        plan = None
        wavelength, power = mode.wavelength, mode.pulse_power
    cfg = EveInterceptConfig(enabled=True, pulse_power=power, wavelength=wavelength)
    for slot in np.nonzero(t.arrived)[0]:
        alice_pol = prepare_polarization(Basis(int(t.alice_basis[slot])), int(t.alice_bit[slot]))
        bob_spatial = prepare_spatial(Basis(int(t.bob_basis[slot])), int(t.bob_bit[slot]))
        result, eve_basis, eve_bit = blinding_round(
            alice_pol, bob_spatial, cfg, config.detectors, rng
        )
        t.eve_basis[slot] = int(eve_basis)
        t.eve_bit[slot] = eve_bit
        _record_clicks(t, slot, result)
    return plan


def _run_intercept(config: SessionConfig, t: Transcript, rng) -> None:
    wl = config.signal_wavelength_nm
    effs = [d.efficiency_at(wl) for d in config.detectors]
    darks = [d.dark_count_prob for d in config.detectors]
    any_dark = any(p > 0.0 for p in darks)
    slots = range(t.n_slots) if any_dark else np.nonzero(t.arrived)[0]
    for slot in slots:
        if t.arrived[slot]:
            alice_pol = prepare_polarization(
                Basis(int(t.alice_basis[slot])), int(t.alice_bit[slot])
            )
            basis, bit, _ = eve_measure_resend(alice_pol, rng)
            t.eve_basis[slot] = int(basis)
            t.eve_bit[slot] = bit
            probs = _joint_probs(
                int(basis), bit, int(t.bob_basis[slot]), int(t.bob_bit[slot])
            )
            pattern = sample_clicks(probs, effs, darks, rng)
        else:
            pattern = _dark_only_pattern(darks, rng)
        _record_clicks(t, slot, classify(pattern))


def _leak_fraction(config: SessionConfig, t: Transcript) -> float:
    """Fraction of the relevant secret the in-channel or in-unit adversary
    actually recovered, from ground truth."""
    mode = config.mode
    if isinstance(mode, CovertAttackMode):
        slots = t.reported_slots()
        m = len(slots)
        if m == 0:
            return 0.0
        stream = ParityKeyStream(mode.key_seed) if mode.keyed else NullKeyStream()
        decoded = eve_decode([int(s) for s in slots], stream)
        hits = sum(int(b) == int(t.bob_bit[s]) for b, s in zip(decoded, slots))
        return hits / m
    if isinstance(mode, BlindingMode) and mode.enabled:
        return blinding_session_stats(t).eve_key_fraction
    if isinstance(mode, InterceptResendMode):
        sifted = sift(t)
        if len(sifted) == 0:
            return 0.0
        return float(np.mean(t.eve_bit[sifted] == t.alice_bit[sifted]))
    return 0.0


def build_report(
    config: SessionConfig, transcript: Transcript, plan: BlindingPlan | None = None
) -> SessionReport:
    view = transcript.public_view()
    sifted = sift(transcript)
    qber = compute_qber(transcript, sifted)
    n = config.n_slots
    reported = view.announced_events
    rate = 0.0 if qber is None else key_rate(qber, len(sifted) / n)
    return SessionReport(
        mode=config.mode.kind,
        sent=n,
        arrived=int(np.count_nonzero(transcript.arrived)),
        reported=reported,
        sifted=int(len(sifted)),
        qber=qber,
        key_rate=rate,
        reported_rate=reported / n,
        double_click_rate=len(view.double_click_slots) / n,
        eve_leak_fraction=_leak_fraction(config, transcript),
        expected_report_rate=config.expected_report_rate(),
        detectability=detectability_report(view, config.expected_report_rate(), config.alpha),
        plan=plan,
    )


def run_session(config: SessionConfig) -> tuple[Transcript, SessionReport]:
    """Simulate one session; deterministic in (config, seed).

    Raises InfeasibleRateError before simulating anything when a covert
    configuration cannot reach its target announcement rate. Dark counts are
    modeled on the honest and intercept-resend paths only; the covert and
    blinding units are adversary-controlled hardware whose spurious counts
    the adversary suppresses.
    """
    mode = config.mode
    reporter = _covert_reporter(config, mode) if isinstance(mode, CovertAttackMode) else None
    rng = np.random.Generator(np.random.PCG64(config.seed))
    t = _draw_settings(config, rng)
    plan: BlindingPlan | None = None
    if isinstance(mode, HonestMode):
        _run_honest(config, t, rng)
    elif isinstance(mode, CovertAttackMode):
        assert reporter is not None
        _run_covert(config, mode, reporter, t, rng)
    elif isinstance(mode, BlindingMode):
        if mode.enabled:
            plan = _run_blinding(config, mode, t, rng)
        else:
            _run_honest(config, t, rng)
    elif isinstance(mode, InterceptResendMode):
        _run_intercept(config, t, rng)
    else:
        raise ConfigError(f"unknown session mode: {mode!r}")
    return t, build_report(config, t, plan)
