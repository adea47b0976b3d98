"""Pulsed Geiger-mode avalanche diode simulator.

One bit per trigger period: 1 when the diode fires, 0 otherwise. Firing
combines three independent mechanisms per pulse (field-assisted tunneling,
thermal excitation, after-pulsing from trapped carriers) by logical OR.
Two artifact channels force zeros: a dead-time window after each detection
and a periodic self-protection burst.

All randomness is counter-based (see rng.py), so a stream is a pure
function of (config, n_pulses) no matter how generation is chunked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitstream import BitStream
from .errors import InvalidArgumentError, UnsupportedConfigError
from .rng import uniform_block


@dataclass(frozen=True)
class TunnelingModel:
    """Field-assisted tunneling probability curve.

    P(v) = 0 for v <= V0, else A * exp(-B / (v - V0)). A is the asymptotic
    probability scale, B controls steepness, V0 is the critical voltage
    below which tunneling cannot fire the diode.
    """
    A: float
    B: float
    V0: float

    def __post_init__(self):
        if not (0 < self.A <= 1):
            raise InvalidArgumentError(f"A must be in (0, 1], got {self.A}")
        if not (self.B > 0):
            raise InvalidArgumentError(f"B must be positive, got {self.B}")
        if not (self.V0 > 0):
            raise InvalidArgumentError(f"V0 must be positive, got {self.V0}")


def tunneling_probability(model: TunnelingModel, v: float) -> float:
    """Per-pulse tunneling probability at peak bias v volts."""
    if not math.isfinite(v):
        raise InvalidArgumentError(f"bias voltage must be finite, got {v}")
    if v <= model.V0:
        return 0.0
    # A <= 1 keeps the value a probability without clamping
    return model.A * math.exp(-model.B / (v - model.V0))


@dataclass(frozen=True)
class SourceConfig:
    """Physical and electrical parameters of the simulated source.

    Args:
        model: tunneling curve parameters.
        u_high: pulse peak voltage (operating point).
        delta_u: fixed high-to-low swing of the bias pulse; the low level
            sits below breakdown so nothing fires between triggers. Carried
            for reporting, not used by the per-pulse law.
        pulse_freq: trigger frequency in hertz.
        thermal_rate: thermal dark counts per second; per-pulse probability
            is thermal_rate / pulse_freq.
        afterpulse_prob: probability of a trap-induced fire on the pulse
            immediately after a detection.
        afterpulse_decay: per-pulse geometric decay of that probability.
        deadtime_pulses: pulses forced to 0 after each detection.
        protect_period: pulses between self-protection activations
            (0 disables the artifact).
        protect_duration: length of each forced-zero protection burst.
        rng_seed: 64-bit seed for the counter-based stream.
    """
    model: TunnelingModel
    u_high: float
    delta_u: float = 4.0
    pulse_freq: float = 50e6
    thermal_rate: float = 500.0
    afterpulse_prob: float = 0.0
    afterpulse_decay: float = 0.5
    deadtime_pulses: int = 0
    protect_period: int = 0
    protect_duration: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.u_high):
            raise InvalidArgumentError("u_high must be finite")
        if self.pulse_freq <= 0:
            raise InvalidArgumentError("pulse_freq must be positive")
        p_th = self.thermal_rate / self.pulse_freq
        if not (0 <= p_th < 1):
            raise InvalidArgumentError(
                f"thermal_rate/pulse_freq must lie in [0, 1), got {p_th}")
        if not (0 <= self.afterpulse_prob < 1):
            raise InvalidArgumentError("afterpulse_prob must lie in [0, 1)")
        if not (0 < self.afterpulse_decay < 1):
            raise InvalidArgumentError("afterpulse_decay must lie in (0, 1)")
        for name in ("deadtime_pulses", "protect_period", "protect_duration"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be nonnegative")

    @property
    def p_tunnel(self) -> float:
        return tunneling_probability(self.model, self.u_high)

    @property
    def p_thermal(self) -> float:
        return self.thermal_rate / self.pulse_freq


def _protect_mask(start: int, count: int, period: int, duration: int) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.int64)
    return (idx % period) < duration


def simulate_pulse_train(config: SourceConfig, n_pulses: int,
                         chunk_bits: int = 1 << 24) -> BitStream:
    """Simulate n_pulses trigger periods and return one bit per period.

    Per pulse i the emission probability is
    1 - (1 - p_tun)(1 - p_th)(1 - p_ap(i)), with p_ap decaying
    geometrically in the distance from the last detection. Pulses inside a
    dead-time window or a protection burst emit 0 unconditionally. Output
    is bit-identical for any chunk_bits.
    """
    n_pulses = int(n_pulses)
    if n_pulses < 0:
        raise InvalidArgumentError("n_pulses must be nonnegative")
    if chunk_bits < 8 or chunk_bits % 8:
        raise InvalidArgumentError("chunk_bits must be a positive multiple of 8")

    p0 = 1.0 - (1.0 - config.p_tunnel) * (1.0 - config.p_thermal)
    memoryless = config.afterpulse_prob == 0 and config.deadtime_pulses == 0

    if memoryless:
        pieces = []
        for start in range(0, n_pulses, chunk_bits):
            count = min(chunk_bits, n_pulses - start)
            u = uniform_block(config.rng_seed, start, count)
            bits = (u < p0).astype(np.uint8)
            if config.protect_period > 0:
                bits[_protect_mask(start, count, config.protect_period,
                                   config.protect_duration)] = 0
            pieces.append(BitStream.from_bits(bits))
        return BitStream.concat(pieces) if pieces else BitStream.zeros(0)

    return _simulate_with_memory(config, n_pulses, p0, chunk_bits)


def _simulate_with_memory(config, n_pulses, p0, chunk_bits):
    # dead time and after-pulsing couple each pulse to the detection
    # history, so this path walks the train sequentially; it still reads
    # the same counter-indexed draws as the vectorized path
    out = np.zeros(n_pulses, dtype=np.uint8)
    ap = config.afterpulse_prob
    decay = config.afterpulse_decay
    period, duration = config.protect_period, config.protect_duration
    dead_remaining = 0
    last_det = -1
    u = np.empty(0)
    chunk_start = 0
    for i in range(n_pulses):
        if i >= chunk_start + u.size:
            chunk_start = i
            u = uniform_block(config.rng_seed, chunk_start,
                              min(chunk_bits, n_pulses - chunk_start))
        if period > 0 and (i % period) < duration:
            if dead_remaining:
                dead_remaining -= 1
            continue
        if dead_remaining:
            dead_remaining -= 1
            continue
        p = p0
        if ap > 0 and last_det >= 0:
            p = 1.0 - (1.0 - p0) * (1.0 - ap * decay ** (i - last_det - 1))
        if u[i - chunk_start] < p:
            out[i] = 1
            last_det = i
            dead_remaining = config.deadtime_pulses
    return BitStream.from_bits(out)


def effective_mean(config: SourceConfig) -> float:
    """Closed-form long-run mean bit value.

    Detections form a renewal process: a fire (prob p_eff per live pulse)
    is followed by deadtime_pulses forced zeros, giving mean cycle length
    1/p_eff + d and rate p_eff / (1 + p_eff * d).
    """
    if config.afterpulse_prob > 0 or config.protect_period > 0:
        raise UnsupportedConfigError(
            "no closed form with after-pulsing or protection bursts enabled; "
            "estimate the mean empirically instead")
    p_eff = 1.0 - (1.0 - config.p_tunnel) * (1.0 - config.p_thermal)
    return p_eff / (1.0 + p_eff * config.deadtime_pulses)
