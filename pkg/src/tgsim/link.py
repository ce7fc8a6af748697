"""Simulated teleoperation link: latency, jitter, loss, blackout windows.

One Channel models one direction. Delivery times are forced non-decreasing
per direction (ordered transport with gaps surfacing as delay/loss), so a
deque suffices. All randomness comes from a per-channel seeded RNG; the
clock is simulated milliseconds, never wall time.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .protocol import Message


@dataclass(frozen=True)
class ChannelConfig:
    base_delay_ms: float = 30.0
    jitter_ms: float = 0.0
    loss_prob: float = 0.0
    blackout_windows: tuple[tuple[float, float], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.base_delay_ms < 0:
            raise ValueError("base_delay_ms must be >= 0")
        if self.jitter_ms != 0 and not (0 < self.jitter_ms < self.base_delay_ms):
            raise ValueError("jitter_ms must be 0 or below base_delay_ms")
        if not 0.0 <= self.loss_prob < 1.0:
            raise ValueError("loss_prob must be in [0, 1)")
        windows = tuple((float(a), float(b)) for a, b in self.blackout_windows)
        object.__setattr__(self, "blackout_windows", windows)
        prev_end = -float("inf")
        for a, b in windows:
            if b <= a or a < prev_end:
                raise ValueError("blackout windows must be sorted and non-overlapping")
            prev_end = b

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelConfig":
        return cls(
            base_delay_ms=float(d.get("base_delay_ms", 30.0)),
            jitter_ms=float(d.get("jitter_ms", 0.0)),
            loss_prob=float(d.get("loss_prob", 0.0)),
            blackout_windows=tuple(tuple(w) for w in d.get("blackout_windows", [])),
            seed=int(d.get("seed", 0)),
        )

    def to_dict(self) -> dict:
        return {
            "base_delay_ms": self.base_delay_ms,
            "jitter_ms": self.jitter_ms,
            "loss_prob": self.loss_prob,
            "blackout_windows": [list(w) for w in self.blackout_windows],
            "seed": self.seed,
        }


class Channel:
    """One direction of the lossy link."""

    def __init__(self, config: ChannelConfig, direction: str = "a2b"):
        self.config = config
        self.direction = direction
        self._rng = random.Random(f"{config.seed}:{direction}")
        self._queue: deque[tuple[float, Message]] = deque()
        self._last_delivery = -float("inf")
        self._last_send = -float("inf")
        self.now = 0.0
        self.sent = 0
        self.dropped = 0
        self.delivered = 0

    def _in_blackout(self, t: float) -> bool:
        # half-open windows: a delivery landing exactly at the end survives
        return any(a <= t < b for a, b in self.config.blackout_windows)

    def send(self, msg: Message, at: float) -> float | None:
        """Schedule delivery; returns the delivery time or None if dropped."""
        if at < self._last_send - 1e-9:
            raise ValueError("send times must be non-decreasing")
        if at < self.now - 1e-9:
            raise ValueError("cannot send in the past of the channel clock")
        self._last_send = at
        self.sent += 1
        # draw both variates regardless of outcome to keep the stream aligned
        loss_draw = self._rng.random()
        jitter = self._rng.uniform(-self.config.jitter_ms, self.config.jitter_ms) \
            if self.config.jitter_ms else 0.0
        if self.config.loss_prob and loss_draw < self.config.loss_prob:
            self.dropped += 1
            return None
        delivery = at + self.config.base_delay_ms + jitter
        if self._in_blackout(delivery):
            self.dropped += 1
            return None
        delivery = max(delivery, self._last_delivery)  # FIFO per direction
        self._last_delivery = delivery
        self._queue.append((delivery, msg))
        return delivery

    def advance_clock(self, to: float) -> list[Message]:
        """Release all deliveries with time <= to, in timestamp order."""
        if to < self.now:
            raise ValueError("clock must not run backwards")
        self.now = to
        out = []
        while self._queue and self._queue[0][0] <= to:
            out.append(self._queue.popleft()[1])
        self.delivered += len(out)
        return out

    def pending(self) -> list[tuple[float, Message]]:
        return list(self._queue)


@dataclass
class Link:
    """Bidirectional link: operator -> vehicle and vehicle -> operator."""

    config: ChannelConfig
    op_to_veh: Channel = field(init=False)
    veh_to_op: Channel = field(init=False)

    def __post_init__(self):
        self.op_to_veh = Channel(self.config, "op2veh")
        self.veh_to_op = Channel(self.config, "veh2op")
