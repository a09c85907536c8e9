"""Decoder interface and a scripted decoder that replays a hypothesis timeline.

A real network-attached recognizer only has to provide the same three
methods as :class:`SimulatedDecoder`::

    poll(now_ms)       -> latest PartialHypothesis available at now_ms, or None
    terminate(now_ms)  -> stop decoding; later emissions are suppressed
    finalize()         -> mark the decoder as having run to end of audio

The simulator never touches wall time.  An entry ``(t, text)`` of the
timeline becomes available at ``round(t * rtf)`` ms of virtual time.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence, Tuple

from .errors import DataError, DecoderStateError


class DecoderState(enum.Enum):
    RUNNING = "running"
    TERMINATED = "terminated"
    FINISHED = "finished"


@dataclass(frozen=True)
class PartialHypothesis:
    language: str
    available_at_ms: int
    text: str
    is_final: bool


class Decoder(Protocol):
    language: str

    def poll(self, now_ms: int) -> Optional[PartialHypothesis]: ...

    def terminate(self, now_ms: int) -> None: ...

    def finalize(self) -> None: ...


class SimulatedDecoder:
    def __init__(self, language: str, timeline: Sequence[Tuple[int, str]], duration_ms: int,
                 rtf: float = 1.0):
        if rtf <= 0:
            raise DataError(f"real-time factor must be positive, got {rtf}")
        times = [int(t) for t, _ in timeline]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DataError(f"{language}: timeline times must be strictly increasing")
        self.language = language
        self.duration_ms = int(duration_ms)
        self.rtf = float(rtf)
        self._entries = [
            PartialHypothesis(language, int(round(t * self.rtf)), s, i == len(timeline) - 1)
            for i, (t, s) in enumerate(timeline)]
        self.state = DecoderState.RUNNING
        self.termination_time_ms: Optional[int] = None
        self._cursor = -1
        self._last_poll: Optional[int] = None
        self.emissions: List[PartialHypothesis] = []

    def poll(self, now_ms: int) -> Optional[PartialHypothesis]:
        if self.state is DecoderState.TERMINATED:
            raise DecoderStateError(f"{self.language} decoder polled after termination")
        if self._last_poll is not None and now_ms < self._last_poll:
            raise DecoderStateError(f"{self.language} decoder polled back in time "
                                    f"({now_ms} < {self._last_poll})")
        self._last_poll = now_ms
        while (self._cursor + 1 < len(self._entries)
               and self._entries[self._cursor + 1].available_at_ms <= now_ms):
            self._cursor += 1
            self.emissions.append(self._entries[self._cursor])
        return self._entries[self._cursor] if self._cursor >= 0 else None

    @property
    def final_available_ms(self) -> int:
        return self._entries[-1].available_at_ms if self._entries else 0

    def terminate(self, now_ms: int) -> None:
        if self.state is not DecoderState.RUNNING:
            raise DecoderStateError(f"cannot terminate a {self.state.value} {self.language} decoder")
        if now_ms > self.duration_ms:
            raise DecoderStateError("termination after end of audio")
        self.state = DecoderState.TERMINATED
        self.termination_time_ms = int(now_ms)

    def finalize(self) -> None:
        if self.state is DecoderState.RUNNING:
            self.state = DecoderState.FINISHED

    @property
    def saved_ms(self) -> int:
        """Audio this decoder did not have to process because it was terminated."""
        if self.state is not DecoderState.TERMINATED:
            return 0
        if self._entries and self.termination_time_ms >= self.final_available_ms:
            return 0
        return self.duration_ms - self.termination_time_ms

    @property
    def processed_ms(self) -> int:
        return self.duration_ms - self.saved_ms


def decoder_poll(handle: SimulatedDecoder, now_ms: int) -> Optional[PartialHypothesis]:
    return handle.poll(now_ms)


def terminate(handle: SimulatedDecoder, now_ms: int) -> SimulatedDecoder:
    handle.terminate(now_ms)
    return handle
