import pytest

from acoustext.asr_sim import DecoderState, SimulatedDecoder, decoder_poll, terminate
from acoustext.errors import DataError, DecoderStateError

TIMELINE = [(500, "a"), (1200, "a b"), (3000, "a b c")]


def test_poll_returns_latest_available():
    d = SimulatedDecoder("en-US", TIMELINE, 3000)
    assert d.poll(400) is None
    assert d.poll(600).text == "a"
    h = d.poll(3000)
    assert h.text == "a b c" and h.is_final
    assert [e.text for e in d.emissions] == ["a", "a b", "a b c"]


def test_rtf_delays_emission():
    d = SimulatedDecoder("en-US", [(500, "a")], 3000, rtf=2.0)
    assert d.poll(999) is None
    assert d.poll(1000).text == "a"


def test_terminated_decoder_cannot_be_polled():
    d = SimulatedDecoder("en-US", TIMELINE, 3000)
    terminate(d, 1200)
    assert d.state is DecoderState.TERMINATED
    assert d.saved_ms == 1800 and d.processed_ms == 1200
    with pytest.raises(DecoderStateError):
        decoder_poll(d, 1800)
    with pytest.raises(DecoderStateError):
        d.terminate(1800)


def test_termination_after_final_saves_nothing():
    d = SimulatedDecoder("en-US", [(500, "a"), (1000, "a b")], 3000)
    d.terminate(1200)
    assert d.saved_ms == 0


def test_invalid_usage():
    d = SimulatedDecoder("en-US", TIMELINE, 3000)
    d.poll(1000)
    with pytest.raises(DecoderStateError):
        d.poll(900)
    with pytest.raises(DecoderStateError):
        d.terminate(3500)
    with pytest.raises(DataError):
        SimulatedDecoder("en-US", [(5, "a"), (5, "b")], 10)
    with pytest.raises(DataError):
        SimulatedDecoder("en-US", TIMELINE, 3000, rtf=0)


def test_finalize_only_changes_running():
    d = SimulatedDecoder("en-US", TIMELINE, 3000)
    d.finalize()
    assert d.state is DecoderState.FINISHED and d.saved_ms == 0
