import threading

import numpy as np
import pytest

from fsslr.transport import (ChannelError, ProtocolError, Tag, TcpChannel,
                             inprocess_pair, pack_frame)

from conftest import run_two_party


def test_frame_byte_accounting():
    body0, body1, st0, st1 = run_two_party(
        lambda ch: ch.exchange(Tag.REVEAL, bytes(800)),
        lambda ch: ch.exchange(Tag.REVEAL, bytes(800)))
    assert body0 == bytes(800) and body1 == bytes(800)
    # 100 ell=64 elements: 800 body bytes plus the 5-byte header
    assert st0.bytes_sent == 805 and st1.bytes_sent == 805
    assert st0.rounds == 1


def test_tag_mismatch_detected():
    ch0, ch1 = inprocess_pair()

    def p0(ch):
        with pytest.raises(ProtocolError):
            ch.exchange(Tag.REVEAL, b"ab")
        return True

    def p1(ch):
        try:
            ch.exchange(Tag.FORWARD, b"cd")
        except ProtocolError:
            pass
        return True

    r0, r1, _, _ = run_two_party(p0, p1)
    assert r0 and r1


def test_oversized_frame_rejected():
    ch0, _ = inprocess_pair()
    with pytest.raises(ChannelError):
        pack_frame(int(Tag.REVEAL), bytes(2))
        ch0._send(int(Tag.REVEAL), b"x" * ((1 << 30) + 1))


def test_uncounted_result_exchange():
    r0, r1, st0, st1 = run_two_party(
        lambda ch: ch.exchange(Tag.RESULT, b"w0", count_round=False),
        lambda ch: ch.exchange(Tag.RESULT, b"w1", count_round=False))
    assert (r0, r1) == (b"w1", b"w0")
    assert st0.rounds == 0 and st0.bytes_sent == 0


def _scripted_protocol(channel, role):
    """A deterministic three-step transcript used for backend equivalence."""
    log = []
    for step, (tag, size) in enumerate([(Tag.REVEAL, 64), (Tag.FORWARD, 8),
                                        (Tag.BEAVER_BWD, 24)]):
        body = bytes([role, step]) * (size // 2)
        log.append(channel.exchange(tag, body))
    return log


def test_backend_equivalence_scripted_transcript():
    # in-process
    log_in = run_two_party(lambda ch: _scripted_protocol(ch, 0),
                           lambda ch: _scripted_protocol(ch, 1))
    stats_in = (log_in[2].as_dict(), log_in[3].as_dict())

    # tcp loopback
    port = 19821
    result = {}

    def serve():
        ch = TcpChannel.listen("127.0.0.1", port, role=0)
        result["log0"] = _scripted_protocol(ch, 0)
        result["st0"] = ch.stats.as_dict()
        ch.close()

    t = threading.Thread(target=serve)
    t.start()
    ch = TcpChannel.connect("127.0.0.1", port, role=1)
    log1 = _scripted_protocol(ch, 1)
    st1 = ch.stats.as_dict()
    ch.close()
    t.join()

    assert result["log0"] == log_in[0]
    assert log1 == log_in[1]
    assert (result["st0"], st1) == stats_in


def test_tcp_connect_failure():
    with pytest.raises(ChannelError):
        TcpChannel.connect("127.0.0.1", 19997, role=1, timeout=0.2, retries=2)
