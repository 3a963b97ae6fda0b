"""Two-party communication: framing, byte/round accounting, two backends.

Frame wire format: 4-byte little-endian body length (body only, header
excluded), 1-byte tag, body of little-endian ell-bit words. One full-duplex
symmetric exchange counts as one round. The in-process and TCP backends are
interchangeable and produce byte-identical CommStats for the same protocol
run.
"""

from __future__ import annotations

import queue
import socket
import struct
from dataclasses import dataclass
from enum import IntEnum

HEADER_BYTES = 5
MAX_BODY_BYTES = 1 << 30


class Tag(IntEnum):
    REVEAL = 1        # batched x', w', y' opening
    FORWARD = 2       # masked forward values (segmented gate, round 2)
    BEAVER_FWD = 3    # Beaver opening for the forward product
    BEAVER_BWD = 4    # Beaver opening for the backward product
    BUNDLE = 5        # serialized dealer bundle
    RESULT = 6        # out-of-protocol result exchange (not round-counted)
    CONTROL = 7


class ChannelError(RuntimeError):
    """Transport failure: peer gone, short read, oversized frame."""


class ProtocolError(RuntimeError):
    """Protocol desynchronization: unexpected tag at a lockstep point."""


@dataclass
class CommStats:
    """Monotone per-party counters. bytes_sent includes frame headers."""

    bytes_sent: int = 0
    rounds: int = 0
    opened_elements: int = 0

    def add_exchange(self, body_bytes: int):
        self.bytes_sent += HEADER_BYTES + body_bytes
        self.rounds += 1

    def add_opened(self, elements: int):
        self.opened_elements += elements

    def as_dict(self) -> dict:
        return {
            "bytes_sent": self.bytes_sent,
            "rounds": self.rounds,
            "opened_elements": self.opened_elements,
        }


def pack_frame(tag: int, body: bytes) -> bytes:
    if len(body) > MAX_BODY_BYTES:
        raise ChannelError(f"frame body {len(body)} exceeds limit {MAX_BODY_BYTES}")
    return struct.pack("<IB", len(body), tag) + body


class Channel:
    """One lockstep duplex link between the two parties.

    exchange() must be called by both parties at the same protocol step with
    the same tag; it sends this party's frame, receives the peer's, bumps
    bytes_sent and rounds, and returns the peer body.
    """

    def __init__(self):
        self.stats = CommStats()

    def _send(self, tag: int, body: bytes):
        raise NotImplementedError

    def _recv(self) -> tuple:
        raise NotImplementedError

    def exchange(self, tag: Tag, body: bytes, count_round: bool = True) -> bytes:
        self._send(int(tag), body)
        peer_tag, peer_body = self._recv()
        if peer_tag != int(tag):
            raise ProtocolError(f"expected tag {int(tag)}, peer sent {peer_tag}")
        if count_round:
            self.stats.add_exchange(len(body))
        return peer_body

    def close(self):
        pass


class InProcessChannel(Channel):
    """Queue-backed endpoint; create pairs with inprocess_pair()."""

    def __init__(self, outbox: queue.Queue, inbox: queue.Queue):
        super().__init__()
        self._outbox = outbox
        self._inbox = inbox

    def _send(self, tag: int, body: bytes):
        if len(body) > MAX_BODY_BYTES:
            raise ChannelError(f"frame body {len(body)} exceeds limit {MAX_BODY_BYTES}")
        self._outbox.put((tag, bytes(body)))

    def _recv(self) -> tuple:
        try:
            return self._inbox.get(timeout=120.0)
        except queue.Empty:
            raise ChannelError("peer timed out") from None


def inprocess_pair() -> tuple:
    """Two paired endpoints sharing a duplex queue link."""
    q01: queue.Queue = queue.Queue()
    q10: queue.Queue = queue.Queue()
    return InProcessChannel(q01, q10), InProcessChannel(q10, q01)


class TcpChannel(Channel):
    """Socket endpoint. Party 0 sends first then receives; party 1 the
    reverse. The role ordering avoids send-buffer deadlock on large frames
    while keeping the exchange one logical round."""

    def __init__(self, sock: socket.socket, role: int):
        super().__init__()
        if role not in (0, 1):
            raise ValueError("role must be 0 or 1")
        self._sock = sock
        self._role = role
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    @classmethod
    def listen(cls, host: str, port: int, role: int, timeout: float = 60.0) -> "TcpChannel":
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen(1)
        srv.settimeout(timeout)
        try:
            conn, _ = srv.accept()
        except socket.timeout:
            raise ChannelError("no peer connected before timeout") from None
        finally:
            srv.close()
        conn.settimeout(timeout)
        return cls(conn, role)

    @classmethod
    def connect(cls, host: str, port: int, role: int,
                timeout: float = 60.0, retries: int = 50) -> "TcpChannel":
        import time
        last = None
        for _ in range(retries):
            try:
                sock = socket.create_connection((host, port), timeout=timeout)
                sock.settimeout(timeout)
                return cls(sock, role)
            except OSError as exc:
                last = exc
                time.sleep(0.1)
        raise ChannelError(f"could not connect to {host}:{port}: {last}")

    def _send_raw(self, tag: int, body: bytes):
        try:
            self._sock.sendall(pack_frame(tag, body))
        except OSError as exc:
            raise ChannelError(f"send failed: {exc}") from None

    def _recv_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            try:
                chunk = self._sock.recv(min(remaining, 1 << 20))
            except OSError as exc:
                raise ChannelError(f"recv failed: {exc}") from None
            if not chunk:
                raise ChannelError("peer disconnected")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def _recv_raw(self) -> tuple:
        header = self._recv_exact(HEADER_BYTES)
        length, tag = struct.unpack("<IB", header)
        if length > MAX_BODY_BYTES:
            raise ChannelError(f"incoming frame {length} exceeds limit {MAX_BODY_BYTES}")
        return tag, self._recv_exact(length)

    def exchange(self, tag: Tag, body: bytes, count_round: bool = True) -> bytes:
        if self._role == 0:
            self._send_raw(int(tag), body)
            peer_tag, peer_body = self._recv_raw()
        else:
            peer_tag, peer_body = self._recv_raw()
            self._send_raw(int(tag), body)
        if peer_tag != int(tag):
            raise ProtocolError(f"expected tag {int(tag)}, peer sent {peer_tag}")
        if count_round:
            self.stats.add_exchange(len(body))
        return peer_body

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass
