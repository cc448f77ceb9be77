"""Live metrics over TCP pub-sub.

Wire protocol: one message per line, "<topic> <json>\\n", where the JSON
object carries t_s, source, and the payload. Subscribers connect to the
bound address and filter by topic prefix. Publishing never blocks the
simulation: each subscriber owns a bounded drop-oldest buffer drained by
its own writer thread, and the cumulative drop count is announced on the
"log" topic.
"""

from __future__ import annotations

import json
import socket
import threading
from collections import deque

from ..errors import BindError


class _Subscriber:
    def __init__(self, conn: socket.socket, max_buffered: int):
        self.conn = conn
        self.max_buffered = max_buffered
        self.buf: deque[bytes] = deque()
        self.cond = threading.Condition()
        self.drops = 0
        self._reported = 0
        self.closing = False
        self.dead = False
        self.thread = threading.Thread(target=self._run, daemon=True)
        self.thread.start()

    def offer(self, data: bytes) -> None:
        with self.cond:
            if self.dead:
                self.drops += 1
                return
            if len(self.buf) >= self.max_buffered:
                self.buf.popleft()
                self.drops += 1
            self.buf.append(data)
            # announce drops on the log topic, throttled exponentially so the
            # notes don't crowd out real messages during sustained overflow
            if self.drops and (self._reported == 0 or self.drops >= 2 * self._reported):
                if len(self.buf) >= self.max_buffered:
                    self.buf.popleft()
                    self.drops += 1
                note = json.dumps({"dropped_total": self.drops}, separators=(",", ":"))
                self.buf.append(f"log {note}\n".encode())
                self._reported = self.drops
            self.cond.notify()

    def _run(self) -> None:
        while True:
            with self.cond:
                while not self.buf and not self.closing:
                    self.cond.wait()
                if not self.buf:
                    break
                data = self.buf.popleft()
            try:
                # network I/O happens outside the lock so a stalled peer can
                # never block offer()
                self.conn.sendall(data)
            except OSError:
                with self.cond:
                    self.dead = True
                    self.buf.clear()
                break
        try:
            self.conn.close()
        except OSError:
            pass

    def finish(self, timeout: float) -> None:
        with self.cond:
            if not self.dead and self.drops > self._reported:
                if len(self.buf) >= self.max_buffered:
                    self.buf.popleft()
                    self.drops += 1
                note = json.dumps({"dropped_total": self.drops}, separators=(",", ":"))
                self.buf.append(f"log {note}\n".encode())
                self._reported = self.drops
            self.closing = True
            self.cond.notify()
        self.thread.join(timeout)
        if self.thread.is_alive():  # stalled peer: abandon it
            with self.cond:
                self.dead = True
                self.buf.clear()
                self.cond.notify()
            try:
                self.conn.close()
            except OSError:
                pass


class TcpPublisher:
    """Publish-subscribe endpoint for MetricEnvelope streams."""

    def __init__(self, bind: str, max_buffered: int = 4096):
        host, _, port_text = bind.rpartition(":")
        try:
            port = int(port_text)
        except ValueError:
            raise BindError(bind, ValueError(f"bad port {port_text!r}")) from None
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind((host or "127.0.0.1", port))
        except OSError as exc:
            self._listener.close()
            raise BindError(bind, exc) from None
        self._listener.listen()
        self.host, self.port = self._listener.getsockname()[:2]
        self.max_buffered = max_buffered
        self._subs: list[_Subscriber] = []
        self._lock = threading.Lock()
        self._closing = False
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True)
        self._acceptor.start()

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                break
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._lock:
                self._subs.append(_Subscriber(conn, self.max_buffered))

    def accept(self, envelope) -> None:
        """Sink interface: publish one envelope."""
        body = {"t_s": envelope.t_sim_s, "source": envelope.source}
        body.update(envelope.payload)
        line = f"{envelope.topic} {json.dumps(body, separators=(',', ':'))}\n".encode()
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            sub.offer(line)

    @property
    def dropped_total(self) -> int:
        with self._lock:
            return sum(sub.drops for sub in self._subs)

    def close(self, drain_timeout: float = 5.0) -> None:
        self._closing = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            sub.finish(drain_timeout)
