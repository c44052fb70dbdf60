"""Minimal RFC 6455 WebSocket server over stdlib sockets.

No third-party dependency: just enough of the protocol for browser clients
-- HTTP upgrade handshake, unfragmented text/binary frames, ping/pong and
close.  Plain (non-upgrade) GET requests are answered by a caller-supplied
HTTP handler, which is how the /status JSON document is served on the same
port.
"""

from __future__ import annotations

import base64
import hashlib
import socket
import struct
import threading

GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WebSocketClosed(Exception):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def encode_frame(opcode: int, payload: bytes) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise WebSocketClosed("peer closed the connection")
        buf += chunk
    return buf


def read_frame(sock: socket.socket) -> tuple[int, bytes]:
    """Read one client frame; returns (opcode, unmasked payload)."""
    b0, b1 = _read_exact(sock, 2)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        (n,) = struct.unpack(">H", _read_exact(sock, 2))
    elif n == 127:
        (n,) = struct.unpack(">Q", _read_exact(sock, 8))
    mask = _read_exact(sock, 4) if masked else b"\x00" * 4
    payload = bytearray(_read_exact(sock, n))
    if masked:
        for i in range(n):
            payload[i] ^= mask[i % 4]
    return opcode, bytes(payload)


class WebSocketConnection:
    """One upgraded connection; send methods are locked for cross-thread use."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._send_lock = threading.Lock()
        self.open = True

    def send_text(self, text: str):
        self._send(OP_TEXT, text.encode())

    def send_binary(self, data: bytes):
        self._send(OP_BINARY, data)

    def _send(self, opcode: int, payload: bytes):
        with self._send_lock:
            if not self.open:
                raise WebSocketClosed("connection closed")
            try:
                self.sock.sendall(encode_frame(opcode, payload))
            except OSError as e:
                self.open = False
                raise WebSocketClosed(str(e)) from e

    def recv(self) -> tuple[int, bytes]:
        """Next data frame; answers pings, raises WebSocketClosed on close."""
        while True:
            opcode, payload = read_frame(self.sock)
            if opcode == OP_PING:
                self._send(OP_PONG, payload)
            elif opcode == OP_CLOSE:
                try:
                    self._send(OP_CLOSE, payload)
                except WebSocketClosed:
                    pass
                self.open = False
                raise WebSocketClosed("close frame received")
            else:
                return opcode, payload

    def close(self):
        if self.open:
            try:
                self._send(OP_CLOSE, b"")
            except WebSocketClosed:
                pass
            self.open = False
        try:
            self.sock.close()
        except OSError:
            pass


def _parse_request(raw: bytes):
    head = raw.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = head.split("\r\n")
    method, path, _ = lines[0].split(" ", 2)
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    return method, path, headers


class WebSocketServer:
    """Accept loop; hands upgraded connections to on_connect(conn, path).

    on_http(path) -> (status_line, body_bytes) serves plain GET requests on
    the same port.
    """

    def __init__(self, host: str, port: int, on_connect, on_http=None):
        self.on_connect = on_connect
        self.on_http = on_http
        self._listener = socket.create_server((host, port), reuse_port=False)
        self.port = self._listener.getsockname()[1]
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop,
                                        name="ws-accept", daemon=True)

    def start(self):
        self._thread.start()
        return self

    def _accept_loop(self):
        self._listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                sock, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            threading.Thread(target=self._handle, args=(sock,), daemon=True).start()

    def _handle(self, sock: socket.socket):
        try:
            raw = sock.recv(8192)
            if not raw:
                sock.close()
                return
            method, path, headers = _parse_request(raw)
            if headers.get("upgrade", "").lower() == "websocket":
                key = headers["sec-websocket-key"]
                resp = ("HTTP/1.1 101 Switching Protocols\r\n"
                        "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n\r\n")
                sock.sendall(resp.encode())
                self.on_connect(WebSocketConnection(sock), path)
            elif self.on_http is not None and method == "GET":
                status, body = self.on_http(path)
                resp = (f"HTTP/1.1 {status}\r\n"
                        "Content-Type: application/json\r\n"
                        f"Content-Length: {len(body)}\r\n"
                        "Connection: close\r\n\r\n").encode() + body
                sock.sendall(resp)
                sock.close()
            else:
                sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
                sock.close()
        except (OSError, KeyError, ValueError):
            try:
                sock.close()
            except OSError:
                pass

    def stop(self):
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        self._thread.join(timeout=2)
