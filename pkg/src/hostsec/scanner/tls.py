"""Protocol-version support via one bare ClientHello per version.

Each attempt sends a hello pinned to a single version and reads only the
server's first reply. The handshake is never completed and nothing beyond
version negotiation is tested.
"""
from __future__ import annotations

import ipaddress
import os
import socket
import struct

from ..corpus import TlsInfo
from .net import ResolveError, resolve
from .policy import ScanPolicy
from .throttle import HostThrottle

VERSIONS = {
    "SSLv3": 0x0300,
    "TLSv1.0": 0x0301,
    "TLSv1.1": 0x0302,
    "TLSv1.2": 0x0303,
    "TLSv1.3": 0x0304,
}

_LEGACY_SUITES = (
    0xC02F, 0xC030, 0xC02B, 0xC02C, 0xC013, 0xC014, 0xC009, 0xC00A, 0xC027, 0xC028,
    0x009C, 0x009D, 0x003C, 0x003D, 0x002F, 0x0035, 0x0033, 0x0039, 0x000A, 0x0016,
    0x0005, 0x0004, 0x00FF,
)
_TLS13_SUITES = (0x1301, 0x1302, 0x1303)
_SIG_ALGS = (0x0403, 0x0503, 0x0603, 0x0804, 0x0805, 0x0806, 0x0401, 0x0501, 0x0601, 0x0201, 0x0203)
_GROUPS = (0x001D, 0x0017, 0x0018)
# SSLv2 cipher kinds: RC4, RC4 export, RC2, RC2 export, IDEA, DES, 3DES
_SSL2_KINDS = (0x010080, 0x020080, 0x030080, 0x040080, 0x050080, 0x060040, 0x0700C0)

HANDSHAKE = 0x16
SERVER_HELLO = 2


def _u16(v):
    return struct.pack("!H", v)


def _vec8(b):
    return struct.pack("!B", len(b)) + b


def _vec16(b):
    return _u16(len(b)) + b


def _ext(kind, body):
    return _u16(kind) + _vec16(body)


def _extensions(version: int, host: str) -> bytes:
    out = b""
    try:
        ipaddress.ip_address(host)
    except ValueError:
        name = host.encode("idna")
        out += _ext(0x0000, _vec16(b"\x00" + _vec16(name)))
    out += _ext(0x000A, _vec16(b"".join(map(_u16, _GROUPS))))
    out += _ext(0x000B, _vec8(b"\x00"))
    if version >= 0x0303:
        out += _ext(0x000D, _vec16(b"".join(map(_u16, _SIG_ALGS))))
    if version == 0x0304:
        out += _ext(0x002B, _vec8(_u16(0x0304)))
        out += _ext(0x002D, _vec8(b"\x01"))
        out += _ext(0x0033, _vec16(_u16(0x001D) + _vec16(os.urandom(32))))
    return out


def client_hello(version: int, host: str = "") -> bytes:
    """A TLS record holding a ClientHello that offers only ``version``."""
    legacy = min(version, 0x0303)
    suites = _TLS13_SUITES if version == 0x0304 else _LEGACY_SUITES
    body = (
        _u16(legacy) + os.urandom(32)
        + _vec8(os.urandom(32) if version == 0x0304 else b"")
        + _vec16(b"".join(map(_u16, suites)))
        + _vec8(b"\x00")
    )
    if version > 0x0300:
        body += _vec16(_extensions(version, host))
    msg = b"\x01" + struct.pack("!I", len(body))[1:] + body
    return struct.pack("!BHH", HANDSHAKE, min(version, 0x0301), len(msg)) + msg


def sslv2_client_hello() -> bytes:
    kinds = b"".join(k.to_bytes(3, "big") for k in _SSL2_KINDS)
    challenge = os.urandom(16)
    body = b"\x01" + _u16(0x0002) + _u16(len(kinds)) + _u16(0) + _u16(len(challenge)) + kinds + challenge
    return _u16(0x8000 | len(body)) + body


def _recv_exact(sock, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            break
        buf += chunk
    return buf


def parse_server_hello(record: bytes):
    """Negotiated version from a handshake record, or ``None``.

    Honours the supported_versions extension, so a TLS 1.3 reply is read
    as 0x0304 even though its legacy field says 0x0303.
    """
    if len(record) < 5 + 6 or record[0] != HANDSHAKE or record[5] != SERVER_HELLO:
        return None
    hs = record[5:]
    version = struct.unpack("!H", hs[4:6])[0]
    pos = 6 + 32
    if len(hs) < pos + 1:
        return version
    pos += 1 + hs[pos]  # session id
    pos += 3  # suite and compression
    if len(hs) < pos + 2:
        return version
    end = pos + 2 + struct.unpack("!H", hs[pos:pos + 2])[0]
    pos += 2
    while pos + 4 <= min(end, len(hs)):
        kind, size = struct.unpack("!HH", hs[pos:pos + 4])
        if kind == 0x002B and size == 2:
            return struct.unpack("!H", hs[pos + 4:pos + 6])[0]
        pos += 4 + size
    return version


def try_version(addr: str, port: int, name: str, host: str, timeout: float) -> bool:
    """Whether the server accepts a hello pinned to protocol ``name``.

    Raises ``ConnectionRefusedError`` or ``TimeoutError`` when nothing
    listens, so the caller can stop early.
    """
    with socket.create_connection((addr, port), timeout=timeout) as sock:
        try:
            if name == "SSLv2":
                sock.sendall(sslv2_client_hello())
                head = _recv_exact(sock, 3)
                # SERVER-HELLO behind a two-byte header
                return len(head) == 3 and bool(head[0] & 0x80) and head[2] == 4
            version = VERSIONS[name]
            sock.sendall(client_hello(version, host))
            head = _recv_exact(sock, 5)
            if len(head) < 5 or head[0] != HANDSHAKE:
                return False
            size = struct.unpack("!H", head[3:5])[0]
            record = head + _recv_exact(sock, min(size, 1 << 14))
        except (ConnectionResetError, BrokenPipeError, socket.timeout):
            return False
    return parse_server_hello(record) == version


def probe_tls_protocols(domain: str, policy: ScanPolicy, throttle: HostThrottle, address=None,
                        errors=None) -> TlsInfo:
    """Which protocol versions the HTTPS port accepts.

    Vulnerability flags are never tested and always come back empty.
    """
    try:
        addr = address or resolve(domain, policy)
    except ResolveError as exc:
        if errors is not None:
            errors.append(f"dns: {exc}")
        return TlsInfo(False)
    found = set()
    for name in ("SSLv2", *VERSIONS):
        with throttle.slot(addr):
            try:
                if try_version(addr, policy.https_port, name, domain, policy.timeout_s):
                    found.add(name)
            except (ConnectionRefusedError, socket.timeout, TimeoutError):
                # nothing listening; later versions would fail the same way
                if name == "SSLv2":
                    return TlsInfo(False)
            except OSError as exc:
                if errors is not None:
                    errors.append(f"tls {name}: {exc}")
    return TlsInfo(bool(found), frozenset(found))
