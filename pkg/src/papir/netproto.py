"""Length-prefixed binary protocol and a one-request-per-connection TCP server.

Frame: ``tag:u8 | length:u32 | payload``, all integers big-endian.

    0x01 QueryPartition  u16 K, u16 M, then N*(M+1) u16 indices (canonical order)
    0x02 QueryMds        u16 K, u16 M, u64 q, then K u64 evaluation points
    0x03 Answer          u16 count, u16 n, u64 q, then count*n u64 values
    0x04 Error           u8 reason code

Dataset file: ``u16 K, u16 n, u64 q`` followed by K*n u64 values, row-major.

Message ids on the wire are the caller's ids (1-based).  The client maps
them to sorted-profile positions only to look up selection probabilities.
"""

from __future__ import annotations

import logging
import random
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .field import MessageVector, PrimeField
from .pmf import PopularityProfile, ProblemParams
from .schemes import (
    Answer,
    Dataset,
    MdsQuery,
    PartitionQuery,
    Query,
    RcsPolicy,
    Scheme,
    bernoulli,
    decode_answer,
    mds_answer,
    mds_build_query,
    pc_answer,
    pc_build_query,
)

log = logging.getLogger(__name__)

TAG_QUERY_PARTITION = 0x01
TAG_QUERY_MDS = 0x02
TAG_ANSWER = 0x03
TAG_ERROR = 0x04
KNOWN_TAGS = {TAG_QUERY_PARTITION, TAG_QUERY_MDS, TAG_ANSWER, TAG_ERROR}

MAX_FRAME = 16 * 1024 * 1024
HEADER = struct.Struct(">BI")
ANSWER_HEADER = struct.Struct(">HHQ")

ERR_MALFORMED = 1
ERR_UNKNOWN_TAG = 2
ERR_MISMATCH = 3
ERR_OVERSIZED = 4
ERR_INTERNAL = 5


class ProtocolError(Exception):
    """The peer sent something that is not a valid frame for this exchange."""


class DecodeError(Exception):
    """A well-formed answer is inconsistent with the query that was sent."""


class NetworkError(ConnectionError):
    """Transport failure: unreachable server or a dropped connection."""


class FrameTooLarge(ProtocolError):
    pass


class RemoteError(ProtocolError):
    def __init__(self, code: int):
        super().__init__(f"server replied with error code {code}")
        self.code = code


# --------------------------------------------------------------------------
# Payload codecs


def _u16(value: int) -> bytes:
    if not 0 <= value <= 0xFFFF:
        raise OverflowError(f"{value} does not fit in u16")
    return struct.pack(">H", value)


def encode_query(query: Query) -> bytes:
    if isinstance(query, PartitionQuery):
        canon = query.canonical()
        out = [_u16(canon.K), _u16(canon.M)]
        out += [_u16(i) for part in canon.parts for i in part]
        return b"".join(out)
    if isinstance(query, MdsQuery):
        head = _u16(query.K) + _u16(query.M) + struct.pack(">Q", query.q)
        return head + struct.pack(f">{query.K}Q", *query.omegas)
    raise TypeError(f"not a query: {query!r}")


def query_tag(query: Query) -> int:
    return TAG_QUERY_PARTITION if isinstance(query, PartitionQuery) else TAG_QUERY_MDS


def decode_query(tag: int, payload: bytes) -> Query:
    try:
        if tag == TAG_QUERY_PARTITION:
            K, M = struct.unpack_from(">HH", payload)
            size = M + 1
            if M < 1 or K % size or len(payload) != 4 + 2 * K:
                raise ProtocolError("partition payload has inconsistent size")
            idx = struct.unpack_from(f">{K}H", payload, 4)
            parts = tuple(idx[b : b + size] for b in range(0, K, size))
            return PartitionQuery(parts)
        if tag == TAG_QUERY_MDS:
            K, M, q = struct.unpack_from(">HHQ", payload)
            if len(payload) != 12 + 8 * K:
                raise ProtocolError("MDS payload has inconsistent size")
            omegas = struct.unpack_from(f">{K}Q", payload, 12)
            return MdsQuery(omegas, M, q)
    except (struct.error, ValueError) as exc:
        raise ProtocolError(f"malformed query: {exc}") from exc
    raise ProtocolError(f"tag 0x{tag:02x} is not a query")


def encode_answer(answer: Answer, q: int) -> bytes:
    count = len(answer.combos)
    n = len(answer.combos[0]) if count else 0
    flat = [v for c in answer.combos for v in c]
    return ANSWER_HEADER.pack(count, n, q) + struct.pack(f">{len(flat)}Q", *flat)


def decode_answer_payload(payload: bytes) -> tuple[Answer, int]:
    if len(payload) < ANSWER_HEADER.size:
        raise DecodeError("answer shorter than its header")
    count, n, q = ANSWER_HEADER.unpack_from(payload)
    if len(payload) != ANSWER_HEADER.size + 8 * count * n:
        raise DecodeError(f"answer body holds {len(payload) - ANSWER_HEADER.size} bytes, header promises {8 * count * n}")
    flat = struct.unpack_from(f">{count * n}Q", payload, ANSWER_HEADER.size)
    return Answer(tuple(flat[i * n : (i + 1) * n] for i in range(count))), q


def frame(tag: int, payload: bytes) -> bytes:
    return HEADER.pack(tag, len(payload)) + payload


def _recv_exact(sock: socket.socket, length: int) -> bytes | None:
    chunks, got = [], 0
    while got < length:
        chunk = sock.recv(min(length - got, 1 << 20))
        if not chunk:
            return None
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket, max_size: int = MAX_FRAME) -> tuple[int, bytes]:
    head = _recv_exact(sock, HEADER.size)
    if head is None:
        raise EOFError("connection closed before a frame header")
    tag, length = HEADER.unpack(head)
    if tag not in KNOWN_TAGS:
        raise ProtocolError(f"unknown tag 0x{tag:02x}")
    if length > max_size:
        raise FrameTooLarge(f"frame of {length} bytes exceeds limit {max_size}")
    payload = _recv_exact(sock, length)
    if payload is None:
        raise EOFError(f"connection closed inside a {length}-byte frame")
    return tag, payload


# --------------------------------------------------------------------------
# Dataset files


def save_dataset(data: Dataset, path: str | Path) -> None:
    flat = [v for m in data.messages for v in m]
    with open(path, "wb") as fh:
        fh.write(ANSWER_HEADER.pack(data.K, data.n, data.field.q))
        fh.write(struct.pack(f">{len(flat)}Q", *flat))


def load_dataset(path: str | Path) -> Dataset:
    raw = Path(path).read_bytes()
    if len(raw) < ANSWER_HEADER.size:
        raise ValueError(f"{path}: truncated dataset header")
    K, n, q = ANSWER_HEADER.unpack_from(raw)
    if len(raw) != ANSWER_HEADER.size + 8 * K * n:
        raise ValueError(f"{path}: expected {K}x{n} values")
    flat = struct.unpack_from(f">{K * n}Q", raw, ANSWER_HEADER.size)
    return Dataset(PrimeField(q), tuple(flat[i * n : (i + 1) * n] for i in range(K)))


# --------------------------------------------------------------------------
# Server


@dataclass(frozen=True)
class ServerState:
    dataset: Dataset

    @property
    def K(self) -> int:
        return self.dataset.K


def answer_query(state: ServerState, query: Query) -> Answer:
    """The server's whole view of a round: the query and the stored messages."""
    if query.K != state.K:
        raise ValueError(f"query is for K={query.K}, server holds K={state.K}")
    if isinstance(query, PartitionQuery):
        return pc_answer(query, state.dataset)
    return mds_answer(query, state.dataset)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        sock: socket.socket = self.request
        state: ServerState = self.server.state
        try:
            tag, payload = read_frame(sock)
        except EOFError:
            return
        except ProtocolError as exc:
            code = ERR_OVERSIZED if isinstance(exc, FrameTooLarge) else ERR_UNKNOWN_TAG
            log.info("rejecting frame: %s", exc)
            self._send_error(code)
            return
        try:
            query = decode_query(tag, payload)
        except ProtocolError as exc:
            log.info("rejecting query: %s", exc)
            self._send_error(ERR_MALFORMED)
            return
        try:
            answer = answer_query(state, query)
        except ValueError as exc:
            log.info("query does not match dataset: %s", exc)
            self._send_error(ERR_MISMATCH)
            return
        except Exception:
            log.exception("failed to answer query")
            self._send_error(ERR_INTERNAL)
            return
        sock.sendall(frame(TAG_ANSWER, encode_answer(answer, state.dataset.field.q)))

    def _send_error(self, code: int):
        try:
            self.request.sendall(frame(TAG_ERROR, bytes([code])))
        except OSError:
            pass


class PirServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, state: ServerState, address=("127.0.0.1", 0)):
        self.state = state
        super().__init__(address, _Handler)

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server_address[:2]


def serve(state: ServerState, host: str = "127.0.0.1", port: int = 0) -> None:
    """Serve until interrupted."""
    with PirServer(state, (host, port)) as server:
        log.info("serving K=%d n=%d on %s:%d", state.K, state.dataset.n, *server.endpoint)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


def start_background_server(state: ServerState, host: str = "127.0.0.1", port: int = 0) -> PirServer:
    """Start a server on a daemon thread; call ``shutdown()`` then ``server_close()`` to stop."""
    server = PirServer(state, (host, port))
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


# --------------------------------------------------------------------------
# Client


@dataclass(frozen=True)
class FetchResult:
    decoded: MessageVector
    scheme: Scheme
    query: Query
    sent: bytes
    received_payload_bytes: int


def exchange(endpoint: tuple[str, int], request: bytes, timeout: float = 10.0) -> tuple[int, bytes]:
    try:
        sock = socket.create_connection(endpoint, timeout=timeout)
    except OSError as exc:
        raise NetworkError(f"cannot reach {endpoint[0]}:{endpoint[1]}: {exc}") from exc
    with sock:
        try:
            sock.sendall(request)
            return read_frame(sock)
        except EOFError as exc:
            raise DecodeError(f"answer truncated: {exc}") from exc
        except OSError as exc:
            raise NetworkError(str(exc)) from exc


def fetch_round(
    params: ProblemParams,
    W: int,
    S,
    side_info: Mapping[int, MessageVector],
    profile: PopularityProfile,
    endpoint: tuple[str, int],
    rng=None,
    policy: RcsPolicy | None = None,
) -> FetchResult:
    """Run one private retrieval against a server; W and S are caller ids."""
    r = rng if isinstance(rng, random.Random) else random.Random(rng)
    S = frozenset(S)
    if policy is None:
        policy = RcsPolicy.build(profile, params)
    pos = profile.sorted_position
    gamma = policy.gamma(pos(W), {pos(i) for i in S})
    if bernoulli(gamma, r):
        query, _ = pc_build_query(params, W, S, r)
        query = query.canonical()
        scheme, expected = Scheme.PARTITION, params.N
    else:
        query = mds_build_query(params)
        scheme, expected = Scheme.MDS, params.K - params.M

    request = frame(query_tag(query), encode_query(query))
    tag, payload = exchange(endpoint, request)
    if tag == TAG_ERROR:
        raise RemoteError(payload[0] if payload else 0)
    if tag != TAG_ANSWER:
        raise ProtocolError(f"expected an answer frame, got tag 0x{tag:02x}")
    answer, q = decode_answer_payload(payload)
    if q != params.q:
        raise DecodeError(f"answer is over GF({q}), expected GF({params.q})")
    if len(answer.combos) != expected:
        raise DecodeError(f"answer has {len(answer.combos)} combos, expected {expected}")
    if any(len(c) != params.n for c in answer.combos):
        raise DecodeError(f"answer vectors do not have length n={params.n}")
    decoded = decode_answer(query, answer, W, S, side_info, PrimeField(params.q))
    return FetchResult(decoded, scheme, query, request, len(payload))


def fetch(
    params: ProblemParams,
    W: int,
    S,
    side_info: Mapping[int, MessageVector],
    profile: PopularityProfile,
    endpoint: tuple[str, int],
    seed=None,
) -> MessageVector:
    return fetch_round(params, W, S, side_info, profile, endpoint, seed).decoded
