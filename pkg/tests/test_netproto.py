import math
import random
import socket
import struct
import threading
from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import given
from hypothesis import strategies as st

from papir.netproto import (
    ERR_MALFORMED,
    ERR_MISMATCH,
    ERR_UNKNOWN_TAG,
    TAG_ANSWER,
    TAG_ERROR,
    TAG_QUERY_MDS,
    TAG_QUERY_PARTITION,
    DecodeError,
    NetworkError,
    ProtocolError,
    RemoteError,
    ServerState,
    decode_answer_payload,
    decode_query,
    encode_answer,
    encode_query,
    exchange,
    fetch,
    fetch_round,
    frame,
    load_dataset,
    query_tag,
    read_frame,
    save_dataset,
    start_background_server,
)
from papir.pmf import PopularityProfile, ProblemParams
from papir.schemes import Answer, Dataset, MdsQuery, PartitionQuery, RcsPolicy, Scheme, mds_build_query, mds_decode, pc_build_query


@pytest.fixture
def server_for():
    started = []

    def start(data):
        srv = start_background_server(ServerState(data))
        started.append(srv)
        return srv.endpoint

    yield start
    for srv in started:
        srv.shutdown()
        srv.server_close()


def raw_server(reply: bytes):
    """One-shot server that reads a frame and sends ``reply`` verbatim."""
    lst = socket.create_server(("127.0.0.1", 0))

    def run():
        conn, _ = lst.accept()
        with conn:
            read_frame(conn)
            conn.sendall(reply)
        lst.close()

    threading.Thread(target=run, daemon=True).start()
    return lst.getsockname()[:2]


# Codecs


def test_partition_payload_layout():
    q = PartitionQuery(((1, 2), (3, 5), (4, 6)))
    payload = encode_query(q)
    assert len(payload) == 16
    assert payload[:4] == struct.pack(">HH", 6, 1)
    assert decode_query(TAG_QUERY_PARTITION, payload) == q


def test_mds_payload_layout():
    q = mds_build_query(ProblemParams(3, 1, 7))
    payload = encode_query(q)
    assert len(payload) == 36
    assert decode_query(TAG_QUERY_MDS, payload) == q


def test_partition_encoding_is_canonical():
    a = PartitionQuery(((5, 3), (2, 1), (6, 4)))
    b = PartitionQuery(((1, 2), (3, 5), (4, 6)))
    assert encode_query(a) == encode_query(b)


def test_random_queries_round_trip():
    r = random.Random(10)
    for _ in range(1000):
        K, M = r.choice([(6, 1), (12, 2), (20, 3), (12, 1)])
        params = ProblemParams(K, M)
        if r.random() < 0.5:
            W = r.randint(1, K)
            q, _ = pc_build_query(params, W, r.sample([i for i in range(1, K + 1) if i != W], M), r)
        else:
            p = ProblemParams(K, M, r.choice([61, 101, 2**61 - 1]))
            q = MdsQuery(tuple(r.sample(range(min(p.q, 10**6)), K)), M, p.q)
        assert decode_query(query_tag(q), encode_query(q)) == q


@given(st.integers(1, 6), st.integers(1, 5), st.sampled_from([7, 61, 2**61 - 1]), st.data())
def test_answers_round_trip(count, n, q, data):
    combos = data.draw(st.lists(st.lists(st.integers(0, q - 1), min_size=n, max_size=n), min_size=count, max_size=count))
    ans = Answer(combos)
    payload = encode_answer(ans, q)
    assert len(payload) == 12 + 8 * count * n
    assert decode_answer_payload(payload) == (ans, q)


def test_random_answers_round_trip():
    r = random.Random(11)
    for _ in range(1000):
        q = r.choice([7, 13, 61, 2**31 - 1])
        n = r.randint(1, 4)
        ans = Answer([[r.randrange(q) for _ in range(n)] for _ in range(r.randint(1, 8))])
        assert decode_answer_payload(encode_answer(ans, q)) == (ans, q)


@pytest.mark.parametrize(
    "tag,payload",
    [
        (TAG_QUERY_PARTITION, b"\x00\x06"),
        (TAG_QUERY_PARTITION, struct.pack(">HH", 6, 1) + b"\x00\x01" * 5),
        (TAG_QUERY_PARTITION, struct.pack(">HH6H", 6, 1, 1, 1, 2, 3, 4, 5)),
        (TAG_QUERY_MDS, struct.pack(">HHQ", 3, 1, 7) + struct.pack(">2Q", 0, 1)),
        (TAG_QUERY_MDS, struct.pack(">HHQ3Q", 3, 1, 8, 0, 1, 2)),
        (TAG_ANSWER, b""),
    ],
)
def test_malformed_queries(tag, payload):
    with pytest.raises(ProtocolError):
        decode_query(tag, payload)


def test_answer_length_mismatch():
    payload = encode_answer(Answer([(1, 2)]), 7)
    with pytest.raises(DecodeError):
        decode_answer_payload(payload[:-1])
    with pytest.raises(DecodeError):
        decode_answer_payload(b"\x00")


def test_u16_range():
    with pytest.raises(OverflowError):
        encode_query(PartitionQuery(tuple((2 * i + 1, 2 * i + 2) for i in range(32768))))


def test_dataset_file_round_trip(tmp_path):
    params = ProblemParams(12, 2, 2**61 - 1, n=3)
    data = Dataset.random(params, random.Random(1))
    save_dataset(data, tmp_path / "d.bin")
    assert load_dataset(tmp_path / "d.bin") == data
    (tmp_path / "bad.bin").write_bytes((tmp_path / "d.bin").read_bytes()[:-3])
    with pytest.raises(ValueError):
        load_dataset(tmp_path / "bad.bin")


# Loopback


def test_loopback_partition():
    params = ProblemParams(6, 1, n=4)
    data = Dataset.random(params, random.Random(2))
    profile = PopularityProfile.uniform(6)
    policy = RcsPolicy.build(profile, params)
    r = random.Random(3)
    srv = start_background_server(ServerState(data))
    try:
        for W in range(1, 7):
            S = {W % 6 + 1}
            res = fetch_round(params, W, S, data.side_info(S), profile, srv.endpoint, r, policy)
            assert res.scheme is Scheme.PARTITION
            assert res.received_payload_bytes == 3 * 4 * 8 + 12
            assert res.decoded == data[W]
    finally:
        srv.shutdown()
        srv.server_close()


def test_loopback_mds(server_for):
    params = ProblemParams(6, 1, n=4)
    data = Dataset.random(params, random.Random(2))
    ep = server_for(data)
    q = mds_build_query(params)
    for W in range(1, 7):
        S = {W % 6 + 1}
        tag, payload = exchange(ep, frame(query_tag(q), encode_query(q)))
        assert tag == TAG_ANSWER and len(payload) == 5 * 4 * 8 + 12
        ans, _ = decode_answer_payload(payload)
        assert mds_decode(ans, q, W, S, data.side_info(S)) == data[W]


def test_fetch_skewed6_mixes_schemes(server_for):
    params = ProblemParams(6, 1)
    data = Dataset.random(params, random.Random(4))
    ep = server_for(data)
    profile = PopularityProfile.from_values([2, 1, 1, 1, 1, 1])
    policy = RcsPolicy.build(profile, params)
    r = random.Random(5)
    seen = set()
    for _ in range(300):
        res = fetch_round(params, 2, {1}, data.side_info({1}), profile, ep, r, policy)
        assert res.decoded == data[2]
        seen.add(res.scheme)
    assert seen == {Scheme.PARTITION, Scheme.MDS}


def test_fetch_uses_caller_ids(server_for):
    # Caller id 4 is the most popular message; the wire still carries caller ids.
    params = ProblemParams(6, 1)
    data = Dataset.random(params, random.Random(6))
    ep = server_for(data)
    profile = PopularityProfile.from_values([1, 1, 1, 5, 1, 1])
    for seed in range(50):
        assert fetch(params, 4, {6}, data.side_info({6}), profile, ep, seed) == data[4]


def test_two_concurrent_clients(server_for):
    params = ProblemParams(12, 2, n=8)
    data = Dataset.random(params, random.Random(7))
    ep = server_for(data)
    profile = PopularityProfile.from_values(range(12, 0, -1))
    policy = RcsPolicy.build(profile, params)

    def client(seed):
        r = random.Random(seed)
        ok = 0
        for _ in range(100):
            W = r.randint(1, 12)
            S = set(r.sample([i for i in range(1, 13) if i != W], 2))
            ok += fetch_round(params, W, S, data.side_info(S), profile, ep, r, policy).decoded == data[W]
        return ok

    with ThreadPoolExecutor(2) as pool:
        assert list(pool.map(client, [1, 2])) == [100, 100]


def test_unknown_tag_gets_error_frame(server_for):
    ep = server_for(Dataset.random(ProblemParams(6, 1), random.Random(0)))
    tag, payload = exchange(ep, frame(0x7F, b"xyz"))
    assert (tag, payload) == (TAG_ERROR, bytes([ERR_UNKNOWN_TAG]))


def test_malformed_payload_gets_error_frame(server_for):
    ep = server_for(Dataset.random(ProblemParams(6, 1), random.Random(0)))
    tag, payload = exchange(ep, frame(TAG_QUERY_PARTITION, b"\x00"))
    assert (tag, payload) == (TAG_ERROR, bytes([ERR_MALFORMED]))


def test_mismatched_query_gets_error_frame(server_for):
    ep = server_for(Dataset.random(ProblemParams(6, 1), random.Random(0)))
    q = PartitionQuery(((1, 2, 3), (4, 5, 6), (7, 8, 9), (10, 11, 12)))
    tag, payload = exchange(ep, frame(query_tag(q), encode_query(q)))
    assert (tag, payload) == (TAG_ERROR, bytes([ERR_MISMATCH]))
    params = ProblemParams(12, 2)
    with pytest.raises(RemoteError) as info:
        fetch(params, 1, {2, 3}, {2: (0,), 3: (0,)}, PopularityProfile.uniform(12), ep, 0)
    assert info.value.code == ERR_MISMATCH


def test_truncated_answer_is_decode_error():
    params = ProblemParams(6, 1)
    full = frame(TAG_ANSWER, encode_answer(Answer([(1,), (2,), (3,)]), 7))
    ep = raw_server(full[:-5])
    with pytest.raises(DecodeError):
        fetch(params, 1, {2}, {2: (0,)}, PopularityProfile.uniform(6), ep, 0)


def test_wrong_combo_count_is_decode_error():
    params = ProblemParams(6, 1)
    ep = raw_server(frame(TAG_ANSWER, encode_answer(Answer([(1,), (2,)]), 7)))
    with pytest.raises(DecodeError):
        fetch(params, 1, {2}, {2: (0,)}, PopularityProfile.uniform(6), ep, 0)


def test_unreachable_server_is_network_error():
    sock = socket.create_server(("127.0.0.1", 0))
    ep = sock.getsockname()[:2]
    sock.close()
    with pytest.raises(NetworkError):
        fetch(ProblemParams(6, 1), 1, {2}, {2: (0,)}, PopularityProfile.uniform(6), ep, 0)


def test_request_bytes_hide_demand():
    # Equal canonical partitions from different demands produce identical frames.
    params = ProblemParams(6, 1)
    target = PartitionQuery(((1, 2), (3, 5), (4, 6)))
    frames = {}
    r = random.Random(12)
    for W, S in [(1, {2}), (2, {1}), (3, {5}), (6, {4})]:
        while True:
            q, _ = pc_build_query(params, W, S, r)
            if q == target:
                frames[W] = frame(query_tag(q), encode_query(q))
                break
    assert len(set(frames.values())) == 1


def test_uniform_fetch_always_partition(server_for):
    params = ProblemParams(6, 1, n=2)
    data = Dataset.random(params, random.Random(13))
    ep = server_for(data)
    profile = PopularityProfile.uniform(6)
    r = random.Random(14)
    for _ in range(100):
        res = fetch_round(params, 3, {4}, data.side_info({4}), profile, ep, r)
        assert res.scheme is Scheme.PARTITION
        assert res.received_payload_bytes == params.N * params.n * 8 + 12


def test_mds_frequency_over_wire(server_for):
    params = ProblemParams(6, 1)
    data = Dataset.random(params, random.Random(15))
    ep = server_for(data)
    profile = PopularityProfile.from_values([2, 1, 1, 1, 1, 1])
    policy = RcsPolicy.build(profile, params)
    r = random.Random(16)
    n = 26_000
    mds = 0
    for _ in range(n):
        res = fetch_round(params, 1, {2}, data.side_info({2}), profile, ep, r, policy)
        assert res.decoded == data[1]
        mds += res.scheme is Scheme.MDS
    p = 1 / 26
    assert abs(mds / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_field_mismatch_rejected_by_client(server_for):
    data = Dataset.random(ProblemParams(6, 1, 11), random.Random(0))
    ep = server_for(data)
    with pytest.raises((DecodeError, RemoteError)):
        fetch(ProblemParams(6, 1, 7), 1, {2}, {2: (0,)}, PopularityProfile.uniform(6), ep, 0)

