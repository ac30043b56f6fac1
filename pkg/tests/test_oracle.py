import json
import sys
from pathlib import Path

import numpy as np
import pytest

from rankfuse.core import Seed, Selection, make_selection, validate_profile
from rankfuse.errors import (
    EmptyLayerError,
    MisalignedError,
    OracleTimeoutError,
    ProtocolError,
    RemoteFailureError,
)
from rankfuse.oracle import (
    EvalRequest,
    ReplayChannel,
    SubprocessChannel,
    SurrogateModel,
    SurrogateSession,
    WireSession,
    external_evaluate,
    fetch_profile,
    make_surrogate,
    open_oracle,
    surrogate_evaluate,
)

FAKE = str(Path(__file__).parent / "fake_remote.py")


def remote_cmd(mode="normal", layers=2, channels=4):
    return [sys.executable, FAKE, "--mode", mode, "--layers", str(layers), "--channels", str(channels)]


def toy_model(lam=0.0):
    # utilities 8..1 over a single 8-channel layer, total 36
    u = np.arange(8, 0, -1, dtype=float) / 36.0
    return SurrogateModel(
        utilities={"L0": u}, base_accuracy=0.9, interaction=lam, radius=1
    )


def toy_profile(n=8):
    return validate_profile(
        {"layers": [{"layer_id": "L0", "magnitude": list(range(1, n + 1)), "taylor": [1.0] * n}]}
    )


# ---------------------------------------------------------------- surrogate

def test_drop_nothing_gives_base_accuracy():
    model = toy_model()
    sel = Selection(kept={"L0": tuple(range(8))})
    assert surrogate_evaluate(model, sel).accuracy == pytest.approx(0.9)


def test_drop_everything_hits_floor():
    model = toy_model()
    sel = Selection(kept={"L0": ()})
    # all utility gone: 0.9 - 1.0 clamps at 0
    assert surrogate_evaluate(model, sel).accuracy == 0.0


def test_toy_drop_two_lowest_utilities():
    model = toy_model()
    # utilities are descending, so channels 6 and 7 hold u = 2/36 and 1/36
    sel = Selection(kept={"L0": tuple(range(6))})
    expected = 0.9 - 3.0 / 36.0
    assert surrogate_evaluate(model, sel).accuracy == pytest.approx(expected, abs=1e-15)


def test_interaction_counts_adjacent_dropped_pairs():
    model = toy_model(lam=0.7)
    # dropping channels 5,6,7 creates 2 adjacent pairs of 7 possible
    sel = Selection(kept={"L0": (0, 1, 2, 3, 4)})
    base = 0.9 - (3 + 2 + 1) / 36.0
    expected = base - 0.7 * 2.0 / 7.0
    assert surrogate_evaluate(model, sel).accuracy == pytest.approx(expected, abs=1e-15)
    # scattered drops (channels 1, 3, 7 hold u = 7, 5, 1): no adjacent pairs
    sel2 = Selection(kept={"L0": (0, 2, 4, 5, 6)})
    got = surrogate_evaluate(model, sel2).accuracy
    assert got == pytest.approx(0.9 - (7 + 5 + 1) / 36.0, abs=1e-15)


def test_monotone_without_interaction():
    profile = toy_profile(32)
    model = make_surrogate(profile, Seed(0), interaction=0.0)
    rng = np.random.default_rng(1)
    for _ in range(25):
        kept = sorted(rng.choice(32, size=12, replace=False).tolist())
        acc_before = surrogate_evaluate(model, make_selection({"L0": kept}, profile)).accuracy
        smaller = kept[1:]
        acc_after = surrogate_evaluate(model, make_selection({"L0": smaller}, profile)).accuracy
        assert acc_after <= acc_before + 1e-15


def test_surrogate_determinism():
    profile = toy_profile(16)
    m1 = make_surrogate(profile, Seed(5), interaction=0.3)
    m2 = make_surrogate(profile, Seed(5), interaction=0.3)
    sel = make_selection({"L0": range(8)}, profile)
    assert surrogate_evaluate(m1, sel).accuracy == surrogate_evaluate(m2, sel).accuracy


def test_surrogate_misaligned():
    model = toy_model()
    with pytest.raises(MisalignedError):
        surrogate_evaluate(model, Selection(kept={"other": (0,)}))
    with pytest.raises(MisalignedError):
        surrogate_evaluate(model, Selection(kept={"L0": (99,)}))


# ----------------------------------------------------------------- protocol

def test_protocol_round_trip():
    with WireSession(SubprocessChannel(remote_cmd()), timeout=20) as session:
        profile = fetch_profile(session)
        assert profile.total_channels == 8
        sel = make_selection({"blk0": [0, 1], "blk1": [2, 3]}, profile)
        result = external_evaluate(session, EvalRequest(selection=sel, split="proxy", tag="t1"))
        assert result.tag == "t1"
        assert result.accuracy == pytest.approx(0.75)


def test_protocol_tag_echo_and_sequencing():
    with WireSession(SubprocessChannel(remote_cmd()), timeout=20) as session:
        profile = session.profile()
        sel = make_selection({"blk0": [0], "blk1": []}, profile)
        for expected_tag in ("t1", "t2", "t3"):
            result = session.evaluate(sel)
            assert result.tag == expected_tag


def test_protocol_malformed_line():
    with WireSession(SubprocessChannel(remote_cmd("malformed")), timeout=20) as session:
        profile = session.profile()
        sel = make_selection({"blk0": [0], "blk1": [0]}, profile)
        with pytest.raises(ProtocolError) as err:
            session.evaluate(sel)
        assert "not json" in str(err.value)


def test_protocol_remote_error():
    with WireSession(SubprocessChannel(remote_cmd("remote_error")), timeout=20) as session:
        profile = session.profile()
        sel = make_selection({"blk0": [0], "blk1": [0]}, profile)
        with pytest.raises(RemoteFailureError, match="evaluator exploded"):
            session.evaluate(sel)


def test_protocol_timeout():
    with pytest.raises(OracleTimeoutError):
        WireSession(SubprocessChannel(remote_cmd("silent")), timeout=0.3)


def test_describe_paper_scale():
    cmd = remote_cmd(layers=12, channels=1536)
    with WireSession(SubprocessChannel(cmd), timeout=60) as session:
        profile = fetch_profile(session)
        assert len(profile.layers) == 12
        assert profile.total_channels == 18432


def test_describe_one_channel_layer_surfaces_validation_error():
    with WireSession(SubprocessChannel(remote_cmd("one_channel")), timeout=20) as session:
        with pytest.raises(EmptyLayerError):
            session.profile()


def test_describe_missing_taylor_is_protocol_error():
    with WireSession(SubprocessChannel(remote_cmd("missing_taylor")), timeout=20) as session:
        with pytest.raises(ProtocolError):
            session.profile()


def test_transcript_record_and_replay(tmp_path):
    record = tmp_path / "transcript.jsonl"
    with WireSession(SubprocessChannel(remote_cmd()), timeout=20, record_path=record) as session:
        profile = session.profile()
        sel = make_selection({"blk0": [0, 1], "blk1": [1]}, profile)
        first = session.evaluate(sel, split="heldout")

    events = [json.loads(l) for l in record.read_text().splitlines()]
    sends = [e for e in events if e["dir"] == "send"]
    assert json.loads(sends[0]["line"])["type"] == "hello"

    # replay: the same call sequence must reproduce byte-identical requests
    replay = WireSession(ReplayChannel.from_file(record), timeout=5)
    profile2 = replay.profile()
    assert profile2.layer_ids == profile.layer_ids
    sel2 = make_selection({"blk0": [0, 1], "blk1": [1]}, profile2)
    second = replay.evaluate(sel2, split="heldout")
    assert second.accuracy == first.accuracy

    # divergent request sequence trips the byte-exactness check
    replay2 = WireSession(ReplayChannel.from_file(record), timeout=5)
    profile3 = replay2.profile()
    other = make_selection({"blk0": [0], "blk1": [1]}, profile3)
    with pytest.raises(ProtocolError, match="divergence"):
        replay2.evaluate(other, split="heldout")


def test_out_of_order_responses_matched_by_tag(tmp_path):
    # craft a transcript where results come back in reversed order
    profile_line = json.dumps(
        {
            "layers": [
                {"layer_id": "a", "magnitude": [1.0, 2.0], "taylor": [1.0, 1.0]}
            ]
        }
    )
    events = [
        {"dir": "send", "line": json.dumps({"type": "hello", "version": 1}, separators=(",", ":"), sort_keys=True)},
        {"dir": "recv", "line": json.dumps({"type": "hello", "version": 1, "pipelining": True})},
        {"dir": "send", "line": json.dumps({"kept": {"a": [0]}, "split": "proxy", "tag": "x1", "type": "evaluate"}, separators=(",", ":"), sort_keys=True)},
        {"dir": "recv", "line": json.dumps({"type": "result", "tag": "x2", "accuracy": 0.25})},
        {"dir": "recv", "line": json.dumps({"type": "result", "tag": "x1", "accuracy": 0.75})},
    ]
    path = tmp_path / "ooo.jsonl"
    path.write_text("\n".join(json.dumps(e) for e in events) + "\n")

    session = WireSession(ReplayChannel.from_file(path), timeout=5)
    sel = Selection(kept={"a": (0,)})
    # x2 was never requested -> a result for it is a protocol violation
    with pytest.raises(ProtocolError, match="unknown tag"):
        session.evaluate(sel, tag="x1")


def test_tcp_transport_round_trip():
    import socket
    import threading

    def serve_once(server):
        conn, _ = server.accept()
        fh = conn.makefile("rw", encoding="utf-8")
        for line in fh:
            msg = json.loads(line)
            if msg["type"] == "hello":
                reply = {"type": "hello", "version": 1}
            elif msg["type"] == "describe":
                reply = {"layers": [{"layer_id": "a", "magnitude": [1.0, 2.0],
                                     "taylor": [1.0, 1.0]}]}
            elif msg["type"] == "evaluate":
                reply = {"type": "result", "tag": msg["tag"], "accuracy": 0.5}
            else:
                break
            fh.write(json.dumps(reply) + "\n")
            fh.flush()
        conn.close()

    server = socket.create_server(("127.0.0.1", 0))
    port = server.getsockname()[1]
    thread = threading.Thread(target=serve_once, args=(server,), daemon=True)
    thread.start()
    try:
        with open_oracle(f"tcp:127.0.0.1:{port}", timeout=10) as session:
            profile = session.profile()
            assert profile.total_channels == 2
            sel = make_selection({"a": [1]}, profile)
            assert session.evaluate(sel).accuracy == 0.5
    finally:
        server.close()
        thread.join(timeout=5)


def test_open_oracle_surrogate_and_errors():
    profile = toy_profile()
    session = open_oracle("surrogate", profile=profile, surrogate_params={"seed": 3})
    assert isinstance(session, SurrogateSession)
    assert session.profile() is profile
    with pytest.raises(ValueError):
        open_oracle("surrogate")
    with pytest.raises(ValueError):
        open_oracle("carrier-pigeon:coop")
    with pytest.raises(ValueError):
        open_oracle("tcp:nohost")
