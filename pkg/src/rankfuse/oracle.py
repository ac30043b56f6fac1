"""Accuracy oracles: a deterministic synthetic surrogate and a wire client.

The surrogate maps a selection to accuracy through a fixed utility budget:
dropping a channel costs its utility share, and (optionally) dropping
index-adjacent channels in the same layer costs an interaction share. It is
pure plumbing for desk-scale testing; nothing about it claims to reproduce
real fine-tuned behavior.

The wire client speaks newline-delimited JSON to an external evaluator over
a spawned subprocess's stdio or a TCP socket:

    -> {"type":"hello","version":1}
    <- {"type":"hello","version":1,"pipelining":false}
    -> {"type":"describe"}
    <- {"layers":[{"layer_id":...,"magnitude":[...],"taylor":[...]}]}
    -> {"type":"evaluate","tag":"t1","split":"proxy","kept":{...}}
    <- {"type":"result","tag":"t1","accuracy":0.93}
    -> {"type":"shutdown"}

Remotes answer failures with {"type":"error","message":...}. Sessions can
record transcripts (.jsonl) and replay them for golden-file tests.
"""
from __future__ import annotations

import json
import os
import select
import shlex
import socket
import subprocess
import time
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import ModelProfile, Seed, Selection, validate_profile
from .errors import (
    MisalignedError,
    OracleTimeoutError,
    ProfileSchemaError,
    ProtocolError,
    RemoteFailureError,
)
from .ranknorm import rank_mm

__all__ = [
    "EvalRequest",
    "EvalResult",
    "SurrogateModel",
    "make_surrogate",
    "surrogate_evaluate",
    "external_evaluate",
    "fetch_profile",
    "OracleSession",
    "SurrogateSession",
    "WireSession",
    "open_oracle",
]

SPLITS = ("proxy", "heldout")
DEFAULT_TIMEOUT = 600.0
PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class EvalRequest:
    selection: Selection
    split: str = "proxy"
    tag: str = ""

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    split: str
    tag: str

    def __post_init__(self) -> None:
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValueError(f"accuracy outside [0, 1]: {self.accuracy}")


# ---------------------------------------------------------------- surrogate

@dataclass(frozen=True)
class SurrogateModel:
    """Fixed per-channel utilities plus an optional adjacency interaction."""

    utilities: Mapping[str, np.ndarray]
    base_accuracy: float = 0.95
    interaction: float = 0.0
    radius: int = 1

    def __post_init__(self) -> None:
        if self.radius < 1:
            raise ValueError("radius must be >= 1")
        if self.interaction < 0:
            raise ValueError("interaction strength must be >= 0")
        for lid, u in self.utilities.items():
            if np.any(u < 0) or not np.all(np.isfinite(u)):
                raise ValueError(f"layer {lid!r}: utilities must be finite and >= 0")

    @property
    def utility_total(self) -> float:
        return float(sum(u.sum() for u in self.utilities.values()))

    @property
    def pair_total(self) -> int:
        total = 0
        for u in self.utilities.values():
            n = u.shape[0]
            for d in range(1, self.radius + 1):
                total += max(0, n - d)
        return total


def make_surrogate(
    profile: ModelProfile,
    seed: Seed,
    base_accuracy: float = 0.95,
    interaction: float = 0.0,
    radius: int = 1,
    boundary_rank: float = 0.7,
    bump_width: float = 0.05,
    bump_gain: float = 2.0,
    noise: float = 0.02,
) -> SurrogateModel:
    """Utilities monotone in magnitude rank plus seeded noise.

    A Gaussian utility bump at `boundary_rank` is added with amplitude
    `interaction * bump_gain`: with interaction 0 the utilities carry no
    rank-deterministic non-monotone structure, so no scorer can beat the
    monotone ordering by more than the noise floor.
    """
    ranks = rank_mm(profile)
    rng = np.random.default_rng(seed.value)
    utilities: dict[str, np.ndarray] = {}
    for layer in profile.layers:
        r = ranks.layer(layer.layer_id)
        u = r + noise * rng.standard_normal(layer.channels)
        if interaction > 0:
            u = u + interaction * bump_gain * np.exp(
                -((r - boundary_rank) ** 2) / (2.0 * bump_width**2)
            )
        u = np.clip(u, 1e-9, None)
        u.flags.writeable = False
        utilities[layer.layer_id] = u
    return SurrogateModel(
        utilities=utilities,
        base_accuracy=base_accuracy,
        interaction=interaction,
        radius=radius,
    )


def surrogate_evaluate(
    model: SurrogateModel,
    selection: Selection,
    split: str = "proxy",
    tag: str = "",
) -> EvalResult:
    """Deterministic accuracy for a selection under the utility budget."""
    if set(selection.kept) - set(model.utilities):
        raise MisalignedError("selection references layers unknown to the surrogate")
    dropped_utility = 0.0
    dropped_pairs = 0
    for lid, u in model.utilities.items():
        n = u.shape[0]
        kept_idx = selection.kept.get(lid, ())
        if kept_idx and (min(kept_idx) < 0 or max(kept_idx) >= n):
            raise MisalignedError(f"layer {lid!r}: kept index out of range")
        dropped = np.ones(n, dtype=bool)
        dropped[list(kept_idx)] = False
        dropped_utility += float(u[dropped].sum())
        for d in range(1, model.radius + 1):
            dropped_pairs += int(np.count_nonzero(dropped[:-d] & dropped[d:]))
    acc = model.base_accuracy
    total = model.utility_total
    if total > 0:
        acc -= dropped_utility / total
    pairs = model.pair_total
    if model.interaction > 0 and pairs > 0:
        acc -= model.interaction * dropped_pairs / pairs
    return EvalResult(accuracy=float(np.clip(acc, 0.0, 1.0)), split=split, tag=tag)


# ----------------------------------------------------------------- sessions

class OracleSession:
    """Uniform surface the runner talks to: a profile plus evaluate calls."""

    def profile(self) -> ModelProfile:
        raise NotImplementedError

    def evaluate(self, selection: Selection, split: str = "proxy", tag: str | None = None) -> EvalResult:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class SurrogateSession(OracleSession):
    def __init__(self, profile: ModelProfile, model: SurrogateModel):
        self._profile = profile
        self._model = model
        self.evaluations = 0

    def profile(self) -> ModelProfile:
        return self._profile

    def evaluate(self, selection, split="proxy", tag=None) -> EvalResult:
        self.evaluations += 1
        return surrogate_evaluate(self._model, selection, split, tag or "")


# ----------------------------------------------------------------- channels

class _LineChannel:
    """One line out, one line in, with a deadline on reads."""

    def send_line(self, line: str) -> None:
        raise NotImplementedError

    def recv_line(self, timeout: float) -> str:
        raise NotImplementedError

    def close(self) -> None:
        pass


class _FdChannel(_LineChannel):
    """select()-based line reader over raw file descriptors."""

    def __init__(self, read_fd: int, write):
        self._read_fd = read_fd
        self._write = write
        self._buf = b""

    def send_line(self, line: str) -> None:
        self._write(line.encode("utf-8") + b"\n")

    def recv_line(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise OracleTimeoutError(f"no response within {timeout} s")
            ready, _, _ = select.select([self._read_fd], [], [], remaining)
            if not ready:
                continue
            chunk = None
            try:
                chunk = os.read(self._read_fd, 65536)
            except OSError:
                pass
            if not chunk:
                raise ProtocolError("remote closed the stream mid-session")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode("utf-8")


class SubprocessChannel(_FdChannel):
    def __init__(self, command: str | list[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
        )
        super().__init__(
            self._proc.stdout.fileno(),
            lambda data: (self._proc.stdin.write(data), self._proc.stdin.flush()),
        )

    def close(self) -> None:
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class TcpChannel(_FdChannel):
    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port))
        self._sock.setblocking(True)
        super().__init__(
            self._sock.fileno(), lambda data: self._sock.sendall(data)
        )

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class ReplayChannel(_LineChannel):
    """Feed a recorded transcript back; sends must match byte-for-byte."""

    def __init__(self, transcript: list[dict]):
        self._events = list(transcript)
        self._pos = 0

    def send_line(self, line: str) -> None:
        if self._pos >= len(self._events):
            raise ProtocolError("send past end of transcript")
        ev = self._events[self._pos]
        if ev["dir"] != "send" or ev["line"] != line:
            raise ProtocolError(
                f"transcript divergence at event {self._pos}: sent {line!r}, "
                f"expected {ev.get('line')!r}"
            )
        self._pos += 1

    def recv_line(self, timeout: float) -> str:
        if self._pos >= len(self._events) or self._events[self._pos]["dir"] != "recv":
            raise ProtocolError("transcript has no response at this point")
        line = self._events[self._pos]["line"]
        self._pos += 1
        return line

    @classmethod
    def from_file(cls, path) -> "ReplayChannel":
        events = []
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                raw = raw.strip()
                if raw:
                    events.append(json.loads(raw))
        return cls(events)


class WireSession(OracleSession):
    """Tagged request/response client over a line channel."""

    def __init__(
        self,
        channel: _LineChannel,
        timeout: float = DEFAULT_TIMEOUT,
        record_path=None,
    ):
        self._channel = channel
        self._timeout = timeout
        self._record = open(record_path, "a", encoding="utf-8") if record_path else None
        self._profile: ModelProfile | None = None
        self._pending: set[str] = set()
        self._parked: dict[str, dict] = {}
        self._tag_counter = 0
        self.pipelining = False
        self._handshake()

    # -- wire helpers

    def _log(self, direction: str, line: str) -> None:
        if self._record is not None:
            self._record.write(json.dumps({"dir": direction, "line": line}) + "\n")
            self._record.flush()

    def _send(self, message: dict) -> None:
        line = json.dumps(message, separators=(",", ":"), sort_keys=True)
        self._log("send", line)
        self._channel.send_line(line)

    def _recv(self) -> dict:
        line = self._channel.recv_line(self._timeout)
        self._log("recv", line)
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"malformed message line: {line!r}")
        if not isinstance(msg, dict):
            raise ProtocolError(f"message is not an object: {line!r}")
        if msg.get("type") == "error":
            raise RemoteFailureError(str(msg.get("message", "remote error")))
        return msg

    def _handshake(self) -> None:
        self._send({"type": "hello", "version": PROTOCOL_VERSION})
        msg = self._recv()
        if msg.get("type") != "hello":
            raise ProtocolError(f"expected hello response, got {msg!r}")
        self.pipelining = bool(msg.get("pipelining", False))

    # -- session surface

    def profile(self) -> ModelProfile:
        if self._profile is None:
            self._send({"type": "describe"})
            doc = self._recv()
            try:
                self._profile = validate_profile(doc)
            except ProfileSchemaError as exc:
                raise ProtocolError(f"describe returned a non-profile document: {exc}")
        return self._profile

    def evaluate(self, selection: Selection, split: str = "proxy", tag: str | None = None) -> EvalResult:
        if split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")
        if tag is None:
            self._tag_counter += 1
            tag = f"t{self._tag_counter}"
        if tag in self._pending or tag in self._parked:
            raise ProtocolError(f"tag {tag!r} already in flight")
        self._pending.add(tag)
        self._send(
            {
                "type": "evaluate",
                "tag": tag,
                "split": split,
                "kept": {lid: list(idx) for lid, idx in selection.kept.items()},
            }
        )
        msg = self._await_tag(tag)
        accuracy = msg.get("accuracy")
        if not isinstance(accuracy, (int, float)) or not (0.0 <= accuracy <= 1.0):
            raise ProtocolError(f"result for {tag!r} has bad accuracy: {accuracy!r}")
        return EvalResult(accuracy=float(accuracy), split=split, tag=tag)

    def _await_tag(self, tag: str) -> dict:
        if tag in self._parked:
            self._pending.discard(tag)
            return self._parked.pop(tag)
        while True:
            msg = self._recv()
            if msg.get("type") != "result":
                raise ProtocolError(f"expected result message, got {msg!r}")
            got = msg.get("tag")
            if got == tag:
                self._pending.discard(tag)
                return msg
            if got in self._pending:
                self._pending.discard(got)
                self._parked[got] = msg
                continue
            raise ProtocolError(f"result for unknown tag {got!r}")

    def close(self) -> None:
        try:
            self._send({"type": "shutdown"})
        except Exception:
            pass
        if self._record is not None:
            self._record.close()
            self._record = None
        self._channel.close()


# ------------------------------------------------------------- spec surface

def external_evaluate(session: WireSession, request: EvalRequest) -> EvalResult:
    """One tagged evaluate round-trip against a remote evaluator."""
    return session.evaluate(request.selection, request.split, request.tag or None)


def fetch_profile(session: WireSession) -> ModelProfile:
    """Profile produced by the remote describe message."""
    return session.profile()


def open_oracle(
    target: str,
    profile: ModelProfile | None = None,
    surrogate_params: Mapping | None = None,
    timeout: float = DEFAULT_TIMEOUT,
    record_path=None,
) -> OracleSession:
    """Build a session from a target spec: surrogate | cmd:... | tcp:host:port."""
    if target == "surrogate":
        if profile is None:
            raise ValueError("surrogate oracle needs a profile")
        params = dict(surrogate_params or {})
        seed = Seed(int(params.pop("seed", 0)))
        model = make_surrogate(profile, seed, **params)
        return SurrogateSession(profile, model)
    if target.startswith("cmd:"):
        return WireSession(SubprocessChannel(target[4:]), timeout, record_path)
    if target.startswith("tcp:"):
        host, _, port = target[4:].rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"tcp target must be tcp:host:port, got {target!r}")
        return WireSession(TcpChannel(host, int(port)), timeout, record_path)
    raise ValueError(f"unknown oracle target {target!r}")
