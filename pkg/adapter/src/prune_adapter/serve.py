"""Wire-protocol server loop.

Messages are one JSON object per line on stdio:

    hello    -> {"type":"hello","version":1,"pipelining":false}
    describe -> profile document {"layers":[...]}
    evaluate -> {"type":"result","tag":...,"accuracy":...}
    shutdown -> (loop ends)

Any malformed line or bad request yields {"type":"error","message":...} and
the loop keeps serving; a single bad request never kills the session.
"""
from __future__ import annotations

import json
import sys
from typing import IO

from .config import AdapterConfig
from .evaluator import ModelEvaluator

PROTOCOL_VERSION = 1


class _Recorder:
    def __init__(self, path: str | None):
        self._fh = open(path, "a", encoding="utf-8") if path else None

    def log(self, direction: str, line: str) -> None:
        if self._fh is not None:
            self._fh.write(json.dumps({"dir": direction, "line": line}) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


def _handle(evaluator: ModelEvaluator, msg: dict) -> tuple[dict, bool]:
    """(response, keep_running)."""
    mtype = msg.get("type")
    if mtype == "hello":
        return {"type": "hello", "version": PROTOCOL_VERSION, "pipelining": False}, True
    if mtype == "describe":
        return evaluator.describe(), True
    if mtype == "evaluate":
        tag = msg.get("tag")
        split = msg.get("split", "proxy")
        kept = msg.get("kept")
        if not isinstance(tag, str) or not tag:
            return {"type": "error", "message": "evaluate needs a string tag"}, True
        if not isinstance(kept, dict):
            return {"type": "error", "message": "evaluate needs a kept mapping"}, True
        try:
            accuracy = evaluator.evaluate(kept, split)
        except ValueError as exc:
            return {"type": "error", "message": str(exc)}, True
        return {"type": "result", "tag": tag, "accuracy": accuracy}, True
    if mtype == "shutdown":
        return {}, False
    return {"type": "error", "message": f"unknown message type {mtype!r}"}, True


def serve(
    config: AdapterConfig,
    stdin: IO[str] = sys.stdin,
    stdout: IO[str] = sys.stdout,
    record_path: str | None = None,
) -> None:
    evaluator = ModelEvaluator(config)
    recorder = _Recorder(record_path)

    def send(obj: dict) -> None:
        line = json.dumps(obj, separators=(",", ":"), sort_keys=True)
        recorder.log("send", line)
        stdout.write(line + "\n")
        stdout.flush()

    try:
        for raw in stdin:
            raw = raw.strip()
            if not raw:
                continue
            recorder.log("recv", raw)
            try:
                msg = json.loads(raw)
                if not isinstance(msg, dict):
                    raise ValueError("message is not an object")
            except (json.JSONDecodeError, ValueError) as exc:
                send({"type": "error", "message": f"malformed message: {exc}"})
                continue
            response, keep_running = _handle(evaluator, msg)
            if not keep_running:
                break
            send(response)
    finally:
        recorder.close()
