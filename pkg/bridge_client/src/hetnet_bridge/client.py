"""Client-side proxy for the line-delimited JSON environment protocol.

The server is the simulator CLI's `serve-env` subcommand; this module only
speaks the wire format, so trajectories round-trip bit-exactly (floats are
serialized with repr-exact JSON on both sides).
"""

from __future__ import annotations

import json
import subprocess
import sys


class BridgeError(RuntimeError):
    """The server answered with an error reply."""


class BridgeConnectionError(ConnectionError):
    """The server went away mid-session."""


DEFAULT_SERVER_CMD = (sys.executable, "-m", "hetnetsim.cli", "serve-env")


def launch_server(*args: str, cmd=DEFAULT_SERVER_CMD) -> subprocess.Popen:
    """Spawn a server process; extra args are CLI flags such as
    --scenario/--n-users/--horizon."""
    return subprocess.Popen([*cmd, *args], stdin=subprocess.PIPE,
                            stdout=subprocess.PIPE,
                            stderr=subprocess.DEVNULL, text=True)


class BridgeEnv:
    """reset/step/spaces proxy over one server process.

    Requests are serialized (no pipelining); every request carries an id the
    reply must echo.
    """

    def __init__(self, process: subprocess.Popen):
        self._proc = process
        self._next_id = 0

    # ------------------------------------------------------------ raw wire

    def send_line(self, line: str) -> dict:
        """Write one raw line and read one reply line (fuzzing hook)."""
        if self._proc.poll() is not None:
            raise BridgeConnectionError("server process has exited")
        try:
            self._proc.stdin.write(line.rstrip("\n") + "\n")
            self._proc.stdin.flush()
            reply = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeConnectionError(f"server pipe broke: {exc}") from exc
        if not reply:
            raise BridgeConnectionError("server closed the stream")
        return json.loads(reply)

    def request(self, kind: str, **payload) -> dict:
        self._next_id += 1
        req_id = self._next_id
        reply = self.send_line(json.dumps({"id": req_id, "kind": kind, **payload}))
        if reply.get("id") != req_id:
            raise BridgeConnectionError(
                f"reply id {reply.get('id')!r} does not echo request id {req_id}")
        if reply.get("kind") == "error":
            raise BridgeError(reply.get("message", "unknown server error"))
        return reply

    # ------------------------------------------------------------ typed API

    def spaces(self) -> dict:
        reply = self.request("spaces")
        return {k: reply[k] for k in ("state_len", "action_len", "n_stations",
                                      "n_users", "horizon")}

    def reset(self, seed: int) -> list:
        return self.request("reset", seed=int(seed))["state"]

    def step(self, action) -> tuple[list, float, bool]:
        reply = self.request("step", action=[float(x) for x in action])
        return reply["state"], reply["reward"], reply["done"]

    def close(self) -> int:
        """Request shutdown and reap the server; returns its exit code."""
        if self._proc.poll() is None:
            try:
                self.request("close")
            except (BridgeConnectionError, BridgeError):
                pass
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        return self._proc.wait(timeout=30)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False


def client_env(process: subprocess.Popen) -> BridgeEnv:
    """Wrap an already-launched server process in the proxy API."""
    return BridgeEnv(process)
