"""Line-delimited JSON wire protocol exposing one environment instance to
external tooling over stdio (or any stream pair).

Every request line gets exactly one reply line; malformed requests produce
an error reply and never terminate the session. Floats serialize via
repr-exact JSON, so identical trajectories compare equal as strings.

Request kinds:  reset {seed}, step {action}, spaces, close.
Reply kinds:    state_reply, step_reply, spaces_reply, close_reply, error.
"""

from __future__ import annotations

import json

from .env import HetNetEnv
from .errors import ContractViolation, ValidationError


def _error(req_id, message: str) -> dict:
    return {"id": req_id, "kind": "error", "message": message}


def handle_request(env: HetNetEnv, line: str) -> tuple[dict, bool]:
    """One request -> (reply, keep_running)."""
    req_id = None
    try:
        msg = json.loads(line)
        if not isinstance(msg, dict):
            return _error(None, "request must be a JSON object"), True
        req_id = msg.get("id")
        kind = msg.get("kind")
        if kind == "spaces":
            return {"id": req_id, "kind": "spaces_reply",
                    "state_len": env.state_dim, "action_len": env.action_dim,
                    "n_stations": env.n_stations, "n_users": env.n_users,
                    "horizon": env.config.horizon}, True
        if kind == "reset":
            seed = msg["seed"]
            if not isinstance(seed, int):
                return _error(req_id, "seed must be an integer"), True
            state = env.reset(seed)
            return {"id": req_id, "kind": "state_reply",
                    "state": [float(x) for x in state]}, True
        if kind == "step":
            action = msg["action"]
            if (not isinstance(action, list)
                    or not all(isinstance(x, (int, float)) for x in action)):
                return _error(req_id, "action must be a list of numbers"), True
            out = env.step(action)
            return {"id": req_id, "kind": "step_reply",
                    "state": [float(x) for x in out.next_state],
                    "reward": float(out.reward), "done": bool(out.done)}, True
        if kind == "close":
            return {"id": req_id, "kind": "close_reply"}, False
        return _error(req_id, f"unknown request kind: {kind!r}"), True
    except (json.JSONDecodeError, KeyError, TypeError, ValueError,
            ContractViolation, ValidationError) as exc:
        return _error(req_id, f"{type(exc).__name__}: {exc}"), True


def serve(env: HetNetEnv, instream, outstream) -> int:
    """Answer requests until a close request or EOF; always exits 0."""
    for line in instream:
        line = line.strip()
        if not line:
            continue
        reply, keep_running = handle_request(env, line)
        outstream.write(json.dumps(reply) + "\n")
        outstream.flush()
        if not keep_running:
            break
    return 0
