from .client import (
    BridgeConnectionError,
    BridgeEnv,
    BridgeError,
    client_env,
    launch_server,
)

__all__ = ["BridgeConnectionError", "BridgeEnv", "BridgeError", "client_env",
           "launch_server"]
