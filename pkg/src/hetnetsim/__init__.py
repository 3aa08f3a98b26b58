"""HetNet downlink resource-allocation simulator and training stack."""

__version__ = "0.1.0"

from .channel import ChannelParams
from .env import EnvConfig, HetNetEnv
from .ppo import PpoConfig, train_ppo
from .runner import ExperimentConfig, Method, desk_profile, full_profile
from .td3 import Td3Config, train_td3
from .topology import NetworkTopology, ScenarioKind, generate_scenario

__all__ = [
    "ChannelParams", "EnvConfig", "HetNetEnv", "PpoConfig", "train_ppo",
    "ExperimentConfig", "Method", "desk_profile", "full_profile",
    "Td3Config", "train_td3", "NetworkTopology", "ScenarioKind",
    "generate_scenario", "__version__",
]
