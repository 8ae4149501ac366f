"""Energy-harvesting sensor simulator with split deep-RL status-update policies."""

__version__ = "0.1.0"
