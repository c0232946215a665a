"""Link-weight routing control with DDPG over a packet-level network simulator."""

__version__ = "0.1.0"
