"""Discrete-event MANET simulator for gossip (GSP) and adaptive energy-efficient
reliable gossip (AEERG) routing over an IEEE 802.11 power-save MAC."""

__version__ = "0.1.0"
