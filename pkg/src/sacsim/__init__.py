"""Discrete-event simulator for sensing-assisted beam management in a mmWave WLAN."""

__version__ = "0.1.0"
