"""CHOKe analytic models and packet-level simulator."""

__version__ = "0.1.0"
