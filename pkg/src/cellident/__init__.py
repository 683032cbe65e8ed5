"""Two-time-scale electrochemical parameter identification for Li-ion cells."""

__version__ = "0.1.0"
