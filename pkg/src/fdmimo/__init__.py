"""Joint analog self-interference cancellation and digital beamforming for full-duplex MIMO."""

__version__ = "0.1.0"
