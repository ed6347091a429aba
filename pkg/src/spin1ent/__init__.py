"""Long-distance thermal entanglement through bilinear-biquadratic spin-1 chains."""

__version__ = "0.1.0"
