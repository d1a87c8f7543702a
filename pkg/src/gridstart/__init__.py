"""Machine-learned warm starts for successive-linear-programming ACOPF."""

__version__ = "0.1.0"
