"""Forward self-similar profiles of the 2-D parabolic-parabolic Keller-Segel system."""

__version__ = "0.1.0"
