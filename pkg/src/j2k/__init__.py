"""Split annotated notebooks into containerised pipeline steps."""

__version__ = "0.1.0"
