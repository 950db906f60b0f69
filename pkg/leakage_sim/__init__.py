# Leakage-aware neutral-atom register simulator
__version__ = "1.0.0"
