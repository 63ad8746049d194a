# Keeps this directory importable (for oracles.py) however pytest is invoked.
