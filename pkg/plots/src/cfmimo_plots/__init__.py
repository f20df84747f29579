"""Figure generation for cfmimo simulation results.

Consumes the simulator's emitted CSV/JSON files only; never recomputes
metrics.  Rendering is split into a pure data layer (deterministic,
serializable) and a matplotlib drawing step so figures are reproducible
byte for byte.
"""

__version__ = "0.1.0"
