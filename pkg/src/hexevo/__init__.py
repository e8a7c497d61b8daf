"""hexevo: deterministic hexapod gait evolution and mutation-signature workbench."""

__version__ = "0.1.0"
