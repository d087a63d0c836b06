"""Scenario-based pricing of flexible demand resources in an islanded microgrid."""

__version__ = "0.1.0"
