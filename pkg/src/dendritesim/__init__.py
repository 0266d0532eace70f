"""dendritesim - Simulate and characterise active dendrite circuits."""

__version__ = "0.1.0"
