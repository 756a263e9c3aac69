"""Document-automation kernel for plant-reconstruction drawings."""

__version__ = "0.1.0"
