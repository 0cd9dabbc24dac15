"""IDG lab package."""

try:
    from importlib.metadata import version
    __version__ = version("idg-lab")
except Exception:
    __version__ = "unknown"
