"""Acquisition companion for the firecast pipeline: download VIIRS
active-fire granules and convert them to swath (.swt) files."""

from .convert import convert_granule
from .errors import AuthenticationError, ConversionError, FetchError
from .granules import GranuleRef, fetch_granules, search_granules

__all__ = [
    "AuthenticationError",
    "ConversionError",
    "FetchError",
    "GranuleRef",
    "convert_granule",
    "fetch_granules",
    "search_granules",
]

__version__ = "0.1.0"
