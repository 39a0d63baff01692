"""Error taxonomy for granule acquisition and conversion."""


class FetchError(Exception):
    """Base for everything this package raises on purpose."""


class AuthenticationError(FetchError):
    """Earthdata login failed or no credentials were found."""


class ConversionError(FetchError):
    """A granule file cannot be turned into a swath."""
