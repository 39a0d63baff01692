"""Granule search and download against NASA Earthdata.

earthaccess is an optional dependency: everything here imports it
lazily, so searching and downloading need it installed (and Earthdata
credentials configured) while cached files and offline conversion do
not.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AuthenticationError, FetchError


@dataclass(frozen=True)
class GranuleRef:
    """One remote granule: enough to download it or find it in a cache."""

    name: str
    url: str
    size_mb: float | None = None
    raw: object | None = field(default=None, repr=False, compare=False)


def _earthaccess():
    try:
        import earthaccess
    except ImportError as exc:
        raise FetchError(
            "granule search and download need the optional earthaccess "
            "dependency; install with: pip install 'firecast-fetch[fetch]'"
        ) from exc
    return earthaccess


def _login(earthaccess):
    """Authenticate non-interactively; environment first, then netrc."""
    auth = None
    for strategy in ("environment", "netrc"):
        try:
            auth = earthaccess.login(strategy=strategy)
        except Exception:
            auth = None
        if auth is not None and getattr(auth, "authenticated", False):
            return auth
    raise AuthenticationError(
        "Earthdata login failed; set EARTHDATA_USERNAME and "
        "EARTHDATA_PASSWORD or add an urs.earthdata.nasa.gov entry to ~/.netrc"
    )


def _to_ref(result) -> GranuleRef:
    links = result.data_links()
    if not links:
        raise FetchError("search result carries no download links")
    url = links[0]
    try:
        size = float(result.size())
    except Exception:
        size = None
    return GranuleRef(name=url.rsplit("/", 1)[-1], url=url, size_mb=size, raw=result)


def search_granules(
    short_name: str,
    date: dt.date,
    bbox: tuple[float, float, float, float],
    limit: int | None = None,
) -> list[GranuleRef]:
    """Granules of one collection touching bbox on one UTC day.

    bbox is (lon_min, lat_min, lon_max, lat_max). Returns possibly
    empty; network or service failures raise FetchError.
    """
    earthaccess = _earthaccess()
    kwargs = dict(
        short_name=short_name,
        temporal=(date.isoformat(), (date + dt.timedelta(days=1)).isoformat()),
        bounding_box=tuple(float(v) for v in bbox),
    )
    if limit is not None:
        kwargs["count"] = int(limit)
    try:
        results = earthaccess.search_data(**kwargs)
    except Exception as exc:
        raise FetchError(f"granule search failed: {exc}") from exc
    return [_to_ref(r) for r in results]


def fetch_granules(refs, dest) -> list[Path]:
    """Download granules into dest, skipping ones already there.

    Already-complete files are never re-downloaded, so a fully cached
    request needs neither credentials nor network. Returns local paths
    in the same order as refs.
    """
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    refs = list(refs)
    missing = [
        ref
        for ref in refs
        if not ((dest / ref.name).exists() and (dest / ref.name).stat().st_size > 0)
    ]
    if missing:
        earthaccess = _earthaccess()
        _login(earthaccess)
        payload = [ref.raw if ref.raw is not None else ref.url for ref in missing]
        try:
            earthaccess.download(payload, str(dest))
        except Exception as exc:
            raise FetchError(f"granule download failed: {exc}") from exc
    paths = []
    for ref in refs:
        path = dest / ref.name
        if not path.exists() or path.stat().st_size == 0:
            raise FetchError(f"download did not produce {ref.name}")
        paths.append(path)
    return paths
