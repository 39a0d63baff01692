"""Search and download behavior that must hold without earthaccess
installed: lazy imports, cache hits, and clear install guidance."""

import datetime as dt

import pytest

from firecast_fetch import FetchError, GranuleRef, fetch_granules, search_granules

REFS = [
    GranuleRef("g1.nc", "https://example.invalid/g1.nc", 4.2),
    GranuleRef("g2.nc", "https://example.invalid/g2.nc", None),
]


class TestCachedFetch:
    def test_fully_cached_request_needs_no_downloader(self, tmp_path):
        for ref in REFS:
            (tmp_path / ref.name).write_bytes(b"granule bytes")

        paths = fetch_granules(REFS, tmp_path)

        assert [p.name for p in paths] == ["g1.nc", "g2.nc"]
        assert all(p.parent == tmp_path for p in paths)

    def test_empty_cached_files_do_not_count(self, tmp_path):
        (tmp_path / "g1.nc").write_bytes(b"granule bytes")
        (tmp_path / "g2.nc").write_bytes(b"")

        with pytest.raises(FetchError, match="earthaccess"):
            fetch_granules(REFS, tmp_path)

    def test_missing_granule_asks_for_the_optional_dependency(self, tmp_path):
        with pytest.raises(FetchError, match=r"firecast-fetch\[fetch\]"):
            fetch_granules(REFS, tmp_path)


class TestSearch:
    def test_search_asks_for_the_optional_dependency(self):
        with pytest.raises(FetchError, match="earthaccess"):
            search_granules(
                "VNP14IMG", dt.date(2020, 1, 1), (112.0, -44.0, 154.0, -10.0), limit=1
            )


class TestGranuleRef:
    def test_raw_handle_is_ignored_by_equality(self):
        a = GranuleRef("g.nc", "https://example.invalid/g.nc", 1.0, raw=object())
        b = GranuleRef("g.nc", "https://example.invalid/g.nc", 1.0, raw=object())
        assert a == b
        assert "raw" not in repr(a)
