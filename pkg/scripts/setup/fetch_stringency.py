"""Download the OxCGRT national stringency table and reduce it to a daily median.

This script:
1. Downloads the compact national OxCGRT CSV
2. Saves the raw table under data/
3. Writes data/stringency.csv: the per-day median over STRINGENCY_COUNTRIES

The raw table is kept so later runs can pass it to ``python -m src.main stringency``
without network access.
"""
import sys
from pathlib import Path

import requests

# Add project root to path (go up two levels from scripts/setup/ to project root)
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.config import get_settings
from src.errors import CESError
from src.exogenous import load_stringency_table, median_stringency

OXCGRT_URL = (
    "https://raw.githubusercontent.com/OxCGRT/covid-policy-dataset/main/"
    "data/OxCGRT_compact_national_v1.csv"
)
RAW_PATH = project_root / "data" / "oxcgrt_compact_national.csv"
OUT_PATH = project_root / "data" / "stringency.csv"


def download(url: str, path: Path) -> Path:
    """Stream the CSV to disk; the full table is a few hundred MB."""
    print(f"Downloading {url}")
    with requests.get(url, stream=True, timeout=60) as response:
        response.raise_for_status()
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            for chunk in response.iter_content(chunk_size=1 << 20):
                fh.write(chunk)
    print(f"✓ Saved {path} ({path.stat().st_size / 1e6:.1f} MB)")
    return path


def main():
    settings = get_settings()
    url = sys.argv[1] if len(sys.argv) > 1 else OXCGRT_URL

    if RAW_PATH.exists():
        print(f"✓ Using cached {RAW_PATH}")
    else:
        download(url, RAW_PATH)

    table = load_stringency_table(RAW_PATH)
    print(f"✓ Loaded {len(table)} country-days for {table['country'].nunique()} countries")

    series = median_stringency(table, settings.country_list)
    series.write_csv(OUT_PATH)
    print(f"✓ Median over {', '.join(series.countries)}")
    print(f"✓ {series.start} .. {len(series.values)} days -> {OUT_PATH}")


if __name__ == "__main__":
    try:
        main()
    except (requests.RequestException, CESError) as e:
        print(f"\n❌ Error: {e}")
        sys.exit(1)
