"""Shared output helper for the experiment scripts."""
import argparse
import warnings
from pathlib import Path

from grover_carving.cli import csv_text
from grover_carving.experiments import NonUnimodalWarning

# the grid fallback is expected near C = 100
warnings.simplefilter("ignore", NonUnimodalWarning)


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--workers", type=int, default=1)
    return p


def write(out_dir: str, name: str, columns: dict) -> Path:
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns), encoding="utf-8", newline="\n")
    print(f"wrote {path}")
    return path
