"""Reporting: delimited proof summaries plus rendered figures.

Reads the artifacts of a stamp run (chain, proofs, trust store) and
writes ``report.csv`` alongside PNG figures: a histogram of proof window
widths and a timeline of block timestamps against their proof windows.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Optional, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .chain_sim import read_chain
from .protocol import FreshnessProof, VerificationReport, verify_proof
from .tsa import TrustStore


def load_proofs(proofs_dir: Path) -> List[Tuple[Path, FreshnessProof]]:
    out = []
    for path in sorted(proofs_dir.glob("proof_*.json")):
        out.append((path, FreshnessProof.from_json(path.read_text(encoding="utf-8"))))
    return out


def write_csv(path: Path,
              rows: List[Tuple[Path, FreshnessProof, VerificationReport]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["proof_file", "valid", "window_start", "window_end", "window_width",
             "first_height", "last_height", "covered_blocks",
             "all_timestamps_ok", "failure_reasons", "warnings"]
        )
        for proof_path, proof, report in rows:
            writer.writerow(
                [proof_path.name, report.valid, report.window_start,
                 report.window_end, report.window_end - report.window_start,
                 report.covered_heights[0], report.covered_heights[1],
                 len(proof.covered_headers), report.all_timestamps_ok,
                 ";".join(report.failure_reasons), ";".join(report.warnings)]
            )


def plot_window_widths(path: Path, widths: List[int]) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(widths, bins=30, color="#3b6ea5", edgecolor="black", linewidth=0.4)
    ax.set_xlabel("proof window width T1 - T0 (s)")
    ax.set_ylabel("proofs")
    ax.set_title("Freshness proof window widths")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_timeline(path: Path,
                  rows: List[Tuple[Path, FreshnessProof, VerificationReport]],
                  chain_path: Optional[Path]) -> None:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for _, proof, report in rows:
        for hd, ok in zip(proof.covered_headers, report.timestamp_ok):
            ax.plot(hd.height, hd.timestamp, "o", markersize=3,
                    color="#2a7f3f" if ok else "#c0392b")
        lo, hi = report.covered_heights
        ax.fill_between([lo - 0.5, hi + 0.5], report.window_start,
                        report.window_end, alpha=0.15, color="#3b6ea5",
                        linewidth=0)
    if chain_path is not None and chain_path.exists():
        chain = read_chain(chain_path)
        heights = [b.header.height for b in chain[1:]]
        stamps = [b.header.timestamp for b in chain[1:]]
        ax.plot(heights, stamps, "-", linewidth=0.6, color="#888888",
                zorder=0, label="chain timestamps")
        ax.legend(loc="upper left", fontsize=8)
    ax.set_xlabel("block height")
    ax.set_ylabel("Unix time (s)")
    ax.set_title("Block timestamps vs. proof windows "
                 "(red marks fall outside their window)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def generate_report(run_dir: Path, trust_store_path: Optional[Path] = None,
                    figures: bool = True) -> dict:
    """Build report.csv (+ figures) for a stamp run directory."""
    run_dir = Path(run_dir)
    proofs_dir = run_dir / "proofs"
    if not proofs_dir.is_dir():
        raise FileNotFoundError(f"no proofs directory under {run_dir}")
    store_path = trust_store_path or run_dir / "trust_store.json"
    store = TrustStore.load(store_path)
    rows = [
        (path, proof, verify_proof(proof, store))
        for path, proof in load_proofs(proofs_dir)
    ]
    csv_path = run_dir / "report.csv"
    write_csv(csv_path, rows)
    written = {"csv": str(csv_path), "proofs": len(rows)}
    if figures and rows:
        widths_path = run_dir / "window_widths.png"
        timeline_path = run_dir / "timeline.png"
        plot_window_widths(
            widths_path,
            [r.window_end - r.window_start for _, _, r in rows],
        )
        plot_timeline(timeline_path, rows, run_dir / "chain.jsonl")
        written["figures"] = [str(widths_path), str(timeline_path)]
    return written
