"""Sweep matching pursuit compression over geometric and signal kernel widths"""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import datetime
from typing import Dict, List

from dotenv import load_dotenv
from tqdm import tqdm

from fshapes.config import KernelConfig, MPConfig
from fshapes.discretization import discretize
from fshapes.io import read_shape
from fshapes.models import FCurrent
from fshapes.pursuit import mp_compress
from fshapes.synth import fiber_bundle

DEFAULT_GEOM_WIDTHS = [0.025, 0.05, 0.1, 0.2]
DEFAULT_SIGNAL_WIDTHS = [0.1, 0.2, 0.5, 1.0]


def compress_one(current: FCurrent, geom_width: float, sig_width: float, config: MPConfig, index: int) -> Dict:
    """
    Compress one current with one kernel pair.

    Args:
        current: Discretized input
        geom_width: lambda_g of the gaussian geometric kernel
        sig_width: lambda_f of the gaussian signal kernel
        config: Pursuit configuration
        index: Position in the sweep (for ordering)

    Returns:
        Result dictionary with atom count and residual ratio
    """
    kernels = KernelConfig(geom_width=geom_width, sig_kind="gaussian", sig_width=sig_width)
    try:
        result = mp_compress(kernels, current, config)
        return {
            "index": index,
            "geom_width": geom_width,
            "sig_width": sig_width,
            "atoms": len(result.atoms),
            "input_atoms": len(current),
            "compression_ratio": len(result.atoms) / len(current),
            "residual_ratio": result.residual_norms[-1] / result.input_norm,
            "converged": result.converged,
            "error": None,
        }
    except Exception as e:
        return {
            "index": index,
            "geom_width": geom_width,
            "sig_width": sig_width,
            "atoms": 0,
            "input_atoms": len(current),
            "compression_ratio": math.nan,
            "residual_ratio": math.nan,
            "converged": False,
            "error": str(e),
        }


def evaluate_compression(
    shape_file: str = None,
    fibers: int = 300,
    geom_widths: List[float] = DEFAULT_GEOM_WIDTHS,
    sig_widths: List[float] = DEFAULT_SIGNAL_WIDTHS,
    epsilon: float = 0.05,
    variant: str = "orthogonal",
    output_file: str = "compression_sweep.json",
    max_workers: int = 4,
) -> Dict:
    """
    Run the pursuit for every (lambda_g, lambda_f) pair in parallel.

    Args:
        shape_file: Shape file to compress (default: synthetic fiber bundle)
        fibers: Number of fibers of the synthetic bundle
        geom_widths: Geometric kernel widths to sweep
        sig_widths: Signal kernel widths to sweep
        epsilon: Relative residual threshold
        variant: greedy or orthogonal
        output_file: Path to save results
        max_workers: Number of parallel workers

    Returns:
        Dictionary with sweep metadata and per-pair results
    """
    shape = read_shape(shape_file) if shape_file else fiber_bundle(fibers=fibers)
    current = discretize(shape)
    config = MPConfig(epsilon=epsilon, variant=variant)
    pairs = [(g, f) for g in geom_widths for f in sig_widths]

    print(f"\n{'='*70}")
    print(f"Compression sweep: {len(current)} atoms, {len(pairs)} kernel pairs (Parallel: {max_workers} workers)")
    print(f"{'='*70}\n")

    results = []
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {
            executor.submit(compress_one, current, g, f, config, i): i for i, (g, f) in enumerate(pairs)
        }
        with tqdm(total=len(pairs), desc="Compressing") as pbar:
            for future in as_completed(futures):
                results.append(future.result())
                pbar.update(1)

    results.sort(key=lambda r: r["index"])
    failures = [r for r in results if r["error"]]

    summary = {
        "metadata": {
            "timestamp": datetime.now().isoformat(),
            "input": shape_file or f"fiber_bundle({fibers})",
            "input_atoms": len(current),
            "epsilon": epsilon,
            "variant": variant,
            "max_workers": max_workers,
        },
        "results": results,
    }
    with open(output_file, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)

    print(f"\n{'='*70}")
    print("SWEEP SUMMARY (atoms kept / input atoms)")
    print(f"{'='*70}")
    print("lambda_g \\ lambda_f " + "".join(f"{w:>10g}" for w in sig_widths))
    for g in geom_widths:
        row = [r for r in results if r["geom_width"] == g]
        print(f"{g:<20g}" + "".join(f"{r['compression_ratio']:>10.3f}" for r in row))
    if failures:
        print(f"\n⚠️  {len(failures)} pair(s) failed, first: {failures[0]['error']}")
    print(f"\n📊 Detailed results saved to: {output_file}")
    print(f"{'='*70}\n")
    return summary


if __name__ == "__main__":
    import argparse

    load_dotenv()

    parser = argparse.ArgumentParser(description="Sweep pursuit compression over kernel widths")
    parser.add_argument("--shape", help="Shape file to compress (default: synthetic fiber bundle)")
    parser.add_argument("--fibers", type=int, default=300, help="Fibers in the synthetic bundle")
    parser.add_argument("--eps", type=float, default=0.05, help="Relative residual threshold")
    parser.add_argument("--variant", choices=["greedy", "orthogonal"], default="orthogonal")
    parser.add_argument("-o", "--output", default="compression_sweep.json", help="Output file for results")
    parser.add_argument(
        "-w", "--workers", type=int, default=int(os.getenv("FSHAPES_THREADS", "4")), help="Number of parallel workers"
    )
    args = parser.parse_args()

    evaluate_compression(
        shape_file=args.shape,
        fibers=args.fibers,
        epsilon=args.eps,
        variant=args.variant,
        output_file=args.output,
        max_workers=args.workers,
    )
