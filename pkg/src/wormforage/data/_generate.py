"""Regenerate the packaged connectome fixtures.

Usage: python -m wormforage.data._generate
"""

from pathlib import Path

from wormforage.connectome import save_connectome, synthetic_connectome


def main() -> None:
    out = Path(__file__).resolve().parent
    small = synthetic_connectome(seed=7, n_neurons=60, n_synapses=400)
    save_connectome(small, out / "fixture_small.csv")
    full = synthetic_connectome(seed=11, n_neurons=368, n_synapses=3682, n_muscles=68)
    save_connectome(full, out / "fixture_full.csv")
    print(f"wrote fixtures to {out}")


if __name__ == "__main__":
    main()
