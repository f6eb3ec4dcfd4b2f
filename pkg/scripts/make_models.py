"""Write the shipped regression models into models/."""

import argparse
from pathlib import Path

from risksens.model import dump_model
from risksens.oracles import (
    HarmonicSpec,
    dominance_chain,
    harmonic_chain,
    harmonic_model,
    peaked_model,
    two_state_model,
)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "models"))
    p.add_argument("--chain-size", type=int, default=204,
                   help="states in the ambient harmonic chain (covers sweeps to n=200)")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    models = {
        "harmonic_n4": harmonic_model(HarmonicSpec(4)),
        "harmonic_chain": harmonic_chain(args.chain_size),
        "dominance_chain": dominance_chain(),
        "peaked": peaked_model(),
        "two_state": two_state_model(),
    }
    for name, model in models.items():
        path = out / f"{name}.json"
        path.write_text(dump_model(model) + "\n")
        print(path)


if __name__ == "__main__":
    main()
