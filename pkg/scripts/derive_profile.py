"""Turn a per-layer table of a real network into a ``[model]`` config section.

The shipped configs use a synthetic five-layer profile.  To study a real
network, list its cut-able blocks in order in a JSON file::

    {"input_elements": 150528,
     "layers": [{"name": "conv1", "fp_flops": 1.18e8, "out_elements": 802816,
                 "params": 9408}, ...]}

``fp_flops`` is the forward cost of one sample through the block,
``out_elements`` the size of its output activation and ``params`` its
parameter count.  Tools such as fvcore, ptflops or torchinfo report all
three for PyTorch models; count only the blocks at which a cut is allowed
and fold everything in between into them.

    python scripts/derive_profile.py layers.json --bits 32 > model.toml
"""

import argparse
import json


def model_section(table: dict, bits: int, bp_ratio: float) -> str:
    layers = table["layers"]
    fp = [float(l["fp_flops"]) for l in layers]
    act = [float(table["input_elements"]) * bits] + [float(l["out_elements"]) * bits for l in layers]
    params = [float(l["params"]) * bits for l in layers]
    names = ", ".join(l.get("name", str(i + 1)) for i, l in enumerate(layers))
    fmt = lambda xs: "[" + ", ".join(f"{x:.6g}" for x in xs) + "]"
    return "\n".join([
        "[model]",
        f"# blocks: {names}",
        f"fp_flops = {fmt(fp)}",
        f"activation_bits = {fmt(act)}",
        f"param_bits = {fmt(params)}",
        f"bp_ratio = {bp_ratio}",
        "",
    ])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("table", help="JSON layer table")
    parser.add_argument("--bits", type=int, default=32, help="bits per element (default 32)")
    parser.add_argument("--bp-ratio", type=float, default=2.0,
                        help="backward/forward FLOP ratio (default 2)")
    args = parser.parse_args()
    with open(args.table) as fh:
        print(model_section(json.load(fh), args.bits, args.bp_ratio), end="")


if __name__ == "__main__":
    main()
