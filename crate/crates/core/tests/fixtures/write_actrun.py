#!/usr/bin/env python3
# SPDX-License-Identifier: MIT OR Apache-2.0
"""Reference .actrun writer, written from FORMAT.md alone.

Fills every tensor with a closed-form pattern so a reader can check each
value exactly:

    sample[l, n, k] = ((7l + 3n + k) mod 251) / 8 - 10
    output[l, n, k] = ((5l + 11n + 2k) mod 257) / 4 - 30

Both patterns are exactly representable in float32.

usage: write_actrun.py OUT [--layers L] [--instances N] [--dim D] [--roles sample,output]
"""

import argparse
import array
import hashlib
import json
import struct
import sys


def sample_value(l, n, k):
    return ((l * 7 + n * 3 + k) % 251) / 8.0 - 10.0


def output_value(l, n, k):
    return ((l * 5 + n * 11 + k * 2) % 257) / 4.0 - 30.0


PATTERNS = {"sample": sample_value, "output": output_value}


def manifest(layers, instances, dim, roles):
    entries = []
    for n in range(instances):
        acceptable = n % 2 == 0
        pair = "blimp-%05d" % (n // 2)
        correct = n % 3 != 0
        answer = "yes" if acceptable else "no"
        said = answer if correct else ("no" if acceptable else "yes")
        entries.append(
            {
                "id": pair + ("-acc" if acceptable else "-unacc"),
                "source_pair_id": pair,
                "label": "acceptable" if acceptable else "unacceptable",
                "behavior": {
                    "generated_text": said.capitalize() + ".",
                    "expected_answer": answer,
                    "em_correct": correct,
                    "predicted_label": "acceptable" if said == "yes" else "unacceptable",
                },
            }
        )
    return {
        "format_version": 1,
        "model_id": "fixture/python-writer",
        "task": "blimp",
        "variation": "instruction_first",
        "sanity": "none",
        "intervention": "none",
        "num_layers": layers,
        "hidden_dim": dim,
        "roles": roles,
        "instances": entries,
        "notes": {"writer": "write_actrun.py"},
    }


def tensor_bytes(pattern, layers, instances, dim):
    values = array.array("f", (pattern(l, n, k) for l in range(layers) for n in range(instances) for k in range(dim)))
    if sys.byteorder != "little":
        values.byteswap()
    return values.tobytes()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--layers", type=int, default=25)
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--roles", default="sample,output")
    args = ap.parse_args()
    roles = args.roles.split(",")

    body = json.dumps(manifest(args.layers, args.instances, args.dim, roles), separators=(",", ":")).encode("utf-8")
    payload = bytearray()
    payload += b"ACTR"
    payload += struct.pack("<I", 1)
    payload += struct.pack("<Q", len(body))
    payload += body
    for role in roles:
        payload += tensor_bytes(PATTERNS[role], args.layers, args.instances, args.dim)
    payload += hashlib.sha256(payload).digest()

    with open(args.out, "wb") as f:
        f.write(payload)


if __name__ == "__main__":
    main()
