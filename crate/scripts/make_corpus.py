#!/usr/bin/env python3
"""Deterministic generator of small drug-like SMILES by fragment assembly.

Writes one SMILES per line to stdout. Candidates still need the Rust audit
(`cargo run -p weakchem-chem --example corpus_audit`) to drop molecules that
fail parsing or do not fit the image grid.
"""
import argparse
import random

# ring templates: list of atom tokens in ring order; '*' marks positions
# that may carry a substituent
RINGS = [
    ["c*", "c*", "c*", "c*", "c*", "c*"],
    ["c*", "c*", "n", "c*", "c*", "c*"],
    ["c*", "n", "c*", "n", "c*", "c*"],
    ["c*", "c*", "o", "c*", "c*"],
    ["c*", "c*", "s", "c*", "c*"],
    ["c*", "c*", "[nH]", "c*", "c*"],
    ["c*", "n", "[nH]", "c*", "c*"],
    ["c*", "n", "c*", "o", "c*"],
    ["C*", "C*", "C*", "C*", "C*", "C*"],
    ["C*", "C*", "N", "C*", "C*", "C*"],
    ["C*", "C*", "O", "C*", "C*", "C*"],
    ["C*", "C*", "N", "C*", "C*"],
    ["C*", "C*", "C*", "C*", "C*"],
    ["C*", "C*", "C*"],
    ["C*", "C*", "C*", "C*"],
    ["C*", "N", "C*", "C*", "N", "C*"],
]

FUSED = ["c1ccc2ccccc2c1", "c1ccc2[nH]ccc2c1", "c1ccc2ncccc2c1", "c1ccc2occc2c1", "c1ccc2c(c1)CCC2", "c1ccc2c(c1)OCO2"]

SUBSTITUENTS = [
    "C", "C", "C", "CC", "O", "O", "N", "F", "Cl", "Br", "OC", "C(=O)O", "C(=O)N", "C(=O)C",
    "C#N", "[N+](=O)[O-]", "S(=O)(=O)N", "CO", "CCO", "C(F)(F)F", "N(C)C", "C=O", "NC(=O)C",
    "C(C)C", "OCC", "S", "SC", "CN", "C(=O)OC", "I",
]

LINKERS = ["", "", "C", "CC", "O", "N", "C(=O)N", "NC(=O)", "S", "OC", "C=C", "C(=O)", "CO", "NC"]

CHAIN_GROUPS = ["C", "C", "C", "C(C)", "C(O)", "C(=O)", "N", "O", "C(N)", "C(F)", "C(Cl)", "C=C", "C#C", "S", "C(C)(C)"]
CHAIN_ENDS = ["C", "O", "N", "C(=O)O", "C(=O)N", "C#N", "F", "Cl", "CO", "C(=O)OC", "[NH3+]", "C(=O)[O-]"]


def ring_smiles(rng, template, digit, max_subs, subs_pool):
    atoms = []
    n_subs = rng.randint(0, max_subs)
    slots = [i for i, t in enumerate(template) if t.endswith("*")]
    chosen = set(rng.sample(slots, min(n_subs, len(slots))))
    for i, tok in enumerate(template):
        base = tok.rstrip("*")
        s = base
        if i == 0:
            s += str(digit)
        if i == len(template) - 1:
            s += str(digit)
        if i in chosen and i != 0:
            s += "(" + rng.choice(subs_pool) + ")"
        atoms.append(s)
    return "".join(atoms), 0 in chosen


def ring_molecule(rng):
    first, _ = ring_smiles(rng, rng.choice(RINGS), 1, 2, SUBSTITUENTS)
    if rng.random() < 0.15:
        first = rng.choice(FUSED)
    roll = rng.random()
    if roll < 0.45:
        head = rng.choice(SUBSTITUENTS)
        return head + first if rng.random() < 0.5 else first
    linker = rng.choice(LINKERS)
    second, _ = ring_smiles(rng, rng.choice(RINGS), 2, 1, SUBSTITUENTS[:20])
    if roll < 0.6:
        return rng.choice(SUBSTITUENTS) + first
    return first + linker + second if first[-1].isdigit() else first + linker + second


def chain_molecule(rng):
    n = rng.randint(2, 7)
    body = [rng.choice(CHAIN_GROUPS) for _ in range(n)]
    s = "".join(body) + rng.choice(CHAIN_ENDS)
    if rng.random() < 0.4:
        s = rng.choice(CHAIN_ENDS) + s
    return s


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=2600)
    ap.add_argument("--seed", type=int, default=2017)
    ap.add_argument("--exclude", help="file of SMILES that must not be emitted")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    seen = set()
    if args.exclude:
        with open(args.exclude) as fh:
            seen.update(line.strip() for line in fh if line.strip())
    out = []
    while len(out) < args.count:
        smi = ring_molecule(rng) if rng.random() < 0.8 else chain_molecule(rng)
        if smi in seen or "==" in smi or "=(" in smi:
            continue
        seen.add(smi)
        out.append(smi)
    print("\n".join(out))


if __name__ == "__main__":
    main()
