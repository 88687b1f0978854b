#!/usr/bin/env python3
"""Regenerate the shared validation test vectors consumed by the web UI.

The UI's client-side validators must accept exactly the strings the server
accepts; this script derives the expected verdicts from the server-side
rules and writes them to frontend/shared/validation-vectors.json.
"""

import json
import random
import sys
from pathlib import Path

from idchain import identity

CPF_CASES = [
    "529.982.247-25", "52998224725", "52998224724", "11111111111",
    "00000000000", "123-45", "", "abc", "529.982.247-2x", "5299822472",
    "529982247255", "168.995.350-09", "111.444.777-35", "93541134780",
    "935.411.347-80", "9354113478a", "16899535008", "04370944058",
]

EMAIL_CASES = [
    "alice@example.com", "alice@@example.com", "alice@localhost", "",
    "a.b+c@sub.domain.org", "@example.com", "alice@example.c",
    "ALICE@EXAMPLE.COM", "alice @example.com", "alice@exam ple.com",
    "alice@example..com", "bob@x.co", "bob@x-y.co", "bob@.com",
]


def cpf_accepted(raw: str) -> bool:
    try:
        return identity.validate_cpf(identity.normalize_cpf(raw))
    except identity.CpfLengthError:
        return False


def main():
    rng = random.Random(7)
    cpfs = list(CPF_CASES)
    # random 11-digit strings; almost all invalid, a few valid by luck
    cpfs += [f"{rng.randrange(10 ** 11):011d}" for _ in range(40)]
    vectors = {
        "cpf": [{"value": c, "valid": cpf_accepted(c)} for c in cpfs],
        "email": [{"value": e, "valid": identity.validate_email(e)}
                  for e in EMAIL_CASES],
    }
    out = Path(__file__).resolve().parent.parent / "frontend" / "shared" / \
        "validation-vectors.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(vectors, indent=2) + "\n")
    print(f"wrote {out} ({len(vectors['cpf'])} cpf, "
          f"{len(vectors['email'])} email cases)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
