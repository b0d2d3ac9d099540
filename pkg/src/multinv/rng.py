"""Counter-based random stream derivation.

Every Monte Carlo run owns its own stream, derived purely from
(master seed, initial-state index, run index, policy tag, purpose) by
hashing the tuple into a Philox key.  Streams are therefore independent
of scheduling, worker count, and of which other policies were simulated
in the same session: adding a policy never perturbs existing streams.

Two purposes are kept separate so that demand draws can be shared
across policies (common random numbers) while policy-internal
randomness stays policy-specific:

* ``demand``  -- the demand sample path of a run,
* ``policy``  -- randomness consumed by randomized policies.
"""

from __future__ import annotations

import hashlib

import numpy as np

CRN_TAG = "__crn__"


def derive_key(*parts) -> np.ndarray:
    """Hash arbitrary parts into a 128-bit Philox key (two uint64 words)."""
    text = "|".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def stream(*parts) -> np.random.Generator:
    """A fresh Generator whose state is a pure function of ``parts``."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))


def demand_stream(master_seed: int, state_index: int, run_index: int,
                  policy_tag: str, crn: bool) -> np.random.Generator:
    """Demand stream of one run.

    With common random numbers on, the policy tag is replaced by a
    shared constant so competing policies see identical sample paths.
    """
    tag = CRN_TAG if crn else policy_tag
    return stream(master_seed, "demand", state_index, run_index, tag)


def policy_stream(master_seed: int, state_index: int, run_index: int,
                  policy_tag: str) -> np.random.Generator:
    """Policy-randomness stream of one run (never shared across policies)."""
    return stream(master_seed, "policy", state_index, run_index, policy_tag)
