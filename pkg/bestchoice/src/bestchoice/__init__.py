"""
bestchoice: the game of best choice under a weighted distribution f(π) ∝ θ^{c(π)}.

Finite-N closed forms with enumeration and backward-induction oracles, the
N → ∞ curves and their regimes, the exponential-integral limit (α, β) and an
exact Monte Carlo sampler. The CLI (`bestchoice`) emits CSV/JSON for all of it.
"""

from __future__ import annotations

__all__ = [
    "__version__",
]

# Keep in sync with pyproject.toml.
__version__ = "0.1.0"
