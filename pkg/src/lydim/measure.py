"""Symbolic measures on the sequence space: Bernoulli and positive stationary Markov.

Both classes expose exact cylinder masses, a closed-form quasi-multiplicativity
constant, closed-form entropy (non-positive sign convention), and deterministic
ancestral sampling of finite words.  Measures are immutable; all methods are
pure, and sampling takes an explicit generator, so concurrent use is safe as
long as callers use distinct streams.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Bernoulli",
    "Markov",
    "SymbolicMeasure",
    "stationary_distribution",
    "verify_quasi_bernoulli",
]

_PROB_TOL = 1e-9


def _check_probability_vector(p, what: str) -> np.ndarray:
    p = np.array(p, dtype=float)  # copy: the instance freezes its own buffer
    if p.ndim != 1 or p.size < 2:
        raise ValueError(f"{what} must be a vector of length >= 2")
    if np.any(p <= 0.0):
        raise ValueError(f"{what} must have strictly positive entries")
    if abs(p.sum() - 1.0) > _PROB_TOL:
        raise ValueError(f"{what} must sum to 1 (got {p.sum():.12g})")
    return p


def stationary_distribution(transition) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 for a positive stochastic matrix."""
    P = np.asarray(transition, dtype=float)
    n = P.shape[0]
    a = P.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(a, b)


class Bernoulli:
    """Product measure with strictly positive symbol probabilities."""

    def __init__(self, p):
        self.p = _check_probability_vector(p, "p")
        self.p.flags.writeable = False
        self._logp = np.log(self.p)

    def __repr__(self) -> str:
        return f"Bernoulli(p={self.p.tolist()})"

    @property
    def n_symbols(self) -> int:
        return self.p.size

    def cylinder_mass(self, word) -> float:
        w = np.asarray(word, dtype=int)
        if w.size == 0:
            return 1.0
        return float(np.prod(self.p[w]))

    def log_cylinder_mass(self, word) -> float:
        """Running sum of log symbol probabilities; never underflows."""
        w = np.asarray(word, dtype=int)
        if w.size == 0:
            return 0.0
        return float(self._logp[w].sum())

    def qb_constant(self) -> float:
        # exact multiplicativity: m([ij]) = m([i]) m([j])
        return 1.0

    def entropy(self) -> float:
        """Sum p log p (<= 0)."""
        return float(np.sum(self.p * self._logp))

    def sample_words(self, length: int, count: int, rng: np.random.Generator) -> np.ndarray:
        if length < 1 or count < 1:
            raise ValueError("length and count must be >= 1")
        return rng.choice(self.n_symbols, size=(count, length), p=self.p).astype(np.int16)

    def sample_word(self, length: int, seed: int) -> np.ndarray:
        return self.sample_words(length, 1, np.random.default_rng(seed))[0]


class Markov:
    """Stationary Markov measure with strictly positive transition matrix.

    The initial distribution must be the stationary one (it is computed when
    omitted), which makes the measure shift-invariant.
    """

    def __init__(self, transition, initial=None):
        P = np.array(transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 2:
            raise ValueError("transition must be a square matrix of size >= 2")
        if np.any(P <= 0.0):
            raise ValueError("transition entries must be strictly positive")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > _PROB_TOL):
            raise ValueError("transition rows must sum to 1")
        pi = stationary_distribution(P) if initial is None else _check_probability_vector(initial, "initial")
        if np.max(np.abs(pi @ P - pi)) > _PROB_TOL:
            raise ValueError("initial distribution is not stationary for the transition matrix")
        self.transition = P
        self.initial = pi
        self.transition.flags.writeable = False
        self.initial.flags.writeable = False
        self._logP = np.log(P)
        self._cumP = np.cumsum(P, axis=1)

    def __repr__(self) -> str:
        return f"Markov(transition={self.transition.tolist()})"

    @property
    def n_symbols(self) -> int:
        return self.initial.size

    def cylinder_mass(self, word) -> float:
        w = np.asarray(word, dtype=int)
        if w.size == 0:
            return 1.0
        m = self.initial[w[0]]
        if w.size > 1:
            m = m * np.prod(self.transition[w[:-1], w[1:]])
        return float(m)

    def log_cylinder_mass(self, word) -> float:
        w = np.asarray(word, dtype=int)
        if w.size == 0:
            return 0.0
        s = np.log(self.initial[w[0]])
        if w.size > 1:
            s = s + self._logP[w[:-1], w[1:]].sum()
        return float(s)

    def qb_constant(self) -> float:
        """Exact quasi-multiplicativity constant.

        m([ij]) = m([i]) m([j]) * P(last(i), first(j)) / pi(first(j)), so the
        optimal constant is the max of that factor and its inverse over symbol
        pairs.
        """
        ratio = self.transition / self.initial[None, :]
        return float(max(ratio.max(), (1.0 / ratio).max()))

    def entropy(self) -> float:
        """sum_a pi_a sum_b P(a,b) log P(a,b)  (<= 0)."""
        return float(self.initial @ (self.transition * self._logP).sum(axis=1))

    def sample_words(self, length: int, count: int, rng: np.random.Generator) -> np.ndarray:
        if length < 1 or count < 1:
            raise ValueError("length and count must be >= 1")
        words = np.empty((count, length), dtype=np.int16)
        words[:, 0] = rng.choice(self.n_symbols, size=count, p=self.initial)
        if length > 1:
            u = rng.random((count, length - 1))
            for k in range(1, length):
                rows = self._cumP[words[:, k - 1]]
                words[:, k] = (u[:, k - 1, None] > rows).sum(axis=1)
        return words

    def sample_word(self, length: int, seed: int) -> np.ndarray:
        return self.sample_words(length, 1, np.random.default_rng(seed))[0]


SymbolicMeasure = Bernoulli | Markov


def _all_words(n_symbols: int, max_len: int):
    words = []
    for length in range(1, max_len + 1):
        grid = np.indices((n_symbols,) * length).reshape(length, -1).T
        words.extend(tuple(int(s) for s in row) for row in grid)
    return words


def verify_quasi_bernoulli(m: SymbolicMeasure, max_len: int) -> float:
    """Empirical quasi-multiplicativity constant by exhaustive enumeration.

    Max over all word pairs i, j with |i|, |j| <= max_len of
    m([ij]) / (m([i]) m([j])) and its inverse.
    """
    if m.n_symbols ** max_len > 10 ** 6:
        raise ValueError("enumeration too large: need n_symbols**max_len <= 1e6")
    words = _all_words(m.n_symbols, max_len)
    masses = {w: m.cylinder_mass(w) for w in words}
    worst = 1.0
    for i in words:
        mi = masses[i]
        for j in words:
            ratio = m.cylinder_mass(i + j) / (mi * masses[j])
            worst = max(worst, ratio, 1.0 / ratio)
    return worst
