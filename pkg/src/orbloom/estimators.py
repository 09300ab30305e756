"""scikit-learn style wrappers around the coding schemes.

Each estimator holds one fixed code (drawn from ``seed``). ``transform`` maps
what the users send to received arrays, ``predict`` decodes received arrays,
and ``score`` is the fraction of rows recovered exactly. Parameters follow the
usual ``get_params``/``set_params`` contract, so the estimators work with
``sklearn.base.clone`` and parameter grids.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import LN2
from .bloom import BloomFilter
from .exceptions import ParameterError
from .schemes import (AMBIGUOUS, INACTIVE, ActivityPattern, Scenario, ar_decode, ar_encode,
                      decode_per_user, joint_decode, mac_codebooks, mac_encode, mt_decode,
                      mt_encode)


def _check_width(X: np.ndarray, width: int, what: str) -> None:
    if X.shape[1] != width:
        raise ParameterError(f"{what} must have {width} columns, got {X.shape[1]}")


class BloomMACCoder(BaseEstimator):
    """N users with M messages each over the OR channel, BF(L, K) codewords.

    ``predict`` uses per-user containment decoding, or joint decoding (exact
    reproduction of the received array) with ``joint=True``. Undecodable users
    are reported as ``AMBIGUOUS``.
    """

    def __init__(self, n_users=2, n_messages=2, length=16, n_hashes=None, kappa=LN2,
                 joint=False, seed=0):
        self.n_users = n_users
        self.n_messages = n_messages
        self.length = length
        self.n_hashes = n_hashes
        self.kappa = kappa
        self.joint = joint
        self.seed = seed

    def fit(self, X=None, y=None):
        self.scenario_ = Scenario(n_users=self.n_users, n_messages=self.n_messages,
                                  length=self.length, n_hashes=self.n_hashes,
                                  kappa=self.kappa, seed=self.seed)
        self.length_, self.n_hashes_ = self.scenario_.mac_params()
        self.codebooks_ = mac_codebooks(self.scenario_)
        return self

    def transform(self, X):
        """Messages, shape (n_samples, n_users), to received arrays."""
        check_is_fitted(self, "codebooks_")
        X = check_array(X, dtype=np.int64)
        _check_width(X, self.n_users, "message matrix")
        if X.size and (X.min() < 0 or X.max() >= self.n_messages):
            raise ParameterError("message ids must lie in [0, n_messages)")
        return np.stack([mac_encode(self.codebooks_, row).bits for row in X])

    def predict(self, Y):
        check_is_fitted(self, "codebooks_")
        Y = check_array(Y, dtype=bool)
        _check_width(Y, self.length_, "received arrays")
        out = np.full((Y.shape[0], self.n_users), AMBIGUOUS, dtype=np.int64)
        for i, bits in enumerate(Y):
            y = BloomFilter(bits)
            if self.joint:
                tuples = joint_decode(y, self.codebooks_)
                if len(tuples) == 1:
                    out[i] = next(iter(tuples))
            else:
                declared = decode_per_user(y, self.codebooks_).declared_messages
                out[i] = [declared[u] for u in range(self.n_users)]
        return out

    def score(self, Y, X):
        """Fraction of received arrays whose message tuple is recovered exactly."""
        X = check_array(X, dtype=np.int64)
        return float((self.predict(Y) == X).all(axis=1).mean())


class BloomActivityRecognizer(BaseEstimator):
    """Active users send a BF(L, K) signature; the receiver declares active
    every user whose signature is contained in the received array.

    With ``length``/``n_hashes`` unset, ``L = ceil(omega_a * N_a * log2 N)`` and
    ``K = round(L / N_a * ln 2)`` where ``N_a = round(N ** beta)``.
    """

    def __init__(self, n_users=1000, beta=0.5, omega_a=1.6, length=None, n_hashes=None, seed=0):
        self.n_users = n_users
        self.beta = beta
        self.omega_a = omega_a
        self.length = length
        self.n_hashes = n_hashes
        self.seed = seed

    def fit(self, X=None, y=None):
        self.scenario_ = Scenario(n_users=self.n_users, beta=self.beta, omega_a=self.omega_a,
                                  length=self.length, n_hashes=self.n_hashes, seed=self.seed)
        self.length_, self.n_hashes_ = self.scenario_.ar_params()
        return self

    def transform(self, S):
        """Activity indicators, shape (n_samples, n_users), to received arrays."""
        check_is_fitted(self, "scenario_")
        S = check_array(S, dtype=bool)
        _check_width(S, self.n_users, "activity matrix")
        rows = []
        for s in S:
            active = np.flatnonzero(s)
            pattern = ActivityPattern(frozenset(int(u) for u in active), {int(u): 0 for u in active})
            rows.append(ar_encode(self.scenario_, pattern).bits)
        return np.stack(rows)

    def predict(self, Y):
        check_is_fitted(self, "scenario_")
        Y = check_array(Y, dtype=bool)
        _check_width(Y, self.length_, "received arrays")
        out = np.zeros((Y.shape[0], self.n_users), dtype=bool)
        for i, bits in enumerate(Y):
            declared = ar_decode(BloomFilter(bits), self.scenario_).declared_active
            out[i, sorted(declared)] = True
        return out

    def score(self, Y, S):
        S = check_array(S, dtype=bool)
        return float((self.predict(Y) == S).all(axis=1).mean())


class BloomTwoPhaseTransmitter(BaseEstimator):
    """Two-phase message transmission with partial activity recognition.

    Inputs and outputs are message matrices with ``INACTIVE`` (-1) for silent
    users; received arrays are the phase-1 and phase-2 arrays side by side.
    """

    def __init__(self, n_users=1000, beta=0.5, gamma=0.0, kappa1=1.0, kappa2=2.0,
                 n_messages=None, seed=0):
        self.n_users = n_users
        self.beta = beta
        self.gamma = gamma
        self.kappa1 = kappa1
        self.kappa2 = kappa2
        self.n_messages = n_messages
        self.seed = seed

    def fit(self, X=None, y=None):
        self.scenario_ = Scenario(n_users=self.n_users, beta=self.beta, gamma=self.gamma,
                                  kappa1=self.kappa1, kappa2=self.kappa2,
                                  n_messages=self.n_messages, seed=self.seed)
        self.lengths_ = self.scenario_.mt_params()
        self.n_messages_ = self.scenario_.n_msgs
        return self

    def transform(self, U):
        check_is_fitted(self, "scenario_")
        U = check_array(U, dtype=np.int64)
        _check_width(U, self.n_users, "message matrix")
        if U.size and (U.min() < INACTIVE or U.max() >= self.n_messages_):
            raise ParameterError("entries must be -1 (inactive) or a message id")
        rows = []
        for u in U:
            active = np.flatnonzero(u != INACTIVE)
            pattern = ActivityPattern(frozenset(int(n) for n in active),
                                      {int(n): int(u[n]) for n in active})
            y1, y2 = mt_encode(self.scenario_, pattern)
            rows.append(np.concatenate([y1.bits, y2.bits]))
        return np.stack(rows)

    def predict(self, Y):
        check_is_fitted(self, "scenario_")
        Y = check_array(Y, dtype=bool)
        L1, _, L2, _ = self.lengths_
        _check_width(Y, L1 + L2, "received arrays")
        out = np.full((Y.shape[0], self.n_users), INACTIVE, dtype=np.int64)
        for i, bits in enumerate(Y):
            res = mt_decode(BloomFilter(bits[:L1]), BloomFilter(bits[L1:]), self.scenario_)
            for user, msg in res.declared_messages.items():
                out[i, user] = msg
        return out

    def score(self, Y, U):
        U = check_array(U, dtype=np.int64)
        return float((self.predict(Y) == U).all(axis=1).mean())
