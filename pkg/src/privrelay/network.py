"""Intermittent network model: Bernoulli node-to-server and node-to-node links.

A network over ``n`` nodes is described by three arrays:

* ``server_probs[i]``: probability that node i's uplink to the parameter
  server is alive in a given round.
* ``peer_probs[i, j]``: probability that the directed link i -> j is alive.
  The diagonal is the node talking to itself and is always 1.
* ``reciprocity[i, j]``: the joint success probability
  ``P(link i->j alive AND link j->i alive)``.  Independence corresponds to
  ``reciprocity = peer_probs * peer_probs.T``; positive correlation between
  the two directions of a link raises it toward ``min(p_ij, p_ji)``.

Server links are mutually independent and independent of peer links; distinct
unordered node pairs are independent of each other.  Only the two directions
of the same pair may be correlated, through ``reciprocity``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NetworkModel",
    "LinkRealization",
    "validate_model",
    "sample_links",
    "erdos_renyi_model",
]


@dataclass(frozen=True)
class NetworkModel:
    """Static description of the random connectivity.

    Attributes
    ----------
    server_probs : (n,) float array
        Per-node uplink success probabilities. Must be in (0, 1]: a node
        that can never reach the server contributes nothing and breaks
        unbiased weight normalization.
    peer_probs : (n, n) float array
        Directed link success probabilities, diagonal fixed at 1.
    reciprocity : (n, n) float array
        Joint success probability of the two directions of each pair.
        Symmetric, diagonal 1, and bounded by the Frechet inequalities
        ``max(0, p_ij + p_ji - 1) <= reciprocity_ij <= min(p_ij, p_ji)``.
        Must also sit at or above the independent value ``p_ij * p_ji``
        (negative correlation is outside the model).
    """

    server_probs: np.ndarray
    peer_probs: np.ndarray
    reciprocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "server_probs", np.asarray(self.server_probs, dtype=float)
        )
        object.__setattr__(
            self, "peer_probs", np.asarray(self.peer_probs, dtype=float)
        )
        object.__setattr__(
            self, "reciprocity", np.asarray(self.reciprocity, dtype=float)
        )

    @property
    def n(self) -> int:
        return self.server_probs.shape[0]


@dataclass(frozen=True)
class LinkRealization:
    """One round's sampled connectivity.

    ``ps_links[i]`` is 1 iff node i reached the server; ``peer_links[i, j]``
    is 1 iff the directed link i -> j was alive. Diagonal is always 1.
    """

    ps_links: np.ndarray
    peer_links: np.ndarray


def validate_model(model: NetworkModel) -> list[str]:
    """Return a list of human-readable violations; empty means valid.

    Checks shapes, probability ranges, the unit diagonals, symmetry of the
    reciprocity matrix, and the correlation bounds documented on
    :class:`NetworkModel`. Frechet comparisons get a 1e-12 slack so that
    models built from products of floats do not trip spurious violations.
    """
    out: list[str] = []
    p = model.server_probs
    pp = model.peer_probs
    rec = model.reciprocity

    if p.ndim != 1:
        return [f"server_probs must be 1-D, got shape {p.shape}"]
    n = p.shape[0]
    if n == 0:
        return ["empty model: need at least one node"]
    if pp.shape != (n, n):
        return [f"peer_probs must have shape ({n}, {n}), got {pp.shape}"]
    if rec.shape != (n, n):
        return [f"reciprocity must have shape ({n}, {n}), got {rec.shape}"]

    for i in range(n):
        if not 0.0 < p[i] <= 1.0:
            out.append(f"server prob p[{i}] = {p[i]} must be in (0, 1]")
    for i in range(n):
        for j in range(n):
            if not 0.0 <= pp[i, j] <= 1.0:
                out.append(f"peer prob P[{i},{j}] = {pp[i, j]} outside [0, 1]")
    for i in range(n):
        if pp[i, i] != 1.0:
            out.append(f"peer prob diagonal P[{i},{i}] = {pp[i, i]} must be 1")
        if rec[i, i] != 1.0:
            out.append(f"reciprocity diagonal E[{i},{i}] = {rec[i, i]} must be 1")

    tol = 1e-12
    for i in range(n):
        for j in range(i + 1, n):
            if rec[i, j] != rec[j, i]:
                out.append(
                    f"reciprocity E[{i},{j}] = {rec[i, j]} != E[{j},{i}] = {rec[j, i]}"
                )
                continue
            e = rec[i, j]
            pij, pji = pp[i, j], pp[j, i]
            lo_frechet = max(0.0, pij + pji - 1.0)
            indep = pij * pji
            hi = min(pij, pji)
            if e < lo_frechet - tol or e > hi + tol:
                out.append(
                    f"reciprocity E[{i},{j}] = {e} outside Frechet bounds "
                    f"[{lo_frechet}, {hi}] for P[{i},{j}] = {pij}, P[{j},{i}] = {pji}"
                )
            elif e < indep - tol:
                out.append(
                    f"reciprocity E[{i},{j}] = {e} below independent value "
                    f"P[{i},{j}]*P[{j},{i}] = {indep} (negative correlation unsupported)"
                )
    return out


def sample_links(
    model: NetworkModel, rng: np.random.Generator, *, check: bool = True
) -> LinkRealization:
    """Draw one connectivity round.

    Each unordered pair (i, j), i < j, consumes exactly one uniform draw and
    maps it to the four-outcome joint law

    ==========  ======================================
    (1, 1)      reciprocity_ij
    (1, 0)      p_ij - reciprocity_ij
    (0, 1)      p_ji - reciprocity_ij
    (0, 0)      1 - p_ij - p_ji + reciprocity_ij
    ==========  ======================================

    whose marginals are Ber(p_ij) and Ber(p_ji) by construction. Server
    links consume one uniform each, drawn before the pair block, so the
    stream layout is fixed for a given n.
    """
    if check:
        violations = validate_model(model)
        if violations:
            raise ValueError("invalid network model: " + "; ".join(violations))
    n = model.n
    ps = (rng.random(n) < model.server_probs).astype(np.uint8)

    peer = np.zeros((n, n), dtype=np.uint8)
    np.fill_diagonal(peer, 1)
    if n > 1:
        iu, ju = np.triu_indices(n, k=1)
        u = rng.random(iu.shape[0])
        p_fwd = model.peer_probs[iu, ju]
        p_rev = model.peer_probs[ju, iu]
        e = model.reciprocity[iu, ju]
        both = u < e
        fwd_only = ~both & (u < p_fwd)
        rev_only = ~both & ~fwd_only & (u < p_fwd + p_rev - e)
        peer[iu, ju] = (both | fwd_only).astype(np.uint8)
        peer[ju, iu] = (both | rev_only).astype(np.uint8)
    return LinkRealization(ps_links=ps, peer_links=peer)


def erdos_renyi_model(
    n: int, collab_prob: float, server_probs: np.ndarray
) -> NetworkModel:
    """Homogeneous peer connectivity: every off-diagonal link has the same
    success probability and link directions are independent.
    """
    if n < 1:
        raise ValueError(f"need at least one node, got n = {n}")
    if not 0.0 <= collab_prob <= 1.0:
        raise ValueError(f"collab_prob = {collab_prob} outside [0, 1]")
    p = np.asarray(server_probs, dtype=float)
    if p.shape != (n,):
        raise ValueError(f"server_probs must have shape ({n},), got {p.shape}")
    pp = np.full((n, n), float(collab_prob))
    np.fill_diagonal(pp, 1.0)
    rec = pp * pp.T
    np.fill_diagonal(rec, 1.0)
    model = NetworkModel(server_probs=p, peer_probs=pp, reciprocity=rec)
    violations = validate_model(model)
    if violations:
        raise ValueError("invalid network model: " + "; ".join(violations))
    return model
