"""Self-contact consistency losses on posed mesh facets.

The distance term between two regions is the bidirectional sum of
nearest-neighbour facet-center distances; the normal term sums dot products
of matched facet normals (minimized at anti-parallel). Matches are frozen
by the caller between evaluations to keep gradients well-defined.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParameterError
from .regions import region_facets
from .spatial import nearest_neighbors

# brute force is faster below this pair-count; both backends agree exactly
_AUTO_BRUTE_LIMIT = 4096
_ZERO_DIST = 1e-12


@dataclass
class PairMatches:
    """Matches for one region pair (r1 < r2).

    pairs: psi_N — deduplicated (facet in r1, facet in r2) matches, sorted.
    directed: every directional nearest-neighbour term of the distance sum
    (used for gradients; duplicates kept).
    """

    region_pair: tuple
    pairs: list
    directed: list


@dataclass
class MatchSet:
    """Per contact pair: nearest-neighbour facet matches."""

    entries: dict = field(default_factory=dict)  # (r1, r2) -> PairMatches

    def total_matches(self):
        return sum(len(e.pairs) for e in self.entries.values())


@dataclass
class ContactLossValue:
    loss_distance: float                  # meters
    loss_normal: float                    # unitless
    per_pair_distance: dict               # (r1, r2) -> phi value


def _resolve_method(n, m, method):
    if method == "auto":
        return "brute" if n * m <= _AUTO_BRUTE_LIMIT else "kdtree"
    if method not in ("brute", "kdtree"):
        raise ParameterError(f"unknown NN method {method!r}")
    return method


def phi_distance(centers, ids1, ids2, method="auto"):
    """Bidirectional nearest-neighbour distance between two facet sets.

    Sums, for each facet of one set, the distance to its nearest facet
    center in the other set, in both directions. Returns (value, PairMatches
    with region_pair unset (None)).
    """
    ids1 = np.sort(np.asarray(ids1, dtype=int))
    ids2 = np.sort(np.asarray(ids2, dtype=int))
    if len(ids1) == 0 or len(ids2) == 0:
        raise ParameterError("phi_distance requires two non-empty facet sets")
    centers = np.asarray(centers, dtype=float)
    method = _resolve_method(len(ids1), len(ids2), method)

    nn12, d12 = nearest_neighbors(centers[ids1], centers[ids2], ids2, method)
    nn21, d21 = nearest_neighbors(centers[ids2], centers[ids1], ids1, method)
    value = float(d12.sum()) + float(d21.sum())

    directed = [(int(f1), int(f2)) for f1, f2 in zip(ids1, nn12)]
    directed += [(int(f1), int(f2)) for f2, f1 in zip(ids2, nn21)]
    pairs = sorted(set(directed))
    return value, PairMatches(None, pairs, directed)


def _selected(region_map, r, mode, k, centers):
    ids = region_facets(region_map, r, mode=mode, k=k, centers=centers)
    if len(ids) == 0:
        raise ParameterError(f"region {r} selects no facets")
    return ids


def phi_distance_regions(centers, region_map, r1, r2, mode="all", k=2,
                         method="auto"):
    """phi_distance between two regions under a facet selection mode."""
    lo, hi = min(r1, r2), max(r1, r2)
    ids_lo = _selected(region_map, lo, mode, k, centers)
    ids_hi = _selected(region_map, hi, mode, k, centers)
    value, matches = phi_distance(centers, ids_lo, ids_hi, method)
    matches.region_pair = (lo, hi)
    return value, matches


def loss_distance(centers, sig, region_map, mode="all", k=2, method="auto"):
    """Sum of phi_distance over the signature's contact pairs.

    Masked pairs are excluded. Returns (value, MatchSet, per-pair dict).
    """
    if sig.granularity != region_map.granularity:
        raise ParameterError("signature and region map granularities differ")
    matches = MatchSet()
    per_pair = {}
    total = 0.0
    for r1, r2 in sig.contact_pairs():
        value, pm = phi_distance_regions(centers, region_map, r1, r2,
                                         mode=mode, k=k, method=method)
        matches.entries[(r1, r2)] = pm
        per_pair[(r1, r2)] = value
        total += value
    return total, matches, per_pair


def loss_distance_frozen(centers, matches):
    """Distance loss and gradient w.r.t. facet centers with matches frozen.

    Returns (value, grad (F, 3)).
    """
    centers = np.asarray(centers, dtype=float)
    grad = np.zeros_like(centers)
    total = 0.0
    for key in sorted(matches.entries):
        for f1, f2 in matches.entries[key].directed:
            diff = centers[f1] - centers[f2]
            d = float(np.linalg.norm(diff))
            total += d
            if d > _ZERO_DIST:
                g = diff / d
                grad[f1] += g
                grad[f2] -= g
    return total, grad


def loss_normal(normals, matches):
    """Sum of dot products of matched facet normals, plus its gradient
    w.r.t. the normals. Minimized when matched normals are anti-parallel.
    """
    normals = np.asarray(normals, dtype=float)
    lengths = np.linalg.norm(normals, axis=1)
    used = sorted({f for e in matches.entries.values() for p in e.pairs for f in p})
    for f in used:
        if abs(lengths[f] - 1.0) > 1e-6:
            raise GeometryError(f"facet {f} normal is not unit length")
    total = 0.0
    grad = np.zeros_like(normals)
    for key in sorted(matches.entries):
        for f1, f2 in matches.entries[key].pairs:
            total += float(normals[f1] @ normals[f2])
            grad[f1] += normals[f2]
            grad[f2] += normals[f1]
    return total, grad


def contact_losses(centers, normals, sig, region_map, mode="all", k=2,
                   method="auto"):
    """Distance and normal losses with freshly computed matches."""
    l_d, matches, per_pair = loss_distance(centers, sig, region_map,
                                           mode=mode, k=k, method=method)
    l_n, _ = loss_normal(normals, matches) if matches.entries else (0.0, None)
    return ContactLossValue(l_d, l_n, per_pair), matches


def contact_distance_error(centers, sig, region_map):
    """Mean over contact pairs of the minimum facet-center distance, in mm.

    Returns None when the signature has no contact pairs.
    """
    if sig.granularity != region_map.granularity:
        raise ParameterError("signature and region map granularities differ")
    pairs = sig.contact_pairs()
    if not pairs:
        return None
    centers = np.asarray(centers, dtype=float)
    total = 0.0
    for r1, r2 in pairs:
        ids1 = np.flatnonzero(region_map.facet_to_region == r1)
        ids2 = np.flatnonzero(region_map.facet_to_region == r2)
        if len(ids1) == 0 or len(ids2) == 0:
            raise ParameterError(f"contact pair ({r1}, {r2}) references an empty region")
        d2 = ((centers[ids1][:, None, :] - centers[ids2][None, :, :]) ** 2).sum(axis=-1)
        total += float(np.sqrt(d2.min()))
    return 1000.0 * total / len(pairs)
