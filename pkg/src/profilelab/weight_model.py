"""Joint edge-weight laws for weighted b-ary trees, plus the preset catalog.

A model is a finite joint law of the b edge weights handed to the children of
a splitting node.  All presets use exact rational probabilities so that the
small-size oracles can run in exact arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Sequence

import numpy as np

__all__ = [
    "WeightModel",
    "MarginalLaw",
    "ValidationReport",
    "validate",
    "marginal",
    "sample_weights",
    "preset",
    "model_from_json",
    "model_to_json",
    "PRESET_NAMES",
]

PROB_TOL = 1e-12

Vec = tuple[int, ...]
Atom = tuple[object, tuple[Vec, ...]]  # (probability, b-tuple of weight vectors)


@dataclass(frozen=True)
class WeightModel:
    """Branch factor, lattice dimension and the finite joint law of the weights.

    ``atoms`` is a list of ``(p, (z_1, ..., z_b))`` pairs where each ``z_j`` is
    an integer vector of length ``d``.  ``root_shift`` is added once to the
    root's weighted depth (used by the linear-recursive-tree embedding, which
    hangs the whole tree below an imaginary unit-weight root edge).
    """

    b: int
    d: int
    atoms: tuple[Atom, ...]
    name: str = "custom"
    root_shift: Vec = ()

    def __post_init__(self):
        if not self.root_shift:
            object.__setattr__(self, "root_shift", (0,) * self.d)

    @property
    def cum_probs(self) -> np.ndarray:
        p = np.cumsum([float(a[0]) for a in self.atoms])
        p[-1] = 1.0
        return p

    @property
    def weight_array(self) -> np.ndarray:
        """Atom weights as an int64 array of shape (n_atoms, b, d)."""
        return np.array([a[1] for a in self.atoms], dtype=np.int64)


@dataclass(frozen=True)
class MarginalLaw:
    """The common law of a single edge weight, as a finite atom list."""

    atoms: tuple[tuple[Vec, object], ...]  # ((value, probability), ...)

    def as_dict(self) -> dict[Vec, float]:
        return {v: float(p) for v, p in self.atoms}

    @property
    def support(self) -> tuple[Vec, ...]:
        return tuple(v for v, _ in self.atoms)

    def values_probs(self) -> tuple[np.ndarray, np.ndarray]:
        vals = np.array([v for v, _ in self.atoms], dtype=float)
        probs = np.array([float(p) for _, p in self.atoms])
        return vals, probs


@dataclass
class ValidationReport:
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __iter__(self):
        return iter(self.problems)


def _marginal_of(model: WeightModel, j: int) -> dict[Vec, Fraction | float]:
    out: dict[Vec, Fraction | float] = {}
    for p, ws in model.atoms:
        v = tuple(ws[j])
        out[v] = out.get(v, 0) + p
    return out


def _marginals_equal(a: dict, b: dict) -> bool:
    keys = set(a) | set(b)
    return all(abs(float(a.get(k, 0)) - float(b.get(k, 0))) <= PROB_TOL for k in keys)


def validate(model: WeightModel) -> ValidationReport:
    """Check the model invariants; never raises, the report lists violations."""
    rep = ValidationReport()
    if model.b < 2:
        rep.problems.append(f"branch factor {model.b} < 2")
    if model.d < 1:
        rep.problems.append(f"lattice dimension {model.d} < 1")
    if not model.atoms:
        rep.problems.append("empty atom list")
        return rep
    mass = sum(float(p) for p, _ in model.atoms)
    if abs(mass - 1.0) > PROB_TOL:
        rep.problems.append(f"probability mass {mass} != 1")
    for p, ws in model.atoms:
        if not (0.0 < float(p) <= 1.0):
            rep.problems.append(f"atom probability {p} outside (0, 1]")
        if len(ws) != model.b:
            rep.problems.append(f"atom has {len(ws)} weight vectors, expected b={model.b}")
            continue
        for z in ws:
            if len(z) != model.d:
                rep.problems.append(f"weight vector {z} has dimension != d={model.d}")
            if any(int(c) != c for c in z):
                rep.problems.append(f"non-integer weight component in {z}")
    if len(model.root_shift) != model.d:
        rep.problems.append("root_shift dimension mismatch")
    if not rep.problems:
        m1 = _marginal_of(model, 0)
        for j in range(1, model.b):
            if not _marginals_equal(m1, _marginal_of(model, j)):
                rep.problems.append(f"marginals differ: Z_1 vs Z_{j + 1}")
                break
    return rep


def marginal(model: WeightModel) -> MarginalLaw:
    """The common law of each edge weight Z_j.

    Raises ValueError if the model fails validation (in particular if the
    b marginals are not identical).
    """
    rep = validate(model)
    if not rep.ok:
        raise ValueError("invalid weight model: " + "; ".join(rep.problems))
    m = _marginal_of(model, 0)
    atoms = tuple(sorted(m.items()))
    return MarginalLaw(atoms=atoms)


def sample_weights(model: WeightModel, rng: np.random.Generator) -> tuple[Vec, ...]:
    """Draw one joint b-tuple of edge weights."""
    i = int(np.searchsorted(model.cum_probs, rng.random(), side="right"))
    return model.atoms[min(i, len(model.atoms) - 1)][1]


# ---------------------------------------------------------------------------
# preset catalog
# ---------------------------------------------------------------------------

PRESET_NAMES = (
    "bst",
    "rrt",
    "port",
    "lopsided",
    "lmr",
    "colored",
    "webgraph",
    "dirchange",
    "combo2d",
)


def _atom(p, *vecs) -> Atom:
    return (p, tuple(tuple(int(c) for c in v) for v in vecs))


def _bernoulli_pair_coupled(p_one: Fraction, one=(1,), zero=(0,)) -> tuple[Atom, ...]:
    # Z_1 ~ Bernoulli(p_one), Z_2 = 1 - Z_1 (two-slot placement of a single mark)
    return (_atom(p_one, one, zero), _atom(1 - p_one, zero, one))


def preset(name: str, **params) -> WeightModel:
    """Build one of the catalogued example models.

    Parameters: ``port`` takes ``beta`` (positive int), ``lopsided`` takes
    ``c`` (nondecreasing positive ints), ``colored`` takes ``p`` in (0,1),
    ``webgraph`` takes ``alpha`` in (0,1).
    """
    name = name.lower()
    if name == "bst":
        model = WeightModel(b=2, d=1, atoms=(_atom(Fraction(1), (1,), (1,)),), name="bst")
    elif name == "rrt":
        model = WeightModel(b=2, d=1, atoms=_bernoulli_pair_coupled(Fraction(1, 2)), name="rrt")
    elif name == "dirchange":
        # level-dependent (0110)^(l-1) labelling is profile-equivalent to the
        # i.i.d. per-split coupling Z ~ Bernoulli(1/2), Z_2 = 1 - Z_1
        model = WeightModel(b=2, d=1, atoms=_bernoulli_pair_coupled(Fraction(1, 2)), name="dirchange")
    elif name == "lmr":
        # one step left counts +1, one step right counts -1
        atoms = (
            _atom(Fraction(1, 2), (1,), (-1,)),
            _atom(Fraction(1, 2), (-1,), (1,)),
        )
        model = WeightModel(b=2, d=1, atoms=atoms, name="lmr")
    elif name == "port":
        beta = int(params.pop("beta"))
        if beta < 1:
            raise ValueError("port preset needs integer beta >= 1")
        b = beta + 2
        p = Fraction(1, b)
        atoms = tuple(
            _atom(p, *[(1,) if j == k else (0,) for j in range(b)]) for k in range(b)
        )
        model = WeightModel(b=b, d=1, atoms=atoms, name="port", root_shift=(1,))
    elif name == "lopsided":
        c = tuple(int(x) for x in params.pop("c"))
        if not c or any(x <= 0 for x in c) or list(c) != sorted(c):
            raise ValueError("lopsided preset needs nondecreasing positive integers c")
        b = len(c)
        if b < 2:
            raise ValueError("lopsided preset needs at least two edge lengths")
        perms: dict[tuple, int] = {}
        for perm in permutations(c):
            perms[perm] = perms.get(perm, 0) + 1
        total = sum(perms.values())
        atoms = tuple(
            _atom(Fraction(k, total), *[(x,) for x in perm]) for perm, k in sorted(perms.items())
        )
        model = WeightModel(b=b, d=1, atoms=atoms, name="lopsided")
    elif name == "colored":
        p = Fraction(params.pop("p"))
        if not (0 < p < 1):
            raise ValueError("colored preset needs p in (0, 1)")
        q = 1 - p
        atoms = (
            _atom(p * p, (1,), (1,)),
            _atom(p * q, (1,), (0,)),
            _atom(q * p, (0,), (1,)),
            _atom(q * q, (0,), (0,)),
        )
        model = WeightModel(b=2, d=1, atoms=atoms, name="colored")
    elif name == "webgraph":
        alpha = Fraction(params.pop("alpha"))
        if not (0 < alpha < 1):
            raise ValueError("webgraph preset needs alpha in (0, 1)")
        q = alpha / 2  # marginal P(Z = 1); Z_2 = 0 whenever Z_1 = 1
        atoms = (
            _atom(q, (1,), (0,)),
            _atom(q, (0,), (1,)),
            _atom(1 - 2 * q, (0,), (0,)),
        )
        model = WeightModel(b=2, d=1, atoms=atoms, name="webgraph")
    elif name == "combo2d":
        # binary search tree depth in the first coordinate, an independent
        # fair edge mark in the second
        p = Fraction(1, 4)
        atoms = (
            _atom(p, (1, 0), (1, 0)),
            _atom(p, (1, 0), (1, 1)),
            _atom(p, (1, 1), (1, 0)),
            _atom(p, (1, 1), (1, 1)),
        )
        model = WeightModel(b=2, d=2, atoms=atoms, name="combo2d")
    else:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")
    if params:
        raise ValueError(f"unexpected parameters for preset {name!r}: {sorted(params)}")
    rep = validate(model)
    assert rep.ok, rep.problems
    return model


def model_from_json(doc: str | dict) -> WeightModel:
    """Load a custom model from the JSON document schema
    {"b": int, "d": int, "root_shift": [int, ...], "atoms": [{"p": number, "w": [[int, ...], ...]}]}.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    b = int(doc["b"])
    d = int(doc["d"])
    shift = tuple(int(x) for x in doc.get("root_shift", (0,) * d))
    atoms = tuple(
        (float(a["p"]), tuple(tuple(int(c) for c in w) for w in a["w"])) for a in doc["atoms"]
    )
    return WeightModel(b=b, d=d, atoms=atoms, name=str(doc.get("name", "custom")), root_shift=shift)


def model_to_json(model: WeightModel) -> dict:
    return {
        "name": model.name,
        "b": model.b,
        "d": model.d,
        "root_shift": list(model.root_shift),
        "atoms": [{"p": float(p), "w": [list(w) for w in ws]} for p, ws in model.atoms],
    }


def preset_from_cli(name: str, params: Sequence[str] = ()) -> WeightModel:
    """Build a preset from CLI ``k=v`` parameter strings."""
    kv = {}
    for s in params:
        k, _, v = s.partition("=")
        if k == "c":
            kv["c"] = tuple(int(x) for x in v.split(":"))
        elif k == "beta":
            kv["beta"] = int(v)
        else:
            kv[k] = Fraction(v)
    return preset(name, **kv)
