"""Reaction networks, propensities and stoichiometric updates.

A network is described by a JSON document::

    {"species": ["S1", "S2"],
     "reactions": [{"alpha": [1, 0], "beta": [0, 1], "c": 1.0, "propensity": "mass_action"},
                   {"alpha": [0, 1], "beta": [1, 0], "c": 1e-4, "propensity": "mass_action"}],
     "frozen": {"S3": 200000},          # optional, or a list of names with values in x0
     "conserved_total": 300250,         # optional, eliminates the last non-frozen species
     "mode": "integer",                 # or "real"
     "parameters": {"Km": 202000.0},    # optional constants usable in expressions
     "x0": [...], "T": 1.0, "s": 8, "g": "x1"}  # optional simulation defaults

The simulation state holds only the active species: frozen species and the
species eliminated by the conservation law are reconstructed on the fly.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple, Sequence

import numba
import numpy as np

from . import expr as ex


class NetworkError(ValueError):
    """Invalid network definition."""

    def __init__(self, msg, line=None, col=None):
        if line is not None:
            msg = f"{msg} (line {line}, column {col})"
        super().__init__(msg)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Reaction:
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    c: float
    expression: ex.Node | None = None  # None means mass action
    source: str | None = None  # expression text as written in the document

    @property
    def zeta(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.alpha, self.beta))

    @property
    def is_mass_action(self) -> bool:
        return self.expression is None


@dataclass(frozen=True)
class ReactionNetwork:
    """Validated network. ``state_names`` are the coordinates of a state vector."""

    species_names: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    mode: str = "integer"
    frozen: tuple[tuple[str, float], ...] = ()
    conserved_total: float | None = None
    parameters: tuple[tuple[str, float], ...] = ()
    defaults: tuple[tuple[str, Any], ...] = field(default=(), compare=False)

    def __post_init__(self):
        L = len(self.species_names)
        if L < 1:
            raise NetworkError("l >= 1 violated: no species")
        if len(self.reactions) < 1:
            raise NetworkError("d >= 1 violated: no reactions")
        if len(set(self.species_names)) != L:
            raise NetworkError("duplicate species names")
        if self.mode not in ("integer", "real"):
            raise NetworkError(f"mode must be 'integer' or 'real', got {self.mode!r}")
        for k, r in enumerate(self.reactions):
            if len(r.alpha) != L or len(r.beta) != L:
                raise NetworkError(f"reaction {k + 1}: alpha/beta must have length {L}")
            if any(int(v) != v or v < 0 for v in r.alpha + r.beta):
                raise NetworkError(f"reaction {k + 1}: alpha/beta entries must be nonnegative integers")
            if not (r.c >= 0 and math.isfinite(r.c)):
                raise NetworkError(f"reaction {k + 1}: negative rate constant {r.c}")
            if r.expression is not None and any(i >= L for i in ex.species_used(r.expression)):
                raise NetworkError(f"reaction {k + 1}: expression references unknown species")
        names = set(self.species_names)
        for name, _ in self.frozen:
            if name not in names:
                raise NetworkError(f"unknown frozen species {name!r}")
        active = self._active_full()
        if len(active) == 0:
            raise NetworkError("all species are frozen")
        if self.conserved_total is not None:
            cons = [i for i in range(L) if self.species_names[i] not in dict(self.frozen)]
            for k, r in enumerate(self.reactions):
                if sum(r.zeta[i] for i in cons) != 0:
                    raise NetworkError(f"reaction {k + 1} violates the declared conservation law")
            if len(active) < 1:
                raise NetworkError("conservation law leaves no free species")
        self._build_tables()

    # -- layout ---------------------------------------------------------
    def _active_full(self):
        fz = dict(self.frozen)
        idx = [i for i, s in enumerate(self.species_names) if s not in fz]
        if self.conserved_total is not None:
            idx = idx[:-1]
        return idx

    def _build_tables(self):
        L = len(self.species_names)
        fz = dict(self.frozen)
        active = self._active_full()
        free = [i for i, s in enumerate(self.species_names) if s not in fz]
        elim = free[-1] if self.conserved_total is not None else None
        alpha = np.array([r.alpha for r in self.reactions], dtype=np.int64)
        beta = np.array([r.beta for r in self.reactions], dtype=np.int64)
        zeta_full = beta - alpha
        # bypass frozen-dataclass immutability for derived caches
        obj = object.__setattr__
        obj(self, "_active", np.array(active, dtype=np.int64))
        obj(self, "_elim", elim)
        obj(self, "_frozen_idx", np.array([self.species_names.index(n) for n in fz], dtype=np.int64))
        obj(self, "_frozen_val", np.array(list(fz.values()), dtype=np.float64))
        obj(self, "_alpha_full", alpha)
        obj(self, "_zeta_full", zeta_full)
        obj(self, "_zeta", np.ascontiguousarray(zeta_full[:, active]))
        obj(self, "_L_full", L)
        obj(self, "_param_dict", dict(self.parameters))
        # Precompute mass-action factors: frozen species contribute constants.
        ma = []
        for k, r in enumerate(self.reactions):
            const = r.c
            terms = []
            if r.expression is None:
                for i, a in enumerate(r.alpha):
                    if a == 0:
                        continue
                    if self.species_names[i] in fz:
                        const *= _binom_float(float(fz[self.species_names[i]]), a)
                    elif i == elim:
                        terms.append((-1, a))
                    else:
                        terms.append((active.index(i), a))
            ma.append((const, tuple(terms)))
        obj(self, "_ma", tuple(ma))
        # flat tables for the compiled kernel (pure mass-action networks only)
        if all(r.expression is None for r in self.reactions):
            width = max(1, max(len(t) for _, t in ma))
            idx = np.full((len(ma), width), -2, dtype=np.int64)
            pw = np.zeros((len(ma), width), dtype=np.int64)
            for k, (_, terms) in enumerate(ma):
                for q, (j, a) in enumerate(terms):
                    idx[k, q], pw[k, q] = j, a
            total = float(self.conserved_total) if self.conserved_total is not None else 0.0
            obj(self, "_ma_flat", (np.array([c for c, _ in ma]), idx, pw, total))
        else:
            obj(self, "_ma_flat", None)

    @property
    def l(self) -> int:
        """Dimension of the (reduced) state vector."""
        return len(self._active)

    @property
    def d(self) -> int:
        return len(self.reactions)

    @property
    def state_names(self) -> tuple[str, ...]:
        return tuple(self.species_names[i] for i in self._active)

    @property
    def zeta(self) -> np.ndarray:
        """(d, l) stoichiometric matrix restricted to the state coordinates."""
        return self._zeta

    @property
    def rate_constants(self) -> np.ndarray:
        return np.array([r.c for r in self.reactions])

    @property
    def dtype(self):
        return np.int64 if self.mode == "integer" else np.float64

    def state_index(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            if not 0 <= name_or_index < self.l:
                raise IndexError(f"state coordinate {name_or_index} out of range")
            return int(name_or_index)
        names = self.state_names
        if name_or_index in names:
            return names.index(name_or_index)
        m = re.fullmatch(r"x(\d+)", str(name_or_index))
        if m and 1 <= int(m.group(1)) <= self.l:
            return int(m.group(1)) - 1
        raise KeyError(f"unknown state coordinate {name_or_index!r}")

    def reduce_state(self, full) -> np.ndarray:
        """Project a full species vector onto the state coordinates."""
        full = np.asarray(full)
        if full.shape[-1] != self._L_full:
            raise ValueError(f"full state needs {self._L_full} entries")
        return full[..., self._active].astype(self.dtype)

    def full_state(self, x) -> np.ndarray:
        """Reconstruct all species (float array) from state vectors ``x`` of shape (..., l)."""
        x = np.asarray(x)
        out = np.empty(x.shape[:-1] + (self._L_full,), dtype=np.float64)
        out[..., self._active] = x
        if len(self._frozen_idx):
            out[..., self._frozen_idx] = self._frozen_val
        if self._elim is not None:
            out[..., self._elim] = self.conserved_total - x.sum(axis=-1)
        return out

    # -- propensities ---------------------------------------------------
    def propensities(self, x) -> np.ndarray:
        """All propensities for states of shape (..., l); result shape (..., d).

        Negative or insufficient reactant counts give zero propensity.
        """
        x = np.asarray(x)
        if self._ma_flat is not None and x.ndim >= 1 and x.shape[-1] == self.l:
            X2 = np.ascontiguousarray(x.reshape(-1, self.l), dtype=np.float64)
            out = np.empty((X2.shape[0], self.d))
            _mass_action_kernel(X2, *self._ma_flat, out)
            return out.reshape(x.shape[:-1] + (self.d,))
        full = None
        out = np.empty(x.shape[:-1] + (self.d,), dtype=np.float64)
        for k, r in enumerate(self.reactions):
            if r.expression is None:
                const, terms = self._ma[k]
                val = np.full(x.shape[:-1], const)
                for j, a in terms:
                    if j < 0:
                        if full is None:
                            full = self.full_state(x)
                        xi = full[..., self._elim]
                    else:
                        xi = x[..., j]
                    val = val * _falling_binom(xi, a)
                out[..., k] = val
            else:
                if full is None:
                    full = self.full_state(x)
                out[..., k] = r.c * ex.evaluate(r.expression, full)
        np.maximum(out, 0.0, out=out)
        return out

    def apply(self, x, counts) -> np.ndarray:
        """x + counts @ zeta, vectorized over leading axes."""
        counts = np.asarray(counts)
        return np.asarray(x) + counts @ self._zeta


@numba.njit(cache=True)
def _mass_action_kernel(X, const, idx, pw, total, out):
    # same operation order as the numpy path, so results are bitwise equal
    n, l = X.shape
    d, width = idx.shape
    for i in range(n):
        elim = 0.0
        for q in range(l):
            elim += X[i, q]
        elim = total - elim
        for k in range(d):
            val = const[k]
            for q in range(width):
                j = idx[k, q]
                if j == -2:
                    break
                a = pw[k, q]
                xi = X[i, j] if j >= 0 else elim
                f = xi
                for m in range(1, a):
                    f = f * (xi - m)
                if a > 1:
                    fact = 1.0
                    for m in range(2, a + 1):
                        fact *= m
                    f = f / fact
                    if xi < a - 1:
                        f = 0.0
                elif xi < 0:
                    f = 0.0
                val = val * f
            out[i, k] = val if val > 0.0 else 0.0


def _binom_float(x: float, a: int) -> float:
    return float(_falling_binom(np.float64(x), a))


def _falling_binom(x, a: int):
    """C(x, a) as x(x-1)...(x-a+1)/a!, zero when x < a - 1."""
    x = np.asarray(x, dtype=np.float64)
    if a == 0:
        return np.ones_like(x)
    val = x.copy()
    for j in range(1, a):
        val = val * (x - j)
    if a > 1:
        val = val / math.factorial(a)
    return np.where(x < a - 1, 0.0, val) if a > 1 else np.where(x < 0, 0.0, val)


# -- single-state API ------------------------------------------------------
def propensity(net: ReactionNetwork, k: int, x) -> float:
    """Propensity of reaction ``k`` at one state, exact binomials in integer mode."""
    if not 0 <= k < net.d:
        raise IndexError(f"reaction index {k} out of range")
    x = np.asarray(x)
    if x.shape != (net.l,):
        raise ValueError(f"state must have shape ({net.l},)")
    r = net.reactions[k]
    if r.expression is not None:
        val = r.c * float(ex.evaluate(r.expression, net.full_state(x)))
        return max(val, 0.0)
    full = net.full_state(x)
    prod = r.c
    integer = net.mode == "integer" and np.all(full == np.round(full))
    for i, a in enumerate(r.alpha):
        if a == 0:
            continue
        xi = full[i]
        if integer:
            xi = int(round(xi))
            if xi < a:
                return 0.0
            prod *= math.comb(xi, a)
        else:
            prod *= float(_falling_binom(xi, a))
    return max(float(prod), 0.0)


class StateUpdate(NamedTuple):
    x: np.ndarray
    valid: bool


def apply_reactions(net: ReactionNetwork, x, counts) -> StateUpdate:
    """Return ``x + sum_k counts_k zeta_k`` and a validity flag (no negative entry)."""
    x = np.asarray(x)
    counts = np.asarray(counts)
    if counts.shape != (net.d,):
        raise ValueError(f"counts must have shape ({net.d},)")
    if net.mode == "integer" and np.any(counts < 0):
        raise ValueError("reaction counts must be nonnegative in integer mode")
    new = net.apply(x, counts).astype(net.dtype)
    valid = bool(np.all(new >= 0))
    if net.conserved_total is not None:
        valid = valid and bool(net.full_state(new)[net._elim] >= 0)
    return StateUpdate(new, valid)


def is_valid(net: ReactionNetwork, x) -> np.ndarray:
    """Validity flag per state: no negative species, including reconstructed ones."""
    x = np.asarray(x)
    ok = np.all(x >= 0, axis=-1)
    if net.conserved_total is not None:
        ok &= net.full_state(x)[..., net._elim] >= 0
    return ok


# -- documents -------------------------------------------------------------
def _locate(text: str, needle: str):
    pos = text.find(needle)
    if pos < 0:
        return None, None
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def parse_network(text: str | Mapping) -> ReactionNetwork:
    """Parse and validate a network document (JSON text or an already-loaded dict)."""
    if isinstance(text, Mapping):
        doc, raw = dict(text), json.dumps(text)
    else:
        raw = text
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise NetworkError(f"syntax error: {e.msg}", e.lineno, e.colno) from None
    if not isinstance(doc, dict):
        raise NetworkError("network document must be a JSON object")
    species = doc.get("species")
    if not isinstance(species, list) or not all(isinstance(s, str) for s in species):
        raise NetworkError("'species' must be an array of names")
    for s in species:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", s):
            raise NetworkError(f"species name {s!r} is not an identifier")
    L = len(species)
    params = doc.get("parameters", {}) or {}
    for p in params:
        if p in species:
            raise NetworkError(f"parameter {p!r} shadows a species")
    reactions_doc = doc.get("reactions")
    if not isinstance(reactions_doc, list):
        raise NetworkError("'reactions' must be an array")
    if len(reactions_doc) == 0:
        raise NetworkError("d >= 1 violated: no reactions")
    reactions = []
    for k, rd in enumerate(reactions_doc):
        try:
            alpha = tuple(int(v) for v in rd["alpha"])
            beta = tuple(int(v) for v in rd["beta"])
            if any(int(v) != v for v in list(rd["alpha"]) + list(rd["beta"])):
                raise ValueError
            c = float(rd.get("c", 1.0))
        except (KeyError, TypeError, ValueError):
            raise NetworkError(f"reaction {k + 1}: needs integer arrays 'alpha', 'beta' and number 'c'") from None
        if len(alpha) != L or len(beta) != L:
            raise NetworkError(f"reaction {k + 1}: alpha/beta must have length {L}")
        if c < 0:
            raise NetworkError(f"reaction {k + 1}: negative rate constant {c}")
        prop = rd.get("propensity", "mass_action")
        if prop == "mass_action":
            reactions.append(Reaction(alpha, beta, c))
            continue
        if not isinstance(prop, str):
            raise NetworkError(f"reaction {k + 1}: propensity must be 'mass_action' or an expression")
        line, col = _locate(raw, json.dumps(prop))
        try:
            ast = ex.parse_expression(prop, species, params, line=line, col=(col or 0))
        except ex.ExpressionError as e:
            raise NetworkError(f"reaction {k + 1}: {e}") from None
        reactions.append(Reaction(alpha, beta, c, ast, prop))

    frozen = doc.get("frozen", {}) or {}
    x0_doc = doc.get("x0")
    if isinstance(frozen, list):
        if x0_doc is None or len(x0_doc) != L:
            raise NetworkError("'frozen' given as a list needs a full-length 'x0' for the values")
        for name in frozen:
            if name not in species:
                raise NetworkError(f"unknown frozen species {name!r}")
        frozen = {name: x0_doc[species.index(name)] for name in frozen}
    for name in frozen:
        if name not in species:
            raise NetworkError(f"unknown frozen species {name!r}")
    defaults = {key: doc[key] for key in ("x0", "T", "s", "g") if key in doc}
    return ReactionNetwork(
        species_names=tuple(species),
        reactions=tuple(reactions),
        mode=doc.get("mode", "integer"),
        frozen=tuple((n, float(v)) for n, v in frozen.items()),
        conserved_total=None if doc.get("conserved_total") is None else float(doc["conserved_total"]),
        parameters=tuple((p, float(v)) for p, v in params.items()),
        defaults=tuple(defaults.items()),
    )


def load_network(path) -> ReactionNetwork:
    with open(path) as fh:
        return parse_network(fh.read())


def network_to_dict(net: ReactionNetwork) -> dict:
    doc: dict[str, Any] = {"species": list(net.species_names), "reactions": []}
    for r in net.reactions:
        if r.expression is None:
            prop = "mass_action"
        else:
            prop = r.source if r.source is not None else ex.to_string(r.expression, net.species_names)
        doc["reactions"].append({"alpha": list(r.alpha), "beta": list(r.beta), "c": r.c, "propensity": prop})
    if net.frozen:
        doc["frozen"] = {n: v for n, v in net.frozen}
    if net.conserved_total is not None:
        doc["conserved_total"] = net.conserved_total
    doc["mode"] = net.mode
    if net.parameters:
        doc["parameters"] = dict(net.parameters)
    doc.update(dict(net.defaults))
    return doc


def serialize_network(net: ReactionNetwork) -> str:
    return json.dumps(network_to_dict(net), indent=2)


# -- built-in benchmark models ---------------------------------------------
def _ma(alpha, beta, c):
    return {"alpha": alpha, "beta": beta, "c": c, "propensity": "mass_action"}


_REV_ISO = {
    "species": ["S1", "S2"],
    "reactions": [_ma([1, 0], [0, 1], 1.0), _ma([0, 1], [1, 0], 1e-4)],
    "x0": [100, 1_000_000],
    "T": 1.6,
    "s": 8,
    "g": "x1",
}

# 2 S1 + S2 <-> 3 S1,  S3 <-> S1
_SCHLOEGL_RX = [
    _ma([2, 1, 0], [3, 0, 0], 3e-7),
    _ma([3, 0, 0], [2, 1, 0], 1e-4),
    _ma([0, 0, 1], [1, 0, 0], 1e-3),
    _ma([1, 0, 0], [0, 0, 1], 3.5),
]

# PKA + 2 cAMP <-> PKA-cAMP2;  PKA-cAMP2 + 2 cAMP <-> PKA-cAMP4;  PKA-cAMP4 <-> PKAr + 2 PKAc
_PKA = {
    "species": ["PKA", "cAMP", "PKA_cAMP2", "PKA_cAMP4", "PKAr", "PKAc"],
    "reactions": [
        _ma([1, 2, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0], 2.6255e-6),
        _ma([0, 0, 1, 0, 0, 0], [1, 2, 0, 0, 0, 0], 0.02),
        _ma([0, 2, 1, 0, 0, 0], [0, 0, 0, 1, 0, 0], 3.8481e-6),
        _ma([0, 0, 0, 1, 0, 0], [0, 2, 1, 0, 0, 0], 0.02),
        _ma([0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 1, 2], 0.016),
        _ma([0, 0, 0, 0, 1, 2], [0, 0, 0, 1, 0, 0], 5.1325e-5),
    ],
    "x0": [33000, 33030, 1100, 1100, 1100, 1100],
    "T": 0.05,
    "s": 256,
    "g": "x1",
}

# Constant inflow of S1 at rate c1, cooperative conversion S1 -> S2 with a
# Hill-type rational propensity; the rate constant multiplies the expression.
_ENZYME = {
    "species": ["S1", "S2"],
    "parameters": {"Km": 2.02e5},
    "reactions": [
        {"alpha": [0, 0], "beta": [1, 0], "c": 0.5, "propensity": "1"},
        {"alpha": [1, 0], "beta": [0, 1], "c": 1.0, "propensity": "x1^2 / (Km^2 + x1^2)"},
    ],
    "x0": [0, 0],
    "T": 131072.0,
    "s": 1024,
    "g": "x1",
}

# The rate constants listed for the enzyme model (c1 = 0.5, c2 = 1) disagree
# with its stated propensity a1 = 1. The default multiplies each expression by
# its constant; the "literal" variant takes a1 = 1 as written.
_ENZYME_LITERAL = dict(_ENZYME, reactions=[dict(_ENZYME["reactions"][0], c=1.0), _ENZYME["reactions"][1]])
BUILTIN_VARIANTS: dict[tuple[str, str], dict] = {("enzyme-qssa", "literal"): _ENZYME_LITERAL}

BUILTIN_DOCUMENTS: dict[str, dict] = {
    "rev-iso": _REV_ISO,
    "rev-iso-normal": dict(_REV_ISO, mode="real"),
    "schloegl-1d": {
        "species": ["S1", "S2", "S3"],
        "reactions": _SCHLOEGL_RX,
        "frozen": ["S2", "S3"],
        "x0": [250, 100_000, 200_000],
        "T": 4.0,
        "s": 16,
        "g": "x1",
    },
    "schloegl-2d": {
        "species": ["S1", "S2", "S3"],
        "reactions": _SCHLOEGL_RX,
        "conserved_total": 250 + 100_000 + 200_000,
        "x0": [250, 100_000, 200_000],
        "T": 4.0,
        "s": 16,
        "g": "x1",
    },
    "pka": _PKA,
    "enzyme-qssa": _ENZYME,
}


class BuiltinModel(NamedTuple):
    net: ReactionNetwork
    x0: np.ndarray
    config: Any  # chain.SimConfig
    g: Any  # chain.Functional


def defaults_from_network(net: ReactionNetwork):
    """(x0, SimConfig, Functional) from the optional defaults of a document."""
    from .chain import Functional, SimConfig

    d = dict(net.defaults)
    if "x0" not in d:
        raise NetworkError("document has no 'x0'")
    x0 = np.asarray(d["x0"], dtype=np.float64)
    if x0.shape == (len(net.species_names),):
        x0 = net.reduce_state(x0)
    elif x0.shape == (net.l,):
        x0 = x0.astype(net.dtype)
    else:
        raise NetworkError(f"'x0' must list all {len(net.species_names)} species or the {net.l} state coordinates")
    config = SimConfig(T=float(d.get("T", 1.0)), s=int(d.get("s", 1)), mode=net.mode)
    g = Functional.parse(d.get("g", "x1"), net)
    return x0, config, g


def builtin_model(name: str, variant: str | None = None) -> BuiltinModel:
    """Benchmark model by name: (network, x0, SimConfig, functional).

    ``variant="literal"`` selects the alternative reading of the enzyme
    model's rates (``a1 = 1`` instead of ``0.5``); ``"enzyme-qssa:literal"``
    is accepted as a name too.
    """
    if variant is None and ":" in name:
        name, variant = name.split(":", 1)
    if name not in BUILTIN_DOCUMENTS:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(BUILTIN_DOCUMENTS)}")
    if variant is not None:
        if (name, variant) not in BUILTIN_VARIANTS:
            raise KeyError(f"model {name!r} has no variant {variant!r}")
        doc = BUILTIN_VARIANTS[(name, variant)]
    else:
        doc = BUILTIN_DOCUMENTS[name]
    net = parse_network(doc)
    x0, config, g = defaults_from_network(net)
    return BuiltinModel(net, x0, config, g)


def resolve_model(spec: str) -> BuiltinModel:
    """Built-in name or path to a JSON document."""
    if spec in BUILTIN_DOCUMENTS or spec.split(":", 1)[0] in BUILTIN_DOCUMENTS:
        return builtin_model(spec)
    net = load_network(spec)
    x0, config, g = defaults_from_network(net)
    return BuiltinModel(net, x0, config, g)
