"""Exact information-theoretic checks on small discrete systems.

The systems follow one graphical model: a label Y generates a graph
variable G, and two channels hang off G — a representation Z and an
explanation S, each conditionally independent of everything else given G.
All mutual informations are computed by direct summation over the joint
table (nats), so sufficiency/necessity constructions and the resulting
inequalities between I(S;Z) and I(S;Y) can be verified to float precision
rather than estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

IDENTITY_TOL = 1e-12
INEQUALITY_TOL = 1e-9

DEFAULT_CARDS = {"Y": 2, "G": 6, "Z": 4, "S": 4}


def _validate_rows(name: str, table: np.ndarray) -> None:
    if np.any(table < 0):
        raise ValueError(f"{name}: negative probability entry")
    sums = table.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-12):
        raise ValueError(f"{name}: rows must sum to 1")


class DiscreteJoint:
    """Factorized joint distribution over (Y, G, Z, S).

    ``p_g_given_y`` may optionally be the product of a label-dependent
    signal part and a label-independent noise part, in which case G is
    indexed as ``g = g_signal * noise_card + g_noise`` and the variables
    ``"GS"`` and ``"GN"`` become addressable in MI queries.
    """

    def __init__(self, p_y: np.ndarray, p_g_given_y: np.ndarray,
                 p_z_given_g: np.ndarray, p_s_given_g: np.ndarray,
                 signal_card: int | None = None,
                 noise_card: int | None = None):
        self.p_y = np.asarray(p_y, dtype=np.float64)
        self.p_g_given_y = np.asarray(p_g_given_y, dtype=np.float64)
        self.p_z_given_g = np.asarray(p_z_given_g, dtype=np.float64)
        self.p_s_given_g = np.asarray(p_s_given_g, dtype=np.float64)
        _validate_rows("p_y", self.p_y)
        _validate_rows("p_g_given_y", self.p_g_given_y)
        _validate_rows("p_z_given_g", self.p_z_given_g)
        _validate_rows("p_s_given_g", self.p_s_given_g)
        y, g = self.p_g_given_y.shape
        if self.p_y.shape != (y,):
            raise ValueError("p_y does not match p_g_given_y")
        if self.p_z_given_g.shape[0] != g or self.p_s_given_g.shape[0] != g:
            raise ValueError("channel tables do not match the G cardinality")
        self.signal_card = signal_card
        self.noise_card = noise_card
        if (signal_card is None) != (noise_card is None):
            raise ValueError("signal_card and noise_card come together")
        if signal_card is not None and signal_card * noise_card != g:
            raise ValueError("signal_card * noise_card must equal |G|")
        self._joint: np.ndarray | None = None

    @property
    def cards(self) -> dict[str, int]:
        return {"Y": len(self.p_y), "G": self.p_g_given_y.shape[1],
                "Z": self.p_z_given_g.shape[1], "S": self.p_s_given_g.shape[1]}

    def joint(self) -> np.ndarray:
        """Dense p(y, g, z, s); cached after the first call."""
        if self._joint is None:
            self._joint = (self.p_y[:, None, None, None]
                           * self.p_g_given_y[:, :, None, None]
                           * self.p_z_given_g[None, :, :, None]
                           * self.p_s_given_g[None, :, None, :])
        return self._joint

    def _axes(self, names) -> tuple[int, ...]:
        if isinstance(names, str):
            names = (names,)
        decomposed = self.signal_card is not None
        table = {"Y": (0,), "Z": (2,), "S": (3,), "G": (1,)}
        axes: list[int] = []
        for name in names:
            if name in ("GS", "GN"):
                if not decomposed:
                    raise ValueError(
                        f"variable {name} requires a signal/noise decomposition")
                axes.extend({"GS": (1,), "GN": (2,)}[name])
            elif name in table:
                base = table[name]
                if decomposed:
                    # With G split into (GS, GN) the joint gains one axis.
                    base = {"Y": (0,), "G": (1, 2), "Z": (3,), "S": (4,)}[name]
                axes.extend(base)
            else:
                raise ValueError(f"unknown variable '{name}'")
        if len(set(axes)) != len(axes):
            raise ValueError(f"variables overlap: {names}")
        return tuple(axes)

    def _expanded_joint(self) -> np.ndarray:
        p = self.joint()
        if self.signal_card is None:
            return p
        y, _, z, s = p.shape
        return p.reshape(y, self.signal_card, self.noise_card, z, s)

    def mutual_information(self, a, b, cond=()) -> float:
        """Exact I(A; B | C) in nats; A, B, C are variable names or tuples."""
        ax_a, ax_b = self._axes(a), self._axes(b)
        ax_c = self._axes(cond) if cond else ()
        used = ax_a + ax_b + ax_c
        if len(set(used)) != len(used):
            raise ValueError(f"variable sets overlap: {a}, {b}, {cond}")
        p = self._expanded_joint()
        all_axes = tuple(range(p.ndim))

        def marg(keep: tuple[int, ...]) -> np.ndarray:
            drop = tuple(ax for ax in all_axes if ax not in keep)
            return p.sum(axis=drop, keepdims=True) if drop else p

        m_abc = marg(ax_a + ax_b + ax_c)
        m_ac = marg(ax_a + ax_c)
        m_bc = marg(ax_b + ax_c)
        m_c = marg(ax_c) if ax_c else np.ones(())
        mask = m_abc > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = (np.log(m_abc) - np.log(m_ac) - np.log(m_bc)
                    + (np.log(m_c) if ax_c else 0.0))
        total = np.where(mask, m_abc * logs, 0.0)
        # m_abc repeats over the summed-out axes; normalize by their size.
        repeat = int(np.prod([p.shape[ax] for ax in all_axes
                              if ax not in ax_a + ax_b + ax_c]))
        return float(total.sum() / repeat)

    def co_information(self, a, b, c) -> float:
        """I(A; B; C) via the difference of plain and conditional MI."""
        return self.mutual_information(a, b) - self.mutual_information(a, b, c)


# -- sampling and constructions ---------------------------------------------------

def _dirichlet_rows(rng: np.random.Generator, rows: int,
                    cols: int) -> np.ndarray:
    return rng.dirichlet(np.ones(cols), size=rows)


def sample_markov_system(rng: np.random.Generator,
                         cards: dict[str, int] | None = None) -> DiscreteJoint:
    """Random system respecting the graphical model, Dirichlet(1) factors."""
    c = dict(DEFAULT_CARDS)
    if cards:
        c.update(cards)
    if min(c.values()) < 2:
        raise ValueError("all cardinalities must be at least 2")
    return DiscreteJoint(
        p_y=rng.dirichlet(np.ones(c["Y"])),
        p_g_given_y=_dirichlet_rows(rng, c["Y"], c["G"]),
        p_z_given_g=_dirichlet_rows(rng, c["G"], c["Z"]),
        p_s_given_g=_dirichlet_rows(rng, c["G"], c["S"]),
    )


def posterior_label_rows(joint: DiscreteJoint) -> np.ndarray:
    """p(Y | G = g) for every g, shape (|G|, |Y|)."""
    w = joint.p_y[:, None] * joint.p_g_given_y
    p_g = w.sum(axis=0)
    rows = np.zeros((joint.p_g_given_y.shape[1], len(joint.p_y)))
    nz = p_g > 0
    rows[nz] = (w[:, nz] / p_g[nz]).T
    return rows


def make_sufficient_z(joint: DiscreteJoint,
                      row_tol: float = 1e-10) -> DiscreteJoint:
    """Replace the Z channel so Z captures everything G says about Y.

    Z becomes the deterministic equivalence class of g's label posterior;
    graphs with (numerically) identical posteriors share a class, so no
    label information survives past Z and none is lost either.
    """
    rows = posterior_label_rows(joint)
    classes: list[np.ndarray] = []
    assignment = np.zeros(len(rows), dtype=np.int64)
    for g, row in enumerate(rows):
        for k, rep in enumerate(classes):
            if np.max(np.abs(row - rep)) <= row_tol:
                assignment[g] = k
                break
        else:
            assignment[g] = len(classes)
            classes.append(row)
    p_z_given_g = np.zeros((len(rows), len(classes)))
    p_z_given_g[np.arange(len(rows)), assignment] = 1.0
    return DiscreteJoint(joint.p_y, joint.p_g_given_y, p_z_given_g,
                         joint.p_s_given_g, joint.signal_card,
                         joint.noise_card)


def sample_deterministic_label_system(
        rng: np.random.Generator, y_card: int = 2, signal_card: int = 4,
        noise_card: int = 3, z_card: int = 4,
        s_card: int = 4) -> DiscreteJoint:
    """Random system where the label is a deterministic function of G.

    The signal part of G is partitioned across labels (disjoint supports)
    and the noise part is independent of the label, giving the
    factorization the necessity analysis needs.
    """
    if signal_card < y_card:
        raise ValueError("need at least one signal value per label")
    blocks = np.array_split(np.arange(signal_card), y_card)
    p_gs_given_y = np.zeros((y_card, signal_card))
    for y, block in enumerate(blocks):
        p_gs_given_y[y, block] = rng.dirichlet(np.ones(len(block)))
    p_gn = rng.dirichlet(np.ones(noise_card))
    p_g_given_y = (p_gs_given_y[:, :, None] * p_gn[None, None, :]) \
        .reshape(y_card, signal_card * noise_card)
    g_card = signal_card * noise_card
    return DiscreteJoint(
        p_y=rng.dirichlet(np.ones(y_card)),
        p_g_given_y=p_g_given_y,
        p_z_given_g=_dirichlet_rows(rng, g_card, z_card),
        p_s_given_g=_dirichlet_rows(rng, g_card, s_card),
        signal_card=signal_card, noise_card=noise_card,
    )


def make_necessary_z(joint: DiscreteJoint) -> DiscreteJoint:
    """Set Z to the label read off G; requires deterministic labeling.

    Every reachable g must be generated by exactly one label (disjoint
    supports); Z then copies that label through G.
    """
    support = joint.p_g_given_y > 0
    p_g = (joint.p_y[:, None] * joint.p_g_given_y).sum(axis=0)
    label_of_g = np.zeros(support.shape[1], dtype=np.int64)
    for g in range(support.shape[1]):
        owners = np.flatnonzero(support[:, g])
        if p_g[g] <= 0:
            continue
        if len(owners) != 1:
            raise ValueError(
                "labeling is not deterministic: several labels generate "
                f"graph value {g}")
        label_of_g[g] = owners[0]
    p_z_given_g = np.zeros((support.shape[1], len(joint.p_y)))
    p_z_given_g[np.arange(support.shape[1]), label_of_g] = 1.0
    return DiscreteJoint(joint.p_y, joint.p_g_given_y, p_z_given_g,
                         joint.p_s_given_g, joint.signal_card,
                         joint.noise_card)


# -- checks and reports -------------------------------------------------------------

@dataclass
class MICheck:
    """One verified relation: either lhs <= rhs or lhs == rhs."""

    name: str
    kind: str  # "leq" or "eq"
    lhs: float
    rhs: float
    tolerance: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        if self.kind == "leq":
            return self.slack >= -self.tolerance
        return abs(self.slack) <= self.tolerance

    def to_json_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "lhs": self.lhs,
                "rhs": self.rhs, "slack": self.slack,
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class MICheckReport:
    construction: str
    checks: list[MICheck] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[MICheck]:
        return [c for c in self.checks if not c.passed]

    def to_json_dict(self) -> dict:
        return {"construction": self.construction,
                "all_passed": self.all_passed,
                "checks": [c.to_json_dict() for c in self.checks]}


def verify_theorem(joint: DiscreteJoint, which: str) -> MICheckReport:
    """Evaluate the inequality bundle matching a construction.

    ``which`` is one of ``"lemma"`` (any system: the explanation channel
    can never out-inform the graph itself), ``"sufficient"``,
    ``"necessary"`` or ``"both"`` (the bundles tied to the corresponding
    Z constructions, including the intermediate vanishing conditional MIs).
    """
    mi = joint.mutual_information
    checks: list[MICheck] = []

    def leq(name, lhs, rhs, tol=INEQUALITY_TOL):
        checks.append(MICheck(name, "leq", lhs, rhs, tol))

    def eq(name, lhs, rhs, tol=IDENTITY_TOL):
        checks.append(MICheck(name, "eq", lhs, rhs, tol))

    if which == "lemma":
        eq("I(S;Z|G) = 0 (explanation channel)", mi("S", "Z", "G"), 0.0)
        leq("I(Z;S) <= I(Z;G)", mi("Z", "S"), mi("Z", "G"))
    elif which == "sufficient":
        eq("I(G;Y|Z) = 0 (sufficiency)", mi("G", "Y", "Z"), 0.0)
        eq("I(Z;Y) = I(G;Y)", mi("Z", "Y"), mi("G", "Y"))
        eq("I(S;Y|Z) = 0 (intermediate)", mi("S", "Y", "Z"), 0.0)
        leq("I(S;Y) <= I(S;Z)", mi("S", "Y"), mi("S", "Z"))
    elif which == "necessary":
        eq("I(G;Z|Y) = 0 (necessity)", mi("G", "Z", "Y"), 0.0)
        if joint.signal_card is not None:
            eq("I(GN;Z) = 0 (noise ignored)", mi("GN", "Z"), 0.0)
        eq("I(S;Z|Y) = 0 (intermediate)", mi("S", "Z", "Y"), 0.0)
        leq("I(S;Z) <= I(S;Y)", mi("S", "Z"), mi("S", "Y"))
    elif which == "both":
        eq("I(G;Y|Z) = 0 (sufficiency)", mi("G", "Y", "Z"), 0.0)
        eq("I(G;Z|Y) = 0 (necessity)", mi("G", "Z", "Y"), 0.0)
        eq("I(S;Z) = I(S;Y)", mi("S", "Z"), mi("S", "Y"))
    else:
        raise ValueError(f"unknown construction '{which}'")
    return MICheckReport(construction=which, checks=checks)
