"""Declarative builders for the four named Wigner's-friend experiments.

A scenario is a list of *wings*. Each wing is one friend measurement (a
system qubit copied into a memory qubit) together with the superobserver who
later either asks the friend (reads the memory) or supermeasures the lab.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import networkx as nx

from aoelab import quantum as q
from aoelab.quantum import FriendDilation, PureState, QubitObservable

ASK = "ask"
SUPER = "super"

KINDS = ("wigner", "bong", "lawrence", "ormrod-barrett")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Option:
    kind: str
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in (ASK, SUPER):
            raise ScenarioError(f"unknown option kind {self.kind!r}")
        if self.kind == SUPER and self.angle is None:
            raise ScenarioError("a supermeasurement option needs an angle")

    @property
    def label(self) -> str:
        return "Ask" if self.kind == ASK else "Super"


@dataclass(frozen=True)
class Party:
    name: str
    role: str  # "friend" | "superobserver"
    wings: tuple[int, ...]


@dataclass(frozen=True)
class ChoiceMenu:
    superobserver: str
    options: tuple[Option, ...]

    def __post_init__(self):
        if not self.options:
            raise ScenarioError(f"menu of {self.superobserver} is empty")
        kinds = [o.kind for o in self.options]
        if kinds.count(ASK) > 1:
            raise ScenarioError(f"Ask appears more than once in the menu of {self.superobserver}")
        # one supermeasurement per observer is all the theorems need
        if kinds.count(SUPER) > 1:
            raise ScenarioError(f"more than one supermeasurement in the menu of {self.superobserver}")


@dataclass(frozen=True)
class Wing:
    index: int
    friend: str
    superobserver: str
    dilation: FriendDilation
    friend_var: str
    super_var: str

    @property
    def friend_angle(self) -> float:
        return self.dilation.basis.angle

    @property
    def friend_key(self) -> str:
        return f"{self.friend}.{self.friend_var}"

    def super_key(self, option: Option) -> str:
        return f"{self.superobserver}.{self.variable(option)}"

    def variable(self, option: Option) -> str:
        return self.friend_var if option.kind == ASK else self.super_var

    @property
    def measure_node(self) -> str:
        return f"measure:{self.friend_var}"

    @property
    def choice_node(self) -> str:
        return f"choice:{self.superobserver}"

    def option_node(self, option: Option) -> str:
        return f"{option.kind}:{self.superobserver}"


@dataclass(frozen=True)
class Context:
    options: tuple[Option, ...]

    @property
    def label(self) -> str:
        return ",".join(o.label for o in self.options)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(o.kind for o in self.options)

    def __str__(self):
        return f"({self.label})"


@dataclass(frozen=True, eq=False)
class Scenario:
    kind: str
    name: str
    initial_state: PureState
    wings: tuple[Wing, ...]
    parties: tuple[Party, ...]
    menus: tuple[ChoiceMenu, ...]
    graph: nx.DiGraph
    accessor: str
    slices: dict[str, tuple[str, ...]] = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        validate(self)

    # structure ---------------------------------------------------------

    def contexts(self) -> list[Context]:
        return [Context(tuple(combo)) for combo in itertools.product(*(m.options for m in self.menus))]

    def context(self, label: str) -> Context:
        for ctx in self.contexts():
            if ctx.label.lower() == label.replace(" ", "").lower():
                return ctx
        raise ScenarioError(f"scenario {self.name!r} has no context {label!r}")

    def context_variables(self, ctx: Context) -> tuple[str, ...]:
        self._check_context(ctx)
        return tuple(w.variable(o) for w, o in zip(self.wings, ctx.options))

    def record_keys(self, ctx: Context) -> tuple[str, ...]:
        """Keys of every measurement event performed in ``ctx``: friend records, then superobserver results."""
        self._check_context(ctx)
        return tuple(w.friend_key for w in self.wings) + tuple(
            w.super_key(o) for w, o in zip(self.wings, ctx.options)
        )

    def accessed_keys(self, ctx: Context) -> tuple[str, ...]:
        return tuple(w.super_key(o) for w, o in zip(self.wings, ctx.options))

    @property
    def friends(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parties if p.role == "friend")

    @property
    def superobservers(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parties if p.role == "superobserver")

    def wing_of_super(self, name: str) -> Wing:
        for w in self.wings:
            if w.superobserver == name:
                return w
        raise ScenarioError(f"{name!r} is not a superobserver of {self.name!r}")

    def has_ask(self) -> bool:
        return any(o.kind == ASK for m in self.menus for o in m.options)

    # quantum data ------------------------------------------------------

    def lab_state(self) -> PureState:
        """Initial systems with every memory qubit in its ready state."""
        state = self.initial_state
        for w in self.wings:
            state = q.tensor(state, q.ket(w.dilation.memory))
        return state

    def dilated_state(self) -> PureState:
        state = self.lab_state()
        for w in self.wings:
            state = q.apply_dilation(state, w.dilation)
        return state

    def wing_measurement(self, wing: Wing, option: Option) -> q.ProjectiveMeasurement:
        if option.kind == ASK:
            return wing.dilation.record_measurement()
        return wing.dilation.supermeasurement(option.angle)

    def effective_observable(self, wing: Wing, option: Option) -> QubitObservable:
        if option.kind == ASK:
            return wing.dilation.basis
        return q.effective_wing_observable(wing.dilation, option.angle)

    # graph queries ------------------------------------------------------

    def active_nodes(self, ctx: Context) -> set[str]:
        chosen = {w.option_node(o) for w, o in zip(self.wings, ctx.options)}
        return {
            n for n, data in self.graph.nodes(data=True)
            if data["kind"] not in (ASK, SUPER) or n in chosen
        }

    def accessible(self, ctx: Context, observer: str) -> set[str]:
        """Variables carried along the graph to some event ``observer`` performs in ``ctx``."""
        self._check_context(ctx)
        active = self.active_nodes(ctx)
        g = self.graph
        found = set()
        for node in active:
            var = g.nodes[node].get("produces")
            if var is None:
                continue
            seen = {node}
            stack = [node]
            while stack:
                cur = stack.pop()
                if g.nodes[cur].get("performer") == observer:
                    found.add(var)
                    break
                for nxt in g.successors(cur):
                    if nxt in active and nxt not in seen and var in g.edges[cur, nxt]["carries"]:
                        seen.add(nxt)
                        stack.append(nxt)
        return found

    def _check_context(self, ctx: Context):
        if len(ctx.options) != len(self.menus):
            raise ScenarioError(f"context {ctx} does not cover the {len(self.menus)} menus of {self.name!r}")
        for menu, opt in zip(self.menus, ctx.options):
            if opt not in menu.options:
                raise ScenarioError(f"option {opt} is not on the menu of {menu.superobserver}")


def validate(s: Scenario) -> None:
    if s.kind not in KINDS:
        raise ScenarioError(f"unknown scenario kind {s.kind!r}")
    names = [p.name for p in s.parties]
    if len(set(names)) != len(names):
        raise ScenarioError(f"party names are not unique: {names}")
    if len(s.menus) != len(s.wings):
        raise ScenarioError("one menu per wing is required")
    for w, m in zip(s.wings, s.menus):
        if m.superobserver != w.superobserver:
            raise ScenarioError(f"menu {m.superobserver} does not match wing {w.index}")
    for w in s.wings:
        owners = [p for p in s.parties if p.role == "superobserver" and w.index in p.wings]
        if len(owners) != 1:
            raise ScenarioError(f"friend measurement {w.friend_var} needs exactly one superobserver")
    if not nx.is_directed_acyclic_graph(s.graph):
        raise ScenarioError(f"dependency graph of {s.name!r} has a cycle")
    for name, events in s.slices.items():
        for a, b in itertools.combinations(events, 2):
            if nx.has_path(s.graph, a, b) or nx.has_path(s.graph, b, a):
                raise ScenarioError(f"slice {name!r}: events {a} and {b} are not spacelike")


def with_leak(s: Scenario, variable: str, superobserver: str) -> Scenario:
    """Copy of ``s`` where ``variable`` is carried to the choice of ``superobserver``.

    Used to build counterexamples for the paradox-freedom check.
    """
    g = s.graph.copy()
    source = next(n for n, d in g.nodes(data=True) if d.get("produces") == variable and d["kind"] == "measure")
    g.add_edge(source, f"choice:{superobserver}", carries=frozenset({variable}), leak=True)
    return replace(s, graph=g, name=f"{s.name}+leak({variable}->{superobserver})")


# graph construction -----------------------------------------------------

def _build_graph(wings: Sequence[Wing], menus: Sequence[ChoiceMenu], accessor: str) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_node("prep", kind="prep")
    g.add_node("compare", kind="compare", performer=accessor)
    for w, menu in zip(wings, menus):
        g.add_node(w.measure_node, kind="measure", performer=w.friend, produces=w.friend_var)
        g.add_edge("prep", w.measure_node, carries=frozenset())
        g.add_node(w.choice_node, kind="choice", performer=w.superobserver)
        for opt in menu.options:
            node = w.option_node(opt)
            produced = w.variable(opt)
            g.add_node(node, kind=opt.kind, performer=w.superobserver, produces=produced)
            g.add_edge(w.choice_node, node, carries=frozenset())
            # asking relays the friend's record; a supermeasurement erases it
            carried = frozenset({w.friend_var}) if opt.kind == ASK else frozenset()
            g.add_edge(w.measure_node, node, carries=carried)
            g.add_edge(node, "compare", carries=frozenset({produced}))
    return g


def _assemble(kind, name, state, wings, parties, menus, accessor, slices=None, params=None) -> Scenario:
    graph = _build_graph(wings, menus, accessor)
    return Scenario(
        kind=kind,
        name=name,
        initial_state=state,
        wings=tuple(wings),
        parties=tuple(parties),
        menus=tuple(menus),
        graph=graph,
        accessor=accessor,
        slices=dict(slices or {}),
        params=dict(params or {}),
    )


def _two_wing(kind, name, pair: PureState, c_angle, d_angle, a_angle, b_angle, with_ask: bool, slices=None):
    if pair.n_qubits != 2:
        raise ScenarioError(f"{kind} needs a two-qubit state, got {pair.n_qubits} qubits")
    pair = PureState(("S_C", "S_D"), pair.amplitudes)
    wings = (
        Wing(0, "Chidi", "Alice", FriendDilation("S_C", "M_C", QubitObservable(float(c_angle))), "C", "A"),
        Wing(1, "Divya", "Bob", FriendDilation("S_D", "M_D", QubitObservable(float(d_angle))), "D", "B"),
    )
    parties = (
        Party("Chidi", "friend", (0,)),
        Party("Divya", "friend", (1,)),
        Party("Alice", "superobserver", (0,)),
        Party("Bob", "superobserver", (1,)),
    )

    def menu(who, angle):
        opts = (Option(ASK), Option(SUPER, float(angle))) if with_ask else (Option(SUPER, float(angle)),)
        return ChoiceMenu(who, opts)

    menus = (menu("Alice", a_angle), menu("Bob", b_angle))
    params = {"c": float(c_angle), "d": float(d_angle), "a": float(a_angle), "b": float(b_angle)}
    return _assemble(kind, name, pair, wings, parties, menus, "Alice", slices, params)


def build_wigner_friend(system: PureState, friend_basis: float = 0.0, super_angle: float | None = None) -> Scenario:
    """One friend (Chidi) and one superobserver (Alice).

    ``super_angle`` defaults to the angle whose +1 outcome is the post-measurement
    lab state psi itself, so that the Super context predicts P(+1) = 1.
    """
    if system.n_qubits != 1:
        raise ScenarioError("the Wigner scenario needs a one-qubit system")
    if super_angle is None:
        super_angle = psi_super_angle(system)
    system = PureState(("S",), system.amplitudes)
    wing = Wing(0, "Chidi", "Alice", FriendDilation("S", "M", QubitObservable(float(friend_basis))), "C", "A")
    parties = (Party("Chidi", "friend", (0,)), Party("Alice", "superobserver", (0,)))
    menus = (ChoiceMenu("Alice", (Option(ASK), Option(SUPER, float(super_angle)))),)
    params = {"friend_basis": float(friend_basis), "super_angle": float(super_angle)}
    return _assemble("wigner", "wigner", system, (wing,), parties, menus, "Alice", params=params)


def psi_super_angle(system: PureState) -> float:
    """Supermeasurement angle whose +1 eigenvector is the dilated lab state.

    After the friend's measurement the lab is sum_k c_k |e_k>|k>; the logical
    rotation that picks it out is the system's own Bloch angle.
    """
    return q.bloch_angle(system)


def build_bong(pair: PureState | None = None, c_angle=0.0, d_angle=math.pi / 4,
               a_angle=math.pi / 2, b_angle=3 * math.pi / 4) -> Scenario:
    pair = q.singlet() if pair is None else pair
    return _two_wing("bong", "bong", pair, c_angle, d_angle, a_angle, b_angle, with_ask=True)


OB_SLICES = {
    "Alice+Bob": ("super:Alice", "super:Bob"),
    "Chidi+Divya": ("measure:C", "measure:D"),
    "Alice+Divya": ("super:Alice", "measure:D"),
    "Bob+Chidi": ("super:Bob", "measure:C"),
}


def build_ormrod_barrett(pair: PureState, c_angle, d_angle, a_angle, b_angle) -> Scenario:
    """Bong-style parties without Ask options, plus the four named spacelike slices."""
    return _two_wing("ormrod-barrett", "ormrod-barrett", pair, c_angle, d_angle, a_angle, b_angle,
                     with_ask=False, slices=OB_SLICES)


LAWRENCE_ANGLES = {"Y": 0.0, "X": math.pi / 2}


def build_lawrence(a_bases: Sequence[str] = ("Y", "Y", "Y"), b_bases: Sequence[str] = ("X", "X", "X")) -> Scenario:
    """GHZ scenario: Alice measures three qubits, slot agents Bob1..Bob3 ask or supermeasure.

    Each qubit is rotated by W = exp(-i pi/4 X) so that Y maps to Z (angle 0)
    and X stays X (angle pi/2); all observables then lie in the X-Z plane.
    """
    a_bases, b_bases = tuple(a_bases), tuple(b_bases)
    if len(a_bases) != 3 or len(b_bases) != 3:
        raise ScenarioError("Lawrence needs three basis flags per party")
    for flag in a_bases + b_bases:
        if flag not in LAWRENCE_ANGLES:
            raise ScenarioError(f"basis flag must be X or Y, got {flag!r}")
    labels = ("S1", "S2", "S3")
    state = q.ghz(labels)
    frame = q.y_to_z_frame()
    for lab in labels:
        state = state.apply(frame, (lab,))
    wings = tuple(
        Wing(i, "Alice", f"Bob{i + 1}",
             FriendDilation(f"S{i + 1}", f"M{i + 1}", QubitObservable(LAWRENCE_ANGLES[a_bases[i]])),
             f"A{i + 1}", f"B{i + 1}")
        for i in range(3)
    )
    parties = (Party("Alice", "friend", (0, 1, 2)),) + tuple(
        Party(f"Bob{i + 1}", "superobserver", (i,)) for i in range(3)
    )
    menus = tuple(
        ChoiceMenu(f"Bob{i + 1}", (Option(ASK), Option(SUPER, LAWRENCE_ANGLES[b_bases[i]])))
        for i in range(3)
    )
    params = {"a_bases": list(a_bases), "b_bases": list(b_bases), "frame": "Y->Z, X->X"}
    return _assemble("lawrence", "lawrence", state, wings, parties, menus, "Bob1", params=params)


# Convenience presets ------------------------------------------------------

def bong_default() -> Scenario:
    return build_bong()


def lawrence_default() -> Scenario:
    return build_lawrence()


def wigner_default() -> Scenario:
    return build_wigner_friend(q.plus("S"), 0.0)


def ormrod_barrett_default() -> Scenario:
    from aoelab.feasibility.hardy import default_hardy_configuration

    cfg = default_hardy_configuration()
    return build_ormrod_barrett(cfg.state(), **cfg.angle_kwargs())


PRESETS = {
    "wigner": wigner_default,
    "bong": bong_default,
    "lawrence": lawrence_default,
    "ormrod-barrett": ormrod_barrett_default,
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
