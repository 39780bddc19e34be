"""Message catalogue, canonical line encoding and statechart legality.

The negotiator statechart is kept per conversation (one customer order the VEN
supplies, or one sub-order it buys).  ``NA_IN[state]`` lists the kinds a
conversation in ``state`` may receive; ``NA_OUT[state]`` the kinds it may emit
while in ``state`` (i.e. before the handler moves it on).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Union

from .domain import Day, DemandLine, Scenario


class MessageKind(str, Enum):
    C_US = "C_US"
    N_US = "N_US"
    RN_US = "RN_US"
    A_US = "A_US"
    C_DS = "C_DS"
    A_DS = "A_DS"
    N_DS = "N_DS"
    RN_DS = "RN_DS"
    D_PA_N = "D_PA_N"
    D_PA_M = "D_PA_M"
    D_PA_A = "D_PA_A"
    R_PA_US = "R_PA_US"
    R_PA_DS = "R_PA_DS"
    D_TNA = "D_TNA"
    R_TNA = "R_TNA"
    C_TNA = "C_TNA"
    HELP = "HELP"


K = MessageKind

# kinds that only ever travel between escalation agents and VENs
ESCALATION_KINDS = frozenset({K.D_TNA, K.R_TNA, K.C_TNA, K.HELP})


@dataclass(frozen=True)
class OrderLines:
    order_id: str
    lines: tuple[DemandLine, ...]


@dataclass(frozen=True)
class Proposal:
    order_id: str
    scenarios: tuple[Scenario, ...]


@dataclass(frozen=True)
class Reply:
    order_id: str
    accepted: bool
    scenario: Optional[Scenario] = None


@dataclass(frozen=True)
class PlanRequest:
    order_id: str
    lines: tuple[DemandLine, ...]
    overtime_cap: int = 0
    subcontract_cap: int = 0


@dataclass(frozen=True)
class PlanReply:
    order_id: str
    accepted: bool
    needs: tuple[DemandLine, ...] = ()
    scenarios: tuple[Scenario, ...] = ()


@dataclass(frozen=True)
class Probe:
    probe_id: str


@dataclass(frozen=True)
class Snapshot:
    ven: str
    load: tuple[tuple[int, int], ...]
    idle: tuple[tuple[int, int], ...]
    blocked: tuple[tuple[str, tuple[DemandLine, ...]], ...] = ()

    def idle_through(self, day: Day) -> int:
        return sum(q for d, q in self.idle if d <= day)


@dataclass(frozen=True)
class TnaOrder:
    order_id: str
    lines: tuple[DemandLine, ...]
    customer: str
    overtime_cap: int = 0
    subcontract_cap: int = 0


@dataclass(frozen=True)
class Help:
    order_id: str
    shortfall: tuple[DemandLine, ...]
    refused_by: str
    demand: tuple[DemandLine, ...] = ()    # everything the blocked order asks for


Payload = Union[OrderLines, Proposal, Reply, PlanRequest, PlanReply, Probe, Snapshot, TnaOrder, Help]

PAYLOAD_TYPE = {
    K.C_US: OrderLines, K.C_DS: OrderLines, K.A_US: OrderLines, K.A_DS: OrderLines,
    K.N_US: Proposal, K.N_DS: Proposal, K.D_PA_A: Proposal,
    K.RN_US: Reply, K.RN_DS: Reply, K.R_PA_DS: Reply,
    K.D_PA_N: PlanRequest, K.D_PA_M: PlanRequest,
    K.R_PA_US: PlanReply,
    K.D_TNA: Probe,
    K.R_TNA: Snapshot,
    K.C_TNA: TnaOrder,
    K.HELP: Help,
}


@dataclass(frozen=True)
class Message:
    seq: int
    sent_at: Day
    sender: str
    to: str
    kind: MessageKind
    payload: Payload

    @property
    def order_id(self) -> Optional[str]:
        return getattr(self.payload, "order_id", None)


class EncodeError(ValueError):
    pass


class DecodeError(ValueError):
    pass


class UnknownKind(DecodeError):
    pass


class MalformedPayload(DecodeError):
    pass


class SeqOrderError(DecodeError):
    pass


# ---- canonical JSON form -------------------------------------------------

def _line(ln: DemandLine) -> list:
    return [ln.product, ln.due, ln.qty]


def _scenario(s: Scenario) -> dict:
    return {"label": s.label, "lines": [_line(ln) for ln in s.lines]}


def _payload_obj(kind: MessageKind, p) -> dict:
    if not isinstance(p, PAYLOAD_TYPE[kind]):
        raise EncodeError(f"{kind.value} expects {PAYLOAD_TYPE[kind].__name__}, got {type(p).__name__}")
    if isinstance(p, OrderLines):
        return {"order": p.order_id, "lines": [_line(x) for x in p.lines]}
    if isinstance(p, Proposal):
        return {"order": p.order_id, "scenarios": [_scenario(s) for s in p.scenarios]}
    if isinstance(p, Reply):
        if p.accepted and p.scenario is None:
            raise EncodeError(f"accepted {kind.value} needs the chosen scenario")
        return {"order": p.order_id, "verdict": "y" if p.accepted else "n",
                "scenario": _scenario(p.scenario) if p.scenario else None}
    if isinstance(p, PlanRequest):
        return {"order": p.order_id, "lines": [_line(x) for x in p.lines],
                "overtime_cap": p.overtime_cap, "subcontract_cap": p.subcontract_cap}
    if isinstance(p, PlanReply):
        return {"order": p.order_id, "verdict": "y" if p.accepted else "n",
                "needs": [_line(x) for x in p.needs], "scenarios": [_scenario(s) for s in p.scenarios]}
    if isinstance(p, Probe):
        return {"probe": p.probe_id}
    if isinstance(p, Snapshot):
        return {"ven": p.ven, "load": [list(x) for x in p.load], "idle": [list(x) for x in p.idle],
                "blocked": [[oid, [_line(x) for x in lines]] for oid, lines in p.blocked]}
    if isinstance(p, TnaOrder):
        return {"order": p.order_id, "lines": [_line(x) for x in p.lines], "customer": p.customer,
                "overtime_cap": p.overtime_cap, "subcontract_cap": p.subcontract_cap}
    if isinstance(p, Help):
        return {"order": p.order_id, "shortfall": [_line(x) for x in p.shortfall], "refused_by": p.refused_by,
                "demand": [_line(x) for x in p.demand]}
    raise EncodeError(f"unsupported payload {p!r}")  # pragma: no cover


def encode(m: Message) -> str:
    if m.sender == m.to:
        raise EncodeError("message sent to itself")
    obj = {"seq": m.seq, "sent_at": m.sent_at, "from": m.sender, "to": m.to,
           "kind": m.kind.value, "payload": _payload_obj(m.kind, m.payload)}
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True)


def _need(obj, key, typ):
    if not isinstance(obj, dict) or key not in obj:
        raise MalformedPayload(f"missing field {key!r}")
    val = obj[key]
    if typ is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise MalformedPayload(f"field {key!r} must be an integer")
    if typ is not int and not isinstance(val, typ):
        raise MalformedPayload(f"field {key!r} must be {typ.__name__}")
    return val


def _dec_line(raw) -> DemandLine:
    if not (isinstance(raw, list) and len(raw) == 3 and isinstance(raw[0], str)
            and all(isinstance(x, int) and not isinstance(x, bool) for x in raw[1:])):
        raise MalformedPayload(f"bad demand line {raw!r}")
    try:
        return DemandLine(raw[0], raw[1], raw[2])
    except ValueError as exc:
        raise MalformedPayload(str(exc)) from None


def _dec_lines(obj, key) -> tuple[DemandLine, ...]:
    return tuple(_dec_line(x) for x in _need(obj, key, list))


def _dec_scenario(raw) -> Scenario:
    try:
        return Scenario(_dec_lines(raw, "lines"), _need(raw, "label", str))
    except ValueError as exc:
        if isinstance(exc, DecodeError):
            raise
        raise MalformedPayload(str(exc)) from None


def _verdict(obj) -> bool:
    v = _need(obj, "verdict", str)
    if v not in ("y", "n"):
        raise MalformedPayload(f"verdict must be y or n, got {v!r}")
    return v == "y"


def _dec_payload(kind: MessageKind, obj) -> Payload:
    typ = PAYLOAD_TYPE[kind]
    if typ is OrderLines:
        return OrderLines(_need(obj, "order", str), _dec_lines(obj, "lines"))
    if typ is Proposal:
        return Proposal(_need(obj, "order", str), tuple(_dec_scenario(s) for s in _need(obj, "scenarios", list)))
    if typ is Reply:
        raw = obj.get("scenario") if isinstance(obj, dict) else None
        return Reply(_need(obj, "order", str), _verdict(obj), _dec_scenario(raw) if raw is not None else None)
    if typ is PlanRequest:
        return PlanRequest(_need(obj, "order", str), _dec_lines(obj, "lines"),
                           _need(obj, "overtime_cap", int), _need(obj, "subcontract_cap", int))
    if typ is PlanReply:
        return PlanReply(_need(obj, "order", str), _verdict(obj), _dec_lines(obj, "needs"),
                         tuple(_dec_scenario(s) for s in _need(obj, "scenarios", list)))
    if typ is Probe:
        return Probe(_need(obj, "probe", str))
    if typ is Snapshot:
        def pairs(key):
            raw = _need(obj, key, list)
            if not all(isinstance(x, list) and len(x) == 2 and all(type(y) is int for y in x) for x in raw):
                raise MalformedPayload(f"bad {key} pairs")
            return tuple((x[0], x[1]) for x in raw)
        blocked = []
        for entry in _need(obj, "blocked", list):
            if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], str)):
                raise MalformedPayload("bad blocked entry")
            blocked.append((entry[0], tuple(_dec_line(x) for x in entry[1])))
        return Snapshot(_need(obj, "ven", str), pairs("load"), pairs("idle"), tuple(blocked))
    if typ is TnaOrder:
        return TnaOrder(_need(obj, "order", str), _dec_lines(obj, "lines"), _need(obj, "customer", str),
                        _need(obj, "overtime_cap", int), _need(obj, "subcontract_cap", int))
    if typ is Help:
        return Help(_need(obj, "order", str), _dec_lines(obj, "shortfall"), _need(obj, "refused_by", str),
                    _dec_lines(obj, "demand"))
    raise MalformedPayload(kind.value)  # pragma: no cover


def decode(line: str) -> Message:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"not a message line: {exc}") from None
    if not isinstance(obj, dict):
        raise DecodeError("message line must be an object")
    raw_kind = obj.get("kind")
    try:
        kind = MessageKind(raw_kind)
    except ValueError:
        raise UnknownKind(f"unknown message kind {raw_kind!r}") from None
    for key, typ in (("seq", int), ("sent_at", int), ("from", str), ("to", str)):
        try:
            _need(obj, key, typ)
        except MalformedPayload as exc:
            raise DecodeError(str(exc)) from None
    msg = Message(obj["seq"], obj["sent_at"], obj["from"], obj["to"], kind, _dec_payload(kind, obj.get("payload")))
    if encode(msg) != line.rstrip("\n"):
        # non-canonical spelling of a valid message; reject to keep traces byte-exact
        raise MalformedPayload("line is not in canonical form")
    return msg


def decode_trace(lines: Iterable[str]) -> list[Message]:
    out: list[Message] = []
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        msg = decode(line)
        if out and msg.seq <= out[-1].seq:
            raise SeqOrderError(f"line {n}: seq {msg.seq} after {out[-1].seq}")
        out.append(msg)
    return out


# ---- statecharts -----------------------------------------------------------

class NaState(str, Enum):
    IDLE = "Idle"
    AWAITING_PLANNER = "AwaitingPlanner"
    AWAITING_SUPPLIER = "AwaitingSupplier"
    AWAITING_CUSTOMER_REPLY = "AwaitingCustomerReply"
    BLOCKED = "Blocked"
    DONE = "Done"
    SERVING_TNA = "ServingTna"


class PaState(str, Enum):
    IDLE = "Idle"
    PLANNING = "Planning"


S = NaState

NA_IN = {
    S.IDLE: {K.C_US, K.C_DS, K.C_TNA},
    S.AWAITING_PLANNER: {K.R_PA_US, K.R_PA_DS},
    S.AWAITING_SUPPLIER: {K.A_DS, K.N_DS},
    S.AWAITING_CUSTOMER_REPLY: {K.RN_US, K.RN_DS},
    S.BLOCKED: {K.C_TNA},
    S.DONE: {K.C_US, K.C_DS, K.C_TNA},
    S.SERVING_TNA: set(),
}

NA_OUT = {
    S.IDLE: {K.D_PA_N, K.A_US, K.A_DS, K.C_DS},
    S.AWAITING_PLANNER: {K.A_US, K.A_DS, K.N_US, K.N_DS, K.RN_DS, K.HELP},
    S.AWAITING_SUPPLIER: {K.D_PA_A, K.A_US, K.A_DS},
    S.AWAITING_CUSTOMER_REPLY: {K.D_PA_M, K.HELP},
    S.BLOCKED: {K.D_PA_M, K.D_PA_N},
    S.DONE: {K.D_PA_M},
    S.SERVING_TNA: {K.R_TNA},
}

PA_IN = {PaState.IDLE: {K.D_PA_N, K.D_PA_M, K.D_PA_A}, PaState.PLANNING: set()}
PA_OUT = {PaState.IDLE: set(), PaState.PLANNING: {K.R_PA_US, K.R_PA_DS}}

_RESPONSES = {K.R_PA_US: "planner request", K.R_PA_DS: "planner request", K.A_DS: "supplier request",
              K.N_DS: "supplier request", K.RN_US: "counter-proposal", K.RN_DS: "counter-proposal",
              K.R_TNA: "tier probe"}


@dataclass(frozen=True)
class Verdict:
    allowed: bool
    reason: str = ""

    def __bool__(self):
        return self.allowed


ALLOWED = Verdict(True)


def check_transition(state: Union[NaState, PaState], kind: MessageKind, direction: str) -> Verdict:
    """Pure legality check of ``kind`` travelling ``direction`` ('in'/'out') in ``state``."""
    if direction not in ("in", "out"):
        raise ValueError(direction)
    if isinstance(state, PaState):
        table = PA_IN if direction == "in" else PA_OUT
    else:
        if kind == K.D_TNA and direction == "in":
            return ALLOWED  # VEN-level probe, legal in every conversation state
        table = NA_IN if direction == "in" else NA_OUT
    if kind in table[state]:
        return ALLOWED
    if direction == "in" and kind in _RESPONSES and state in (S.IDLE, S.DONE, PaState.IDLE):
        return Verdict(False, f"no outstanding {_RESPONSES[kind]}")
    return Verdict(False, f"{kind.value} not allowed {direction} in state {state.value}")


@dataclass(frozen=True)
class Post:
    """An outgoing message before the bus stamps it with seq, day and sender."""

    to: str
    kind: MessageKind
    payload: Payload


class ProtocolViolation(RuntimeError):
    def __init__(self, agent: str, kind: MessageKind, reason: str):
        super().__init__(f"{agent}: {kind.value}: {reason}")
        self.agent, self.kind, self.reason = agent, kind, reason


# ---- agent addresses -------------------------------------------------------

def na_addr(ven: str) -> str:
    return f"{ven}.NA"


def pa_addr(ven: str) -> str:
    return f"{ven}.PA"


def tna_addr(tier: int) -> str:
    return f"TNA{tier}"


def party_of(addr: str) -> str:
    """VEN or external party behind an agent address."""
    return addr.split(".", 1)[0]
