"""Black-box simplex kernel.

Both controllers are untrusted. The decision module keeps a command sequence
that is known to be permanently safe from the current state and only swaps
it for a controller proposal after the checker has validated the proposal.
The command applied to the plant always comes from that stored sequence.
"""
from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Optional

import numpy as np

ACCEPTED = "accepted"
REJECTED = "rejected"
TIMED_OUT = "timed_out"


class ConfigurationError(ValueError):
    """The run cannot start: bad initial state, bad initial plan, bad config."""


class BudgetExceeded(Exception):
    pass


class CommandSequence:
    """Non-empty, immutable sequence of commands. Commands are opaque payloads."""

    __slots__ = ("_commands",)

    def __init__(self, commands: Iterable[Any]):
        cmds = tuple(commands)
        if not cmds:
            raise ValueError("a command sequence needs at least one command")
        self._commands = cmds

    @property
    def commands(self) -> tuple:
        return self._commands

    def __len__(self) -> int:
        return len(self._commands)

    def __iter__(self):
        return iter(self._commands)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return CommandSequence(self._commands[k])
        return self._commands[k]

    @property
    def last(self):
        return self._commands[-1]

    def __repr__(self) -> str:
        return f"CommandSequence(len={len(self)})"


def same_command(a: Any, b: Any) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        try:
            return bool(np.array_equal(np.asarray(a), np.asarray(b)))
        except Exception:
            return False
    return a == b


def dm_step(seq: CommandSequence) -> tuple[Any, CommandSequence]:
    """Pop the head command; a single remaining command is repeated forever."""
    if len(seq) == 1:
        return seq[0], seq
    return seq[0], seq[1:]


def last_command_extension(seq: CommandSequence, j: int) -> Any:
    """Command used ``j`` steps from now when ``seq`` is executed with tail repetition."""
    if j < 0:
        raise ValueError("j must be non-negative")
    return seq[j] if j < len(seq) else seq.last


@dataclass(frozen=True)
class SafetyVerdict:
    accepted: bool
    reason: str = "ok"
    step: Optional[int] = None
    pair: Optional[tuple] = None
    distance: Optional[float] = None

    @classmethod
    def ok(cls) -> "SafetyVerdict":
        return cls(True)

    @classmethod
    def reject(cls, reason: str, **kw) -> "SafetyVerdict":
        if reason == "ok":
            raise ValueError("a rejection needs a reason other than 'ok'")
        return cls(False, reason, **kw)

    def describe(self) -> str:
        if self.accepted:
            return "ok"
        parts = [self.reason]
        if self.step is not None:
            parts.append(f"step={self.step}")
        if self.pair is not None:
            parts.append("pair=%d-%d" % tuple(self.pair))
        if self.distance is not None:
            parts.append(f"d={self.distance:.6g}")
        return " ".join(parts)


@dataclass
class SafetyChecker:
    """Sound permanently-safe test plus its wall-clock budget (None = unlimited)."""
    is_permanently_safe: Callable[[Any, CommandSequence], SafetyVerdict]
    check_budget: Optional[float] = None


@dataclass
class PlantModel:
    """Discrete-time plant ``x' = step(x, u, w)``.

    ``sample_disturbance`` draws ``w`` from the disturbance set; leaving it
    unset means the deterministic plant (``w`` is always None). ``observe``
    optionally maps the true state to what controllers and the decision
    module get to see.
    """
    step: Callable[[Any, Any, Any], Any]
    admissible: Callable[[Any], bool]
    sample_disturbance: Optional[Callable[[np.random.Generator], Any]] = None
    observe: Optional[Callable[[Any, np.random.Generator], Any]] = None

    @property
    def deterministic(self) -> bool:
        return self.sample_disturbance is None


def call_with_budget(fn: Callable, *args, budget: Optional[float] = None):
    """Run ``fn(*args)``; give up after ``budget`` seconds.

    The abandoned call keeps running in a daemon thread but can only write
    into its own private result box, so it cannot touch caller state.
    """
    if budget is None:
        return fn(*args)
    box: dict = {}

    def target():
        try:
            box["value"] = fn(*args)
        except BaseException as exc:  # propagated to the caller below
            box["error"] = exc

    worker = threading.Thread(target=target, daemon=True)
    worker.start()
    worker.join(budget)
    if worker.is_alive():
        raise BudgetExceeded(f"no result within {budget}s")
    if "error" in box:
        raise box["error"]
    return box["value"]


@dataclass(frozen=True)
class Decision:
    verdict: str
    reason: str = "ok"
    safety: Optional[SafetyVerdict] = None

    @property
    def accepted(self) -> bool:
        return self.verdict == ACCEPTED


def dm_update(x: Any, stored: CommandSequence, proposed: CommandSequence,
              checker: SafetyChecker) -> tuple[CommandSequence, Decision]:
    """Adopt ``proposed`` iff the checker accepts it within its budget."""
    try:
        verdict = call_with_budget(checker.is_permanently_safe, x, proposed,
                                   budget=checker.check_budget)
    except BudgetExceeded:
        return stored, Decision(TIMED_OUT, "check_timeout")
    except Exception as exc:
        return stored, Decision(REJECTED, f"checker_error:{type(exc).__name__}")
    if not isinstance(verdict, SafetyVerdict):
        return stored, Decision(REJECTED, "checker_error:bad_verdict")
    if verdict.accepted:
        return proposed, Decision(ACCEPTED, "ok", verdict)
    return stored, Decision(REJECTED, verdict.describe(), verdict)


class Fault(str, enum.Enum):
    CORRUPT = "corrupt"
    HANG = "hang"
    GARBAGE = "garbage"


@dataclass
class FaultSchedule:
    """Per-step faults forced onto the advanced (``ac``) or look-ahead (``lbc``) controller.

    ``corrupt_*`` receive the genuine output, a step-seeded generator and the
    controller's own arguments, and return the corrupted output. ``garbage`` is returned verbatim.
    """
    ac: Mapping[int, Fault] = field(default_factory=dict)
    lbc: Mapping[int, Fault] = field(default_factory=dict)
    corrupt_ac: Optional[Callable[[Any, np.random.Generator], Any]] = None
    corrupt_lbc: Optional[Callable[[Any, np.random.Generator], Any]] = None
    garbage: Any = "garbage"
    hang_seconds: float = 30.0

    def __post_init__(self):
        self.ac = {int(k): Fault(v) for k, v in dict(self.ac).items()}
        self.lbc = {int(k): Fault(v) for k, v in dict(self.lbc).items()}

    def wrap(self, which: str, fn: Callable, step: int, seed: int) -> Callable:
        fault = getattr(self, which).get(step)
        if fault is None:
            return fn
        if fault is Fault.HANG:
            hang = self.hang_seconds

            def hung(*args):
                threading.Event().wait(hang)
                return None
            return hung
        if fault is Fault.GARBAGE:
            junk = self.garbage
            return lambda *args: junk
        corrupt = getattr(self, f"corrupt_{which}")
        if corrupt is None:
            raise ConfigurationError(f"no corruption function for {which}")
        rng = np.random.default_rng([seed, step, 1 if which == "ac" else 2])
        return lambda *args: corrupt(fn(*args), rng, *args)

    def hangs(self) -> bool:
        return any(f is Fault.HANG for f in list(self.ac.values()) + list(self.lbc.values()))


@dataclass
class StepRecord:
    step: int
    state_before: Any
    state_after: Any
    advanced: Any                       # z_i, or None on controller timeout/failure
    proposal: Optional[CommandSequence]
    verdict: str
    reason: str
    applied: Any
    reverse_switch: bool
    dm_seconds: float = 0.0
    admissible: bool = True
    invariant_ok: Optional[bool] = None
    error: Optional[str] = None


def run_execution(x0: Any, s0: CommandSequence, ac: Callable, lbc: Callable,
                  plant: PlantModel, checker: SafetyChecker, n_steps: int,
                  seed: int = 0, *, ac_budget: Optional[float] = None,
                  lbc_budget: Optional[float] = None,
                  faults: Optional[FaultSchedule] = None,
                  reverse_switching: bool = True,
                  check_invariant: bool = False,
                  validate_initial: bool = True) -> list[StepRecord]:
    """Execute ``n_steps`` of the five-step semantics and return the audit trail.

    Per step: ``z = ac(x)``; ``t = lbc(x, z)`` with ``t[0] == z``;
    ``dm_update``; ``dm_step``; ``x' = f(x, u, w)``. A controller that
    errors, times out, or breaks the look-ahead contract leaves the stored
    sequence in charge for that step.

    With ``reverse_switching=False`` no proposal is considered after the
    first rejection, so the stored plan runs to its repeated tail.
    """
    if n_steps < 0:
        raise ConfigurationError("n_steps must be non-negative")
    if not isinstance(s0, CommandSequence):
        raise ConfigurationError("initial plan must be a CommandSequence")
    if not plant.admissible(x0):
        raise ConfigurationError("initial state is not admissible")
    if validate_initial:
        y0 = x0 if plant.observe is None else plant.observe(x0, np.random.default_rng([seed, 0, 9]))
        verdict = checker.is_permanently_safe(y0, s0)
        if not verdict.accepted:
            raise ConfigurationError(f"initial plan is not permanently safe: {verdict.describe()}")
    if faults is not None and faults.hangs() and (ac_budget is None or lbc_budget is None):
        raise ConfigurationError("hang faults need finite controller budgets")

    rng_w = np.random.default_rng([seed, 1])
    rng_obs = np.random.default_rng([seed, 2])
    records: list[StepRecord] = []
    x, stored = x0, s0
    prev_accepted = True
    locked_out = False

    for i in range(n_steps):
        y = x if plant.observe is None else plant.observe(x, rng_obs)
        ac_i = faults.wrap("ac", ac, i, seed) if faults else ac
        lbc_i = faults.wrap("lbc", lbc, i, seed) if faults else lbc
        z = proposal = None
        decision = None
        dm_seconds = 0.0

        try:
            z = call_with_budget(ac_i, y, budget=ac_budget)
        except BudgetExceeded:
            decision = Decision(TIMED_OUT, "ac_timeout")
        except Exception as exc:
            decision = Decision(REJECTED, f"ac_error:{type(exc).__name__}")

        if decision is None:
            try:
                proposal = call_with_budget(lbc_i, y, z, budget=lbc_budget)
            except BudgetExceeded:
                decision = Decision(TIMED_OUT, "lbc_timeout")
            except Exception as exc:
                decision = Decision(REJECTED, f"lbc_error:{type(exc).__name__}")

        if decision is None:
            if not isinstance(proposal, CommandSequence):
                decision = Decision(REJECTED, "malformed_proposal")
                proposal = None
            elif not same_command(proposal[0], z):
                decision = Decision(REJECTED, "lookahead_mismatch")
            elif locked_out:
                decision = Decision(REJECTED, "reverse_switching_disabled")
            else:
                t0 = time.perf_counter()
                stored, decision = dm_update(y, stored, proposal, checker)
                dm_seconds = time.perf_counter() - t0

        if not decision.accepted and not reverse_switching:
            locked_out = True
        reverse = decision.accepted and not prev_accepted and i > 0
        prev_accepted = decision.accepted

        u, stored = dm_step(stored)
        w = None if plant.sample_disturbance is None else plant.sample_disturbance(rng_w)
        try:
            x_next = plant.step(x, u, w)
        except Exception as exc:
            records.append(StepRecord(i, x, None, z, proposal, decision.verdict, decision.reason,
                                      u, reverse, dm_seconds, False, None,
                                      f"plant_error:{type(exc).__name__}: {exc}"))
            break
        admissible = bool(plant.admissible(x_next))
        inv = None
        if check_invariant:
            inv = bool(checker.is_permanently_safe(x_next, stored).accepted)
        records.append(StepRecord(i, x, x_next, z, proposal, decision.verdict, decision.reason,
                                  u, reverse, dm_seconds, admissible, inv))
        x = x_next
    return records


def applied_commands(records: list[StepRecord]) -> list:
    return [r.applied for r in records]


def count_verdicts(records: list[StepRecord]) -> dict:
    out = {ACCEPTED: 0, REJECTED: 0, TIMED_OUT: 0, "reverse_switches": 0}
    for r in records:
        out[r.verdict] = out.get(r.verdict, 0) + 1
        out["reverse_switches"] += int(r.reverse_switch)
    return out
