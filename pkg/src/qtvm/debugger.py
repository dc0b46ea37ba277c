"""Probability-tree exploration and machine-state inspection.

Instead of sampling measurements, :func:`enumerate_branches` forks the machine
at every measurement and follows both outcomes with their Born probabilities,
yielding the full distribution a sampler would converge to.  The walk is
RNG-free and deterministic.  Branches whose cumulative path probability drops
below ``PRUNE_THRESHOLD`` are kept as marked stubs rather than silently
dropped, so the pruned mass stays visible and accounted for.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ExecutionError
from .isa import Program, format_instruction
from .vm import Machine, ShotResult

PRUNE_THRESHOLD = 1e-12
DEFAULT_TOP_AMPLITUDES = 16


@dataclass
class BranchNode:
    """One node of the measurement-outcome tree.

    Interior nodes have exactly two children (outcomes 0 and 1 of the next
    measurement); leaves carry the finished shot.  ``pruned`` marks subtrees
    abandoned below the probability threshold; their ``probability`` is the
    mass that was given up.
    """

    outcome_prefix: tuple[int, ...]
    probability: float
    children: "list[BranchNode]" = field(default_factory=list)
    result: ShotResult | None = None
    state: object | None = None
    pruned: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> "list[BranchNode]":
        if self.is_leaf:
            return [self]
        out = []
        for child in self.children:
            out.extend(child.leaves())
        return out


def enumerate_branches(
    program: Program,
    *,
    max_measurements: int = 24,
    record_states: bool = False,
    engine: str = "single",
    sector_bits: int | None = None,
    memory_budget: int | None = None,
) -> BranchNode:
    """Walk every measurement branch; returns the root of the outcome tree."""
    machine = Machine(
        program,
        engine=engine,
        sector_bits=sector_bits,
        memory_budget=memory_budget,
        record_states=record_states,
    )
    root = BranchNode(outcome_prefix=(), probability=1.0)
    _explore(machine, root, max_measurements, record_states)
    return root


def _explore(machine: Machine, node: BranchNode, budget: int, record_states: bool) -> None:
    pending = machine.run_to_measurement()
    if pending is None:
        node.result = machine.result()
        if record_states:
            node.state = machine.state.dense_copy()
        return
    if budget <= 0:
        raise ExecutionError(
            f"branch enumeration exceeded the measurement budget "
            f"(raise max_measurements above {len(node.outcome_prefix)})"
        )
    qubit, _reg = pending
    p1 = machine.state.prob_one(qubit)
    for bit, p_bit in ((0, 1.0 - p1), (1, p1)):
        prefix = node.outcome_prefix + (bit,)
        path_probability = node.probability * p_bit
        child = BranchNode(outcome_prefix=prefix, probability=path_probability)
        node.children.append(child)
        if path_probability < PRUNE_THRESHOLD:
            child.pruned = True
            continue
        fork = machine.fork()
        fork.force_measurement(bit)
        _explore(fork, child, budget - 1, record_states)


def surviving_leaves(root: BranchNode) -> list[BranchNode]:
    return [leaf for leaf in root.leaves() if not leaf.pruned]


def pruned_mass(root: BranchNode) -> float:
    return sum(leaf.probability for leaf in root.leaves() if leaf.pruned)


def tree_as_text(root: BranchNode) -> str:
    lines: list[str] = []

    def walk(node: BranchNode, depth: int) -> None:
        label = "".join(map(str, node.outcome_prefix)) or "(root)"
        suffix = ""
        if node.pruned:
            suffix = "  [pruned]"
        elif node.is_leaf and node.result is not None:
            regs = {i: v for i, v in enumerate(node.result.creg_values) if v}
            suffix = f"  cregs={regs}" if regs else "  cregs={}"
        lines.append(f"{'  ' * depth}{label}  p={node.probability:.12g}{suffix}")
        for child in node.children:
            walk(child, depth + 1)

    walk(root, 0)
    return "\n".join(lines) + "\n"


def tree_as_json(root: BranchNode) -> str:
    def encode(node: BranchNode) -> dict:
        payload: dict = {
            "prefix": "".join(map(str, node.outcome_prefix)),
            "probability": node.probability,
        }
        if node.pruned:
            payload["pruned"] = True
        if node.is_leaf and node.result is not None:
            payload["cregs"] = {
                str(i): v for i, v in enumerate(node.result.creg_values) if v
            }
        if node.children:
            payload["children"] = [encode(child) for child in node.children]
        return payload

    return json.dumps(
        {"tree": encode(root), "pruned_mass": pruned_mass(root)}, indent=2
    ) + "\n"


def inspect(machine: Machine, top_k: int = DEFAULT_TOP_AMPLITUDES) -> str:
    """Human-readable machine report: pc, upcoming code, registers, amplitudes."""
    program = machine.program
    lines = [f"pc = {machine.pc}  (executed {machine.executed} instructions)"]
    if machine.terminated:
        lines.append("machine terminated")
    else:
        lines.append("next instructions:")
        for offset in range(3):
            index = machine.pc + offset
            if index >= len(program.instructions):
                break
            marker = "->" if offset == 0 else "  "
            lines.append(f"  {marker} {index:4d}: {format_instruction(program.instructions[index])}")

    written = {i: v for i, v in enumerate(machine.cregs) if v}
    lines.append(f"nonzero classical registers: {written if written else '{}'}")

    state = machine.state.dense_copy()
    n = state.num_qubits
    amps = state.to_complex()
    order = sorted(range(len(amps)), key=lambda i: -abs(amps[i]))[:top_k]
    lines.append(f"top {min(top_k, len(amps))} amplitudes:")
    for index in order:
        a = amps[index]
        if abs(a) == 0.0:
            break
        lines.append(f"  |{index:0{n}b}>  {a.real:+.6f}{a.imag:+.6f}j   |.|^2 = {abs(a) ** 2:.6f}")
    return "\n".join(lines) + "\n"
