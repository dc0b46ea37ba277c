"""QtASM front end: macro expansion, parsing, peephole optimization, emission.

Pipeline: ``preprocess`` flattens ``%define`` / ``%for`` / ``$(expr)`` into
plain instruction text, ``parse`` turns that into a validated
:class:`~qtvm.isa.Program`, ``optimize`` optionally rewrites straight-line
gate runs, and ``emit`` prints a program back as canonical source so that
``parse(emit(p))`` structurally equals ``p``.

Surface syntax, one item per line:

    qubits N            # mandatory header, before anything else
    name:               # label
    op(arg, arg, ...)   # instruction; '#' starts a comment
    %define NAME expr
    %for VAR = A to B ... %endfor      (inclusive, step 1, nestable)

``$(expr)`` anywhere in an instruction line is replaced by the evaluated
expression: + - * / with parentheses over integers, reals, ``pi``, loop
variables, and ``%define`` names.  Division of integers stays an integer
when exact.
"""

from __future__ import annotations

import ast
import math
import re

import numpy as np

from .errors import CompileError
from .gates import u_matrix, u_params_from_matrix
from .isa import (
    BARRIER_OPS,
    CLASSICAL_BINARY_OPS,
    FIXED_GATES,
    GATE_OPS,
    ROTATION_GATES,
    Instruction,
    Program,
    format_instruction,
    instruction_matrix,
    touched_qubits,
    validate_instruction,
    validate_program,
)

_FUSION_TOLERANCE = 1e-12


# --------------------------------------------------------------------------
# expression evaluation


def evaluate_expression(text: str, names: dict[str, int | float], line: int | None = None):
    """Evaluate an arithmetic expression over +, -, *, /, parens, pi, names."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise CompileError(f"malformed expression '{text.strip()}'", line) from None
    return _eval_node(tree.body, names, text, line)


def _eval_node(node: ast.AST, names, text: str, line: int | None):
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
    elif isinstance(node, ast.Name):
        if node.id == "pi":
            return math.pi
        if node.id in names:
            return names[node.id]
        raise CompileError(f"undefined name '{node.id}' in expression '{text.strip()}'", line)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        value = _eval_node(node.operand, names, text, line)
        return -value if isinstance(node.op, ast.USub) else value
    elif isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
        a = _eval_node(node.left, names, text, line)
        b = _eval_node(node.right, names, text, line)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        if b == 0:
            raise CompileError(f"division by zero in expression '{text.strip()}'", line)
        if isinstance(a, int) and isinstance(b, int) and a % b == 0:
            return a // b
        return a / b
    raise CompileError(f"unsupported syntax in expression '{text.strip()}'", line)


def _render_value(value: int | float) -> str:
    if isinstance(value, int):
        return str(value)
    if math.isfinite(value) and value == int(value) and abs(value) < 2**53:
        return str(int(value))
    return repr(value)  # shortest text that parses back to the same float


# --------------------------------------------------------------------------
# preprocessor

_DEFINE_RE = re.compile(r"^\s*%define\s+([A-Za-z_]\w*)\s+(.+?)\s*$")
_FOR_RE = re.compile(r"^\s*%for\s+([A-Za-z_]\w*)\s*=\s*(.+?)\s+to\s+(.+?)\s*$")
_ENDFOR_RE = re.compile(r"^\s*%endfor\s*$")
_MISSING = object()


def _strip_comment(text: str) -> str:
    out = []
    in_quote = False
    for ch in text:
        if ch == "'":
            in_quote = not in_quote
        if ch == "#" and not in_quote:
            break
        out.append(ch)
    return "".join(out)


def _eval_bound(text: str, env: dict, line: int, which: str) -> int:
    text = text.strip()
    if text.startswith("$(") and text.endswith(")"):
        text = text[2:-1]
    value = evaluate_expression(text, env, line)
    if isinstance(value, float):
        if not value.is_integer():
            raise CompileError(f"%for {which} bound must be an integer, got {value!r}", line)
        value = int(value)
    return value


def _find_endfor(lines: list[tuple[int, str]], start: int, stop: int, for_line: int) -> int:
    depth = 1
    for k in range(start + 1, stop):
        text = _strip_comment(lines[k][1])
        if _FOR_RE.match(text):
            depth += 1
        elif _ENDFOR_RE.match(text):
            depth -= 1
            if depth == 0:
                return k
    raise CompileError("%for without matching %endfor", for_line)


def _substitute(text: str, env: dict, line: int) -> str:
    while True:
        pos = text.find("$(")
        if pos < 0:
            return text
        depth = 0
        end = -1
        for j in range(pos + 1, len(text)):
            if text[j] == "(":
                depth += 1
            elif text[j] == ")":
                depth -= 1
                if depth == 0:
                    end = j
                    break
        if end < 0:
            raise CompileError("unterminated $( expression", line)
        value = evaluate_expression(text[pos + 2 : end], env, line)
        text = text[:pos] + _render_value(value) + text[end + 1 :]


def _expand(lines, start: int, stop: int, env: dict, out: list[tuple[int, str]]) -> None:
    i = start
    while i < stop:
        lineno, raw = lines[i]
        text = _strip_comment(raw)
        stripped = text.strip()
        if not stripped:
            i += 1
            continue
        if stripped.startswith("%"):
            m = _DEFINE_RE.match(text)
            if m:
                env[m.group(1)] = _define_value(m.group(2), env, lineno)
                i += 1
                continue
            m = _FOR_RE.match(text)
            if m:
                var = m.group(1)
                lo = _eval_bound(m.group(2), env, lineno, "lower")
                hi = _eval_bound(m.group(3), env, lineno, "upper")
                end = _find_endfor(lines, i, stop, lineno)
                saved = env.get(var, _MISSING)
                for value in range(lo, hi + 1):
                    env[var] = value
                    _expand(lines, i + 1, end, env, out)
                if saved is _MISSING:
                    env.pop(var, None)
                else:
                    env[var] = saved
                i = end + 1
                continue
            if _ENDFOR_RE.match(text):
                raise CompileError("%endfor without matching %for", lineno)
            raise CompileError(f"unknown directive '{stripped.split()[0]}'", lineno)
        out.append((lineno, _substitute(text, env, lineno)))
        i += 1


def _define_value(value_text: str, env: dict, line: int):
    if value_text.startswith("$(") and value_text.endswith(")"):
        value_text = value_text[2:-1]
    return evaluate_expression(value_text, env, line)


def preprocess_lines(source: str) -> list[tuple[int, str]]:
    """Expand directives, keeping each output line paired with its source line."""
    lines = [(i + 1, raw) for i, raw in enumerate(source.splitlines())]
    out: list[tuple[int, str]] = []
    _expand(lines, 0, len(lines), {}, out)
    return out


def preprocess(source: str) -> str:
    """Directive-free flat text (comments and blank lines removed)."""
    return "".join(text.strip() + "\n" for _, text in preprocess_lines(source))


# --------------------------------------------------------------------------
# parser

_HEADER_RE = re.compile(r"^\s*qubits\s+(\d+)\s*$")
_LABEL_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*:\s*$")
_CALL_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*\(")
_INT_RE = re.compile(r"^[+-]?\d+$")
_NAME_RE = re.compile(r"^[A-Za-z_]\w*$")


def _first_col(text: str) -> int:
    return len(text) - len(text.lstrip()) + 1


def _split_args(text: str, start: int, end: int) -> list[tuple[str, int]]:
    """Split text[start:end] on top-level commas, quote- and paren-aware.

    Returns (stripped_argument, 0-based offset of its first character) pairs.
    """
    if not text[start:end].strip():
        return []
    parts: list[tuple[str, int]] = []
    depth = 0
    in_quote = False
    item_start = start
    for i in range(start, end):
        ch = text[i]
        if ch == "'":
            in_quote = not in_quote
        elif in_quote:
            continue
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append((text[item_start:i], item_start))
            item_start = i + 1
    parts.append((text[item_start:end], item_start))
    return [(p.strip(), off + len(p) - len(p.lstrip())) for p, off in parts]


def _arg_int(name: str, args, idx: int, lineno: int, col_offset: int) -> int:
    text, off = args[idx]
    if not _INT_RE.match(text):
        raise CompileError(f"{name}: expected an integer, got '{text}'", lineno, col_offset + off + 1)
    return int(text)


def _arg_float(name: str, args, idx: int, lineno: int, col_offset: int) -> float:
    text, off = args[idx]
    try:
        return float(text)
    except ValueError:
        raise CompileError(f"{name}: expected a number, got '{text}'", lineno, col_offset + off + 1) from None


def _arg_label(name: str, args, idx: int, lineno: int, col_offset: int) -> str:
    text, off = args[idx]
    if not _NAME_RE.match(text):
        raise CompileError(f"{name}: expected a label name, got '{text}'", lineno, col_offset + off + 1)
    return text


def _expect_arity(name: str, args, count: int, lineno: int, col: int) -> None:
    if len(args) != count:
        raise CompileError(f"{name} expects {count} argument(s), got {len(args)}", lineno, col)


def _parse_instruction(text: str, lineno: int, col_offset: int, num_qubits: int) -> Instruction:
    m = _CALL_RE.match(text)
    if not m:
        raise CompileError(f"cannot parse instruction '{text.strip()}'", lineno, col_offset + _first_col(text))
    name = m.group(1)
    name_col = col_offset + m.start(1) + 1
    close = text.rfind(")")
    if close < m.end() - 1 or text[close + 1 :].strip():
        raise CompileError("missing or misplaced closing parenthesis", lineno, name_col)
    args = _split_args(text, m.end(), close)
    try:
        instr = _build_instruction(name, args, lineno, col_offset, num_qubits, name_col)
        validate_instruction(instr, num_qubits)
    except CompileError as exc:
        if exc.column is None:
            raise CompileError(exc.message, lineno, name_col) from None
        raise
    return instr


def _build_instruction(name, args, lineno, col_offset, num_qubits, name_col) -> Instruction:
    if name in FIXED_GATES:
        _expect_arity(name, args, 1, lineno, name_col)
        return Instruction(name, qubits=(_arg_int(name, args, 0, lineno, col_offset),), line=lineno)
    if name in ROTATION_GATES:
        _expect_arity(name, args, 2, lineno, name_col)
        return Instruction(
            name,
            qubits=(_arg_int(name, args, 0, lineno, col_offset),),
            params=(_arg_float(name, args, 1, lineno, col_offset),),
            line=lineno,
        )
    if name == "u":
        _expect_arity(name, args, 4, lineno, name_col)
        return Instruction(
            "u",
            qubits=(_arg_int(name, args, 0, lineno, col_offset),),
            params=tuple(_arg_float(name, args, k, lineno, col_offset) for k in (1, 2, 3)),
            line=lineno,
        )
    if name in ("cnot", "swap"):
        _expect_arity(name, args, 2, lineno, name_col)
        qubits = tuple(_arg_int(name, args, k, lineno, col_offset) for k in (0, 1))
        return Instruction(name, qubits=qubits, line=lineno)
    if name == "cu":
        if len(args) < 5:
            raise CompileError(
                f"cu expects controls, a target, and three angles, got {len(args)} argument(s)",
                lineno,
                name_col,
            )
        qubits = tuple(_arg_int(name, args, k, lineno, col_offset) for k in range(len(args) - 3))
        params = tuple(_arg_float(name, args, k, lineno, col_offset) for k in range(len(args) - 3, len(args)))
        return Instruction("cu", qubits=qubits, params=params, line=lineno)
    if name == "meas":
        _expect_arity(name, args, 2, lineno, name_col)
        return Instruction(
            "meas",
            qubits=(_arg_int(name, args, 0, lineno, col_offset),),
            regs=(_arg_int(name, args, 1, lineno, col_offset),),
            line=lineno,
        )
    if name == "cif":
        _expect_arity(name, args, 2, lineno, name_col)
        reg = _arg_int(name, args, 0, lineno, col_offset)
        inner_text, inner_off = args[1]
        if len(inner_text) < 2 or not (inner_text[0] == inner_text[-1] == "'"):
            raise CompileError(
                "cif: inner instruction must be wrapped in single quotes",
                lineno,
                col_offset + inner_off + 1,
            )
        inner = _parse_instruction(inner_text[1:-1], lineno, col_offset + inner_off + 1, num_qubits)
        return Instruction("cif", regs=(reg,), inner=inner, line=lineno)
    if name == "jmp":
        _expect_arity(name, args, 1, lineno, name_col)
        return Instruction("jmp", label=_arg_label(name, args, 0, lineno, col_offset), line=lineno)
    if name == "cjmp":
        _expect_arity(name, args, 2, lineno, name_col)
        return Instruction(
            "cjmp",
            regs=(_arg_int(name, args, 0, lineno, col_offset),),
            label=_arg_label(name, args, 1, lineno, col_offset),
            line=lineno,
        )
    if name == "cset":
        _expect_arity(name, args, 2, lineno, name_col)
        return Instruction(
            "cset",
            regs=(_arg_int(name, args, 0, lineno, col_offset),),
            imm=_arg_int(name, args, 1, lineno, col_offset),
            line=lineno,
        )
    if name in CLASSICAL_BINARY_OPS:
        _expect_arity(name, args, 3, lineno, name_col)
        return Instruction(
            name,
            regs=tuple(_arg_int(name, args, k, lineno, col_offset) for k in (0, 1, 2)),
            line=lineno,
        )
    if name == "snap":
        _expect_arity(name, args, 1, lineno, name_col)
        return Instruction("snap", tag=_arg_int(name, args, 0, lineno, col_offset), line=lineno)
    if name == "halt":
        _expect_arity(name, args, 0, lineno, name_col)
        return Instruction("halt", line=lineno)
    raise CompileError(f"unknown mnemonic '{name}'", lineno, name_col)


def parse(text: str | list[tuple[int, str]]) -> Program:
    """Parse directive-free text (or (line, text) pairs) into a Program."""
    if isinstance(text, str):
        pairs = [(i + 1, line) for i, line in enumerate(text.splitlines())]
    else:
        pairs = list(text)

    num_qubits: int | None = None
    instructions: list[Instruction] = []
    labels: dict[str, int] = {}
    pending: list[str] = []

    for lineno, raw in pairs:
        line = _strip_comment(raw)
        if not line.strip():
            continue
        header = _HEADER_RE.match(line)
        if num_qubits is None:
            if not header:
                raise CompileError("expected 'qubits N' header before any instruction", lineno, _first_col(line))
            num_qubits = int(header.group(1))
            if num_qubits < 1:
                raise CompileError("qubit count must be at least 1", lineno, _first_col(line))
            continue
        if header:
            raise CompileError("duplicate 'qubits' header", lineno, _first_col(line))
        label = _LABEL_RE.match(line)
        if label:
            name = label.group(1)
            if name in labels or name in pending:
                raise CompileError(f"duplicate label '{name}'", lineno, _first_col(line))
            pending.append(name)
            continue
        instr = _parse_instruction(line, lineno, 0, num_qubits)
        for name in pending:
            labels[name] = len(instructions)
        pending.clear()
        instructions.append(instr)

    if num_qubits is None:
        raise CompileError("empty program: missing 'qubits N' header")
    for name in pending:
        labels[name] = len(instructions)  # trailing label: jump target past the end

    program = Program(num_qubits, tuple(instructions), labels)
    for instr in program.instructions:
        if instr.op in ("jmp", "cjmp") and instr.label not in labels:
            raise CompileError(f"jump to undefined label '{instr.label}'", instr.line, 1)
    return program


# --------------------------------------------------------------------------
# optimizer


def _is_phase_identity(m: np.ndarray, tol: float = _FUSION_TOLERANCE) -> bool:
    return abs(m[0, 1]) <= tol and abs(m[1, 0]) <= tol and abs(m[0, 0] - m[1, 1]) <= tol


def residual_phase(matrix: np.ndarray, theta: float, phi: float, lam: float) -> float:
    """alpha such that matrix = e^{i alpha} * u(theta, phi, lam)."""
    rebuilt = u_matrix(theta, phi, lam)
    anchor = int(np.argmax(np.abs(matrix)))
    return float(np.angle(matrix.flat[anchor] / rebuilt.flat[anchor]))


def _fuse_chain(chain: list[Instruction], exact_phase: bool) -> tuple[list[Instruction], bool]:
    """Replacement for one per-qubit chain, and whether it differs from the input.

    With ``exact_phase`` the replacement reproduces the chain's product matrix
    exactly, via e^{i a}*u(t, p, l) = rz(-2a) . u(t, p + 2a, l); otherwise the
    product is collapsed to a single u gate and any global phase is dropped.
    """
    product = instruction_matrix(chain[0])
    for instr in chain[1:]:
        product = instruction_matrix(instr) @ product

    if not exact_phase:
        if _is_phase_identity(product):
            return [], True
        if len(chain) == 1:
            return chain, False
        theta, phi, lam = u_params_from_matrix(product)
        return [Instruction("u", qubits=chain[0].qubits, params=(theta, phi, lam), line=chain[0].line)], True

    theta, phi, lam = u_params_from_matrix(product)
    alpha = residual_phase(product, theta, phi, lam)
    if abs(alpha) <= _FUSION_TOLERANCE:
        if _is_phase_identity(product):
            return [], True
        if len(chain) == 1:
            return chain, False
        return [Instruction("u", qubits=chain[0].qubits, params=(theta, phi, lam), line=chain[0].line)], True
    if len(chain) <= 2:
        return chain, False  # no shorter phase-exact form; keep (guarantees a fixpoint)
    qubits = chain[0].qubits
    line = chain[0].line
    return [
        Instruction("u", qubits=qubits, params=(theta, phi + 2.0 * alpha, lam), line=line),
        Instruction("rz", qubits=qubits, params=(-2.0 * alpha,), line=line),
    ], True


def _fuse_single_qubit(run: list[Instruction], exact_phase: bool) -> tuple[list[Instruction], bool]:
    """Merge per-qubit chains of 1-qubit gates; drop identities."""
    out: list[Instruction] = []
    chains: dict[int, list[Instruction]] = {}
    changed = False

    def flush(qubits) -> None:
        nonlocal changed
        for q in sorted(qubits):
            chain = chains.pop(q, None)
            if not chain:
                continue
            replacement, rewrote = _fuse_chain(chain, exact_phase)
            out.extend(replacement)
            changed = changed or rewrote

    for instr in run:
        if instr.op in GATE_OPS and len(instr.qubits) == 1:
            chains.setdefault(instr.qubits[0], []).append(instr)
        else:
            flush(set(instr.qubits))
            out.append(instr)
    flush(set(chains.keys()))
    return out, changed


def _cancel_pairs(run: list[Instruction]) -> tuple[list[Instruction], bool]:
    """Remove adjacent self-inverse two-qubit pairs (cnot-cnot, swap-swap)."""
    items = list(run)
    changed = False
    i = 0
    while i < len(items):
        instr = items[i]
        if instr.op not in ("cnot", "swap"):
            i += 1
            continue
        qs = set(instr.qubits)
        partner = -1
        for j in range(i + 1, len(items)):
            if qs & set(touched_qubits(items[j])):
                partner = j
                break
        if partner >= 0:
            other = items[partner]
            if other.op == instr.op and (
                other.qubits == instr.qubits or (instr.op == "swap" and set(other.qubits) == qs)
            ):
                del items[partner]
                del items[i]
                changed = True
                i = max(i - 1, 0)
                continue
        i += 1
    return items, changed


def optimize_gate_run(run: list[Instruction], exact_phase: bool = False) -> list[Instruction]:
    """Peephole-rewrite one straight-line run of gate instructions (fixpoint).

    ``exact_phase=True`` keeps the rewritten run's unitary bit-for-bit faithful
    to the original including global phase; the paged engine needs this, since
    each sector optimizes a differently specialized queue and any per-sector
    phase drift would turn into relative phases between sectors.
    """
    items = list(run)
    while True:
        items, fused = _fuse_single_qubit(items, exact_phase)
        items, cancelled = _cancel_pairs(items)
        if not fused and not cancelled:
            return items


def optimize(program: Program, level: int) -> Program:
    if level not in (0, 1):
        raise ValueError(f"unsupported optimization level {level}")
    if level == 0:
        return program

    instructions = program.instructions
    n = len(instructions)
    label_targets = set(program.labels.values())
    new_instructions: list[Instruction] = []
    old_to_new: dict[int, int] = {}

    i = 0
    while i < n:
        old_to_new[i] = len(new_instructions)
        if instructions[i].op in BARRIER_OPS:
            new_instructions.append(instructions[i])
            i += 1
            continue
        j = i + 1
        while j < n and instructions[j].op not in BARRIER_OPS and j not in label_targets:
            j += 1
        new_instructions.extend(optimize_gate_run(list(instructions[i:j])))
        i = j

    labels = {
        name: old_to_new.get(target, len(new_instructions)) for name, target in program.labels.items()
    }
    return Program(program.num_qubits, tuple(new_instructions), labels)


# --------------------------------------------------------------------------
# emitter and entry points


def emit(program: Program) -> str:
    """Canonical source text; parses back to a structurally equal Program."""
    names_at: dict[int, list[str]] = {}
    for name, idx in sorted(program.labels.items(), key=lambda kv: (kv[1], kv[0])):
        names_at.setdefault(idx, []).append(name)
    lines = [f"qubits {program.num_qubits}"]
    for i, instr in enumerate(program.instructions):
        lines.extend(f"{name}:" for name in names_at.get(i, ()))
        lines.append(format_instruction(instr))
    lines.extend(f"{name}:" for name in names_at.get(len(program.instructions), ()))
    return "\n".join(lines) + "\n"


def compile_source(source: str, level: int = 0) -> Program:
    program = parse(preprocess_lines(source))
    validate_program(program)
    return optimize(program, level)


def compile_file(path, level: int = 0) -> Program:
    with open(path, "r", encoding="utf-8") as fh:
        return compile_source(fh.read(), level)
