"""Built-in fields, bumps and random potential sets used by the checks and the CLI."""

from __future__ import annotations

import itertools

import numpy as np

from .expr import STATE_VARS, ExprSyntaxError, FieldSpec
from .nulllag3d import PotentialSet3D, parse_assignments
from .shell import SHELL_VARS, PotentialSetShell
from .variational import BumpField

FIELDS_3D = (
    FieldSpec(
        ("1.2*x1 + 0.3*x2", "x2 - 0.2*x3 + 0.1", "0.9*x3 + 0.4*x1"),
        ("0.2*x1", "-0.1*x2 + 0.3*x3", "0.05"),
        name="affine",
    ),
    FieldSpec(
        ("x1 + 0.3*x2^2", "x2 + 0.2*x1*x3", "x3 - 0.25*x1^2"),
        ("0.4*x2*x3", "0.3*x1^2", "-0.2*x3 + 0.1*x1*x2"),
        name="quadratic",
    ),
    FieldSpec(
        ("x1 + 0.2*x1*x2*x3", "x2 - 0.3*x3^3", "x3 + 0.1*x1^2*x2"),
        ("0.3*x1^3 - x2", "0.2*x2^2*x3", "0.5*x1*x3^2"),
        name="cubic",
    ),
    FieldSpec(
        ("x1^2 - x2^2", "2*x1*x2 + x3", "x3 + x1^3/3"),
        ("x1*x2*x3", "x2^2 - x3", "0.7*x1"),
        name="harmonic",
    ),
    FieldSpec(
        ("x1 + 0.2*sin(2*x2)", "x2 + 0.1*cos(x3*x1)", "x3 + 0.3*sin(x1)*cos(x2)"),
        ("0.5*sin(x3)", "0.3*cos(x1 + x2)", "0.2*exp(x2)*x3"),
        name="trigonometric",
    ),
)

FIELDS_SHELL = (
    FieldSpec(("x1 + 0.2*x2", "x2 - 0.1*x1", "0.3*x1 + 0.5*x2"), ("0.2*x1", "-0.1*x2", "0.05"), dim=2, name="affine"),
    FieldSpec(
        ("x1 + 0.3*x2^2", "x2 + 0.2*x1*x2", "0.25*x1^2 - 0.1*x2^2"),
        ("0.4*x1*x2", "0.3*x1^2", "-0.2*x2"),
        dim=2,
        name="quadratic",
    ),
    FieldSpec(
        ("x1 + 0.2*x1^2*x2", "x2 - 0.3*x2^3", "0.1*x1^3 + x1*x2"),
        ("0.3*x1^3 - x2", "0.2*x2^2*x1", "0.5*x1*x2^2"),
        dim=2,
        name="cubic",
    ),
    FieldSpec(
        ("x1^2 - x2^2", "2*x1*x2", "x1^3/3 - x2"),
        ("x1*x2", "x2^2 - x1", "0.7*x1"),
        dim=2,
        name="harmonic",
    ),
    FieldSpec(
        ("x1 + 0.2*sin(2*x2)", "x2 + 0.1*cos(x1*x2)", "0.3*sin(x1)*cos(x2)"),
        ("0.5*sin(x2)", "0.3*cos(x1 + x2)", "0.2*exp(x2)*x1"),
        dim=2,
        name="trigonometric",
    ),
)

BUMPS_3D = (
    BumpField((0.5, 0.5, 0.5), 0.42, (0.2, -0.1, 0.15, 0.1, 0.2, -0.1)),
    BumpField((0.46, 0.54, 0.5), 0.42, (-0.1, 0.2, 0.1, -0.2, 0.1, 0.15)),
    BumpField((0.54, 0.46, 0.52), 0.42, (0.15, 0.1, -0.2, 0.1, -0.15, 0.2)),
)

BUMPS_SHELL = (
    BumpField((0.5, 0.5), 0.42, (0.2, -0.1, 0.15, 0.1, 0.2, -0.1)),
    BumpField((0.46, 0.54), 0.42, (-0.1, 0.2, 0.1, -0.2, 0.1, 0.15)),
    BumpField((0.54, 0.46), 0.42, (0.15, 0.1, -0.2, 0.1, -0.15, 0.2)),
)


def monomials(variables, max_degree: int = 3) -> list[str]:
    out = []
    for d in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(variables, d):
            out.append("*".join(combo) or "1")
    return out


def random_polynomial(rng: np.random.Generator, variables, terms: int = 4, max_degree: int = 3) -> str:
    """Sum of a few distinct random monomials with coefficients in [-1, 1]."""
    pool = monomials(variables, max_degree)
    picks = rng.choice(len(pool), size=terms, replace=False)
    coefs = rng.uniform(-1.0, 1.0, size=terms)
    return " + ".join(f"({float(c)!r})*{pool[k]}" for c, k in zip(coefs, sorted(picks)))


def random_potentials_3d(seed: int, terms: int = 4) -> PotentialSet3D:
    rng = np.random.default_rng(seed)

    def r():
        return random_polynomial(rng, STATE_VARS, terms)

    return PotentialSet3D(
        L=[r() for _ in range(3)],
        M=[r() for _ in range(3)],
        Mt=[r() for _ in range(3)],
        K=[[r() for _ in range(3)] for _ in range(3)],
        Kt=[[r() for _ in range(3)] for _ in range(3)],
        H=[[r() for _ in range(3)] for _ in range(3)],
    )


def random_potentials_shell(seed: int, terms: int = 4) -> PotentialSetShell:
    rng = np.random.default_rng(seed)

    def r():
        return random_polynomial(rng, SHELL_VARS, terms)

    return PotentialSetShell(Pbar=[r() for _ in range(2)], Phat=[r() for _ in range(3)], Ptil=[r() for _ in range(3)])


def parse_fields(text: str, dim: int = 3) -> list[FieldSpec]:
    """Field file: ``chi[i] = expr`` / ``theta[i] = expr`` blocks separated by ``---``.

    Missing placement components default to the identity map (0 for the third
    shell component); missing rotation components default to 0.
    """
    specs = []
    variables = STATE_VARS[:dim]
    for n, block in enumerate(_split_blocks(text), start=1):
        entries = parse_assignments(block, {"chi": 1, "theta": 1}, variables)
        chi = [f"x{i + 1}" if i < dim else "0" for i in range(3)]
        theta = ["0", "0", "0"]
        for (name, idx), f in entries.items():
            (chi if name == "chi" else theta)[idx[0]] = f
        specs.append(FieldSpec(tuple(chi), tuple(theta), dim=dim, name=f"field {n}"))
    if not specs:
        raise ExprSyntaxError("fields file defines no fields", text, 0)
    return specs


def _split_blocks(text: str):
    block: list[str] = []
    for line in text.splitlines():
        if line.strip() == "---":
            if any(l.split("#", 1)[0].strip() for l in block):
                yield "\n".join(block)
            block = []
        else:
            block.append(line)
    if any(l.split("#", 1)[0].strip() for l in block):
        yield "\n".join(block)

