"""Shared test fixtures: seeded project generation and independent oracles.

The oracles here deliberately re-derive results through different code
paths than the implementation (string scans, hand-rolled folds), so
agreement is meaningful.
"""

from __future__ import annotations

import random

from blockclass.projects.model import BlockNode, ProjectDocument, Script, Sprite

OPCODES = [
    "move",
    "turnleft",
    "turnright",
    "say",
    "think",
    "wait",
    "repeat",
    "forever",
    "ifthen",
    "whenflag",
    "playsound",
    "changecostume",
    "glide",
    "broadcast",
    "stop",
]

WORDS = [
    "sprite",
    "block",
    "stage",
    "sound",
    "motion",
    "loop",
    "flag",
    "pen",
    "color",
    "north",
]


def gen_project(rng: random.Random, max_depth: int = 6, max_blocks: int = 120) -> ProjectDocument:
    """Random but reproducible project; respects depth and block budgets."""
    budget = [rng.randint(0, max_blocks)]

    def gen_block(depth: int) -> BlockNode:
        budget[0] -= 1
        block = BlockNode(opcode=rng.choice(OPCODES))
        for _ in range(rng.randint(0, 3)):
            if budget[0] <= 0:
                break
            roll = rng.random()
            if roll < 0.45 or depth >= max_depth:
                block.children.append(str(rng.choice(WORDS + [str(rng.randint(0, 99))])))
            elif roll < 0.8:
                block.children.append(gen_block(depth + 1))
            else:
                nested = Script(x=0, y=0)
                for _ in range(rng.randint(1, 2)):
                    if budget[0] <= 0:
                        break
                    nested.blocks.append(gen_block(depth + 1))
                block.children.append(nested)
        return block

    doc = ProjectDocument(name=f"proj-{rng.randint(0, 9999)}")
    for s in range(rng.randint(0, 3)):
        sprite = Sprite(name=f"sprite{s}")
        for _ in range(rng.randint(0, 3)):
            script = Script(x=rng.randint(-200, 200), y=rng.randint(-200, 200))
            for _ in range(rng.randint(0, 4)):
                if budget[0] <= 0:
                    break
                script.blocks.append(gen_block(1))
            sprite.scripts.append(script)
        doc.sprites.append(sprite)
    return doc


def oracle_count_blocks(project: ProjectDocument) -> int:
    """Brute-force block count, structured differently from the production
    counter (single polymorphic walker)."""

    def walk(node) -> int:
        if isinstance(node, BlockNode):
            return 1 + sum(walk(child) for child in node.children)
        if isinstance(node, Script):
            return sum(walk(b) for b in node.blocks)
        return 0  # literal slot

    return sum(walk(script) for sprite in project.sprites for script in sprite.scripts)


def oracle_opcode_count(project_xml: str, opcode: str) -> int:
    """Count opcode occurrences by scanning the canonical serialization,
    fully independent of the tree walker."""
    return project_xml.count(f'<block s="{opcode}"') if opcode else 0


def simple_project(opcodes: list[str], name: str = "p") -> ProjectDocument:
    return ProjectDocument(
        name=name,
        sprites=[
            Sprite(
                name="Sprite1",
                scripts=[
                    Script(x=0, y=0, blocks=[BlockNode(opcode=op, children=[]) for op in opcodes])
                ],
            )
        ],
    )
