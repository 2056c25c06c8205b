"""In-memory model of a block-based project.

A project is a tree: sprites hold scripts, scripts hold block nodes, and a
block's children are literal strings, nested blocks, or nested scripts
(C-shaped slots). Literal values are always plain strings; numbers are
carried as their decimal text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from blockclass.errors import InvalidProject

BlockChild = Union[str, "BlockNode", "Script"]


@dataclass
class BlockNode:
    opcode: str
    children: list[BlockChild] = field(default_factory=list)


@dataclass
class Script:
    x: int = 0
    y: int = 0
    blocks: list[BlockNode] = field(default_factory=list)


@dataclass
class Sprite:
    name: str
    scripts: list[Script] = field(default_factory=list)


@dataclass
class ProjectDocument:
    name: str = ""
    sprites: list[Sprite] = field(default_factory=list)


def empty_project(name: str = "") -> ProjectDocument:
    return ProjectDocument(name=name, sprites=[])


def count_blocks(project: ProjectDocument) -> int:
    """Total number of block nodes, nested ones included; literals do not count."""
    total = 0
    for sprite in project.sprites:
        for script in sprite.scripts:
            total += _count_script(script)
    return total


def _count_script(script: Script) -> int:
    return sum(_count_block(b) for b in script.blocks)


def _count_block(block: BlockNode) -> int:
    total = 1
    for child in block.children:
        if isinstance(child, BlockNode):
            total += _count_block(child)
        elif isinstance(child, Script):
            total += _count_script(child)
    return total


def progress_delta(current: ProjectDocument, starter: ProjectDocument) -> int:
    """Block-count difference current minus starter; negative means the
    student is below the starter (deleted scaffold blocks)."""
    return count_blocks(current) - count_blocks(starter)


def validate_project(project: ProjectDocument) -> None:
    """Structural validation; raises InvalidProject on the first defect."""
    if not isinstance(project, ProjectDocument):
        raise InvalidProject("not a ProjectDocument")
    seen: set[str] = set()
    for sprite in project.sprites:
        if not isinstance(sprite, Sprite) or not isinstance(sprite.name, str):
            raise InvalidProject("bad sprite")
        if sprite.name in seen:
            raise InvalidProject(f"duplicate sprite name {sprite.name!r}")
        seen.add(sprite.name)
        for script in sprite.scripts:
            _validate_script(script)


def _validate_script(script: Script) -> None:
    if not isinstance(script, Script):
        raise InvalidProject("bad script")
    if not isinstance(script.x, int) or not isinstance(script.y, int):
        raise InvalidProject("script position must be integers")
    for block in script.blocks:
        _validate_block(block)


def _validate_block(block: BlockNode) -> None:
    if not isinstance(block, BlockNode):
        raise InvalidProject("bad block node")
    if not block.opcode or not isinstance(block.opcode, str):
        raise InvalidProject("block opcode must be a non-empty string")
    for child in block.children:
        if isinstance(child, BlockNode):
            _validate_block(child)
        elif isinstance(child, Script):
            _validate_script(child)
        elif not isinstance(child, str):
            raise InvalidProject("block child must be literal, block, or script")


def opcode_counts(project: ProjectDocument) -> dict[str, int]:
    """Occurrences of each opcode across the whole project (nested included)."""
    counts: dict[str, int] = {}

    def walk_block(block: BlockNode) -> None:
        counts[block.opcode] = counts.get(block.opcode, 0) + 1
        for child in block.children:
            if isinstance(child, BlockNode):
                walk_block(child)
            elif isinstance(child, Script):
                walk_script(child)

    def walk_script(script: Script) -> None:
        for b in script.blocks:
            walk_block(b)

    for sprite in project.sprites:
        for script in sprite.scripts:
            walk_script(script)
    return counts
