"""Project XML ingestion and canonical serialization.

Recognized subset: ``project``, ``sprites``, ``sprite``, ``scripts``,
``script``, ``block``, ``l``. Anything else (costumes, sounds, variables,
vendor extensions) is dropped with a warning so real exports still ingest.

Canonical serialization is bit-exact so golden files stay stable:
attributes in fixed order (name, s, x, y), two-space indentation, LF line
endings, childless elements self-closed, and a trailing newline.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET

from blockclass.errors import DepthLimitExceeded, DuplicateSpriteName, MalformedXml
from blockclass.projects.model import BlockNode, ProjectDocument, Script, Sprite

logger = logging.getLogger(__name__)

DEFAULT_DEPTH_LIMIT = 64


def parse_project(
    xml_text: str,
    *,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
    warnings_sink: list[str] | None = None,
) -> ProjectDocument:
    """Parse project XML into a ProjectDocument.

    Unrecognized elements are dropped (warning logged, and appended to
    ``warnings_sink`` when given). Raises MalformedXml, DepthLimitExceeded,
    or DuplicateSpriteName.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc

    _check_depth(root, depth_limit)

    warnings = warnings_sink if warnings_sink is not None else []

    def warn(msg: str) -> None:
        warnings.append(msg)
        logger.warning("project xml: %s", msg)

    if root.tag != "project":
        raise MalformedXml(f"root element must be <project>, got <{root.tag}>")

    doc = ProjectDocument(name=root.get("name", ""))
    seen_names: set[str] = set()
    sprites_containers = 0

    for child in root:
        if child.tag != "sprites":
            warn(f"dropped unrecognized element <{child.tag}> under <project>")
            continue
        sprites_containers += 1
        if sprites_containers > 1:
            warn("multiple <sprites> containers; merging in document order")
        for sprite_el in child:
            if sprite_el.tag != "sprite":
                warn(f"dropped unrecognized element <{sprite_el.tag}> under <sprites>")
                continue
            name = sprite_el.get("name")
            if name is None:
                warn("dropped <sprite> without a name attribute")
                continue
            if name in seen_names:
                raise DuplicateSpriteName(f"duplicate sprite name {name!r}")
            seen_names.add(name)
            doc.sprites.append(_parse_sprite(sprite_el, name, warn))

    return doc


def _check_depth(root: ET.Element, limit: int) -> None:
    # Iterative walk: the raw tree may be deeper than Python's recursion limit.
    stack: list[tuple[ET.Element, int]] = [(root, 1)]
    while stack:
        el, depth = stack.pop()
        if depth > limit:
            raise DepthLimitExceeded(f"element nesting exceeds limit of {limit}")
        for child in el:
            stack.append((child, depth + 1))


def _parse_sprite(el: ET.Element, name: str, warn) -> Sprite:
    sprite = Sprite(name=name)
    for child in el:
        if child.tag != "scripts":
            warn(f"dropped unrecognized element <{child.tag}> under <sprite>")
            continue
        for script_el in child:
            if script_el.tag != "script":
                warn(f"dropped unrecognized element <{script_el.tag}> under <scripts>")
                continue
            sprite.scripts.append(_parse_script(script_el, warn))
    return sprite


def _int_attr(el: ET.Element, attr: str, warn) -> int:
    raw = el.get(attr)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        warn(f"non-integer {attr}={raw!r} on <{el.tag}>; using 0")
        return 0


def _parse_script(el: ET.Element, warn) -> Script:
    script = Script(x=_int_attr(el, "x", warn), y=_int_attr(el, "y", warn))
    for child in el:
        if child.tag == "block":
            block = _parse_block(child, warn)
            if block is not None:
                script.blocks.append(block)
        else:
            warn(f"dropped unrecognized element <{child.tag}> under <script>")
    return script


def _parse_block(el: ET.Element, warn) -> BlockNode | None:
    opcode = el.get("s")
    if not opcode:
        warn("dropped <block> without an opcode (s attribute)")
        return None
    block = BlockNode(opcode=opcode)
    for child in el:
        if child.tag == "l":
            block.children.append(child.text or "")
        elif child.tag == "block":
            nested = _parse_block(child, warn)
            if nested is not None:
                block.children.append(nested)
        elif child.tag == "script":
            block.children.append(_parse_script(child, warn))
        else:
            warn(f"dropped unrecognized element <{child.tag}> under <block>")
    return block


# ── canonical serialization ────────────────────────────────────────────

def _esc_text(value: str) -> str:
    return value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _esc_attr(value: str) -> str:
    return _esc_text(value).replace('"', "&quot;")


def serialize_project(project: ProjectDocument) -> str:
    """Canonical XML text for a project; serialize(parse(serialize(p)))
    is byte-identical to serialize(p)."""
    lines: list[str] = []
    lines.append(f'<project name="{_esc_attr(project.name)}">')
    if project.sprites:
        lines.append("  <sprites>")
        for sprite in project.sprites:
            _emit_sprite(sprite, lines, 2)
        lines.append("  </sprites>")
    else:
        lines.append("  <sprites/>")
    lines.append("</project>")
    return "\n".join(lines) + "\n"


def _emit_sprite(sprite: Sprite, lines: list[str], depth: int) -> None:
    pad = "  " * depth
    lines.append(f'{pad}<sprite name="{_esc_attr(sprite.name)}">')
    if sprite.scripts:
        lines.append(f"{pad}  <scripts>")
        for script in sprite.scripts:
            _emit_script(script, lines, depth + 2)
        lines.append(f"{pad}  </scripts>")
    else:
        lines.append(f"{pad}  <scripts/>")
    lines.append(f"{pad}</sprite>")


def _emit_script(script: Script, lines: list[str], depth: int) -> None:
    pad = "  " * depth
    if script.blocks:
        lines.append(f'{pad}<script x="{script.x}" y="{script.y}">')
        for block in script.blocks:
            _emit_block(block, lines, depth + 1)
        lines.append(f"{pad}</script>")
    else:
        lines.append(f'{pad}<script x="{script.x}" y="{script.y}"/>')


def _emit_block(block: BlockNode, lines: list[str], depth: int) -> None:
    pad = "  " * depth
    if block.children:
        lines.append(f'{pad}<block s="{_esc_attr(block.opcode)}">')
        for child in block.children:
            if isinstance(child, str):
                if child:
                    lines.append(f"{pad}  <l>{_esc_text(child)}</l>")
                else:
                    lines.append(f"{pad}  <l/>")
            elif isinstance(child, BlockNode):
                _emit_block(child, lines, depth + 1)
            else:
                _emit_script(child, lines, depth + 1)
        lines.append(f"{pad}</block>")
    else:
        lines.append(f'{pad}<block s="{_esc_attr(block.opcode)}"/>')


def canonicalize(project: ProjectDocument) -> ProjectDocument:
    """Round a project through its canonical serialization."""
    return parse_project(serialize_project(project))
