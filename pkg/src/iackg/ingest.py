"""Provider schema and documentation ingestion.

Turns a schema dump (structure) and a Markdown documentation page (prose)
into an :class:`EnrichedResourceSchema`, and reports how many schema fields
ended up with a description.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Union

log = logging.getLogger(__name__)

TOP_LEVEL = "top-level"


class SchemaParseError(ValueError):
    """Malformed schema dump; ``path`` points at the offending node."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class SchemaError(ValueError):
    pass


class IngestError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Raw schema dump
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RawArgument:
    name: str
    value_type: str
    required: bool


@dataclass(frozen=True)
class RawAttribute:
    name: str
    value_type: str


@dataclass(frozen=True)
class RawBlock:
    name: str
    min_items: int
    max_items: Optional[int]  # None means unbounded
    arguments: tuple[RawArgument, ...] = ()
    blocks: tuple["RawBlock", ...] = ()

    @property
    def required(self) -> bool:
        return self.min_items >= 1


@dataclass(frozen=True)
class RawSchemaDump:
    resource_name: str
    arguments: tuple[RawArgument, ...] = ()
    blocks: tuple[RawBlock, ...] = ()
    attributes: tuple[RawAttribute, ...] = ()

    def to_dict(self) -> dict:
        return {
            "resource_name": self.resource_name,
            "arguments": [_arg_to_dict(a) for a in self.arguments],
            "blocks": [_block_to_dict(b) for b in self.blocks],
            "attributes": [{"name": a.name, "type": a.value_type} for a in self.attributes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _arg_to_dict(a: RawArgument) -> dict:
    return {"name": a.name, "type": a.value_type, "required": a.required}


def _block_to_dict(b: RawBlock) -> dict:
    return {
        "name": b.name,
        "min_items": b.min_items,
        "max_items": b.max_items,
        "arguments": [_arg_to_dict(a) for a in b.arguments],
        "blocks": [_block_to_dict(c) for c in b.blocks],
    }


def _type_tag(value: Any, path: str) -> str:
    # tfschema-style nested type lists: ["list", "string"] -> list(string)
    if isinstance(value, str):
        return value
    if isinstance(value, list) and value:
        head, *rest = value
        if not isinstance(head, str):
            raise SchemaParseError(path, "type list must start with a string")
        if not rest:
            return head
        inner = ", ".join(_type_tag(r, path) for r in rest)
        return f"{head}({inner})"
    raise SchemaParseError(path, f"invalid type tag {value!r}")


def _expect(obj: dict, key: str, kind: type, path: str, default: Any = ...) -> Any:
    if key not in obj:
        if default is ...:
            raise SchemaParseError(f"{path}.{key}", "missing field")
        return default
    value = obj[key]
    if kind is int and isinstance(value, bool):
        raise SchemaParseError(f"{path}.{key}", "expected int")
    if not isinstance(value, kind):
        raise SchemaParseError(f"{path}.{key}", f"expected {kind.__name__}")
    return value


def _parse_argument(obj: Any, path: str) -> RawArgument:
    if not isinstance(obj, dict):
        raise SchemaParseError(path, "expected object")
    name = _expect(obj, "name", str, path)
    if not name:
        raise SchemaParseError(f"{path}.name", "empty name")
    required = _expect(obj, "required", bool, path, False)
    return RawArgument(name, _type_tag(obj.get("type", "string"), f"{path}.type"), required)


def _check_unique(names: list[str], path: str) -> None:
    seen = set()
    for n in names:
        if n in seen:
            raise SchemaError(f"{path}: duplicate name {n!r}")
        seen.add(n)


def _parse_body(obj: dict, path: str) -> tuple[tuple[RawArgument, ...], tuple[RawBlock, ...]]:
    raw_args = _expect(obj, "arguments", list, path, [])
    raw_blocks = _expect(obj, "blocks", list, path, [])
    args = tuple(_parse_argument(a, f"{path}.arguments[{i}]") for i, a in enumerate(raw_args))
    blocks = tuple(_parse_block(b, f"{path}.blocks[{i}]") for i, b in enumerate(raw_blocks))
    _check_unique([a.name for a in args], f"{path}.arguments")
    _check_unique([b.name for b in blocks], f"{path}.blocks")
    return args, blocks


def _parse_block(obj: Any, path: str) -> RawBlock:
    if not isinstance(obj, dict):
        raise SchemaParseError(path, "expected object")
    name = _expect(obj, "name", str, path)
    if not name:
        raise SchemaParseError(f"{path}.name", "empty name")
    min_items = _expect(obj, "min_items", int, path, 0)
    max_items = obj.get("max_items")
    if max_items is not None and (isinstance(max_items, bool) or not isinstance(max_items, int)):
        raise SchemaParseError(f"{path}.max_items", "expected int or null")
    if min_items < 0:
        raise SchemaError(f"{path}: negative min_items")
    if max_items is not None and (max_items < 1 or max_items < min_items):
        raise SchemaError(f"{path}: invalid cardinality ({min_items}, {max_items})")
    args, blocks = _parse_body(obj, path)
    return RawBlock(name, min_items, max_items, args, blocks)


def parse_schema_dump(raw: Union[str, dict]) -> RawSchemaDump:
    """Parse one resource entry of the schema dump format.

    Format::

        {"resource_name": "aws_s3_bucket",
         "arguments": [{"name": "bucket", "type": "string", "required": true}],
         "blocks": [{"name": "versioning", "min_items": 0, "max_items": 1,
                     "arguments": [...], "blocks": [...]}],
         "attributes": [{"name": "arn", "type": "string"}]}

    ``max_items: null`` means unbounded.
    """
    if isinstance(raw, str):
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaParseError(f"$@{exc.lineno}:{exc.colno}", exc.msg) from exc
    else:
        obj = raw
    if not isinstance(obj, dict):
        raise SchemaParseError("$", "expected object")
    name = obj.get("resource_name")
    if not isinstance(name, str) or not name:
        raise SchemaError("schema dump has no resource_name")
    args, blocks = _parse_body(obj, "$")
    raw_attrs = _expect(obj, "attributes", list, "$", [])
    attrs = []
    for i, a in enumerate(raw_attrs):
        p = f"$.attributes[{i}]"
        if not isinstance(a, dict):
            raise SchemaParseError(p, "expected object")
        attrs.append(RawAttribute(_expect(a, "name", str, p), _type_tag(a.get("type", "string"), f"{p}.type")))
    _check_unique([a.name for a in attrs], "$.attributes")
    return RawSchemaDump(name, args, blocks, tuple(attrs))


def from_tfschema(resource_name: str, obj: dict) -> RawSchemaDump:
    """Convert ``tfschema resource show -f json`` output into a dump.

    Computed-only attributes become exported attributes; everything else is
    an argument.
    """

    def body(o: dict) -> dict:
        out = {"arguments": [], "blocks": []}
        for a in o.get("attributes", []):
            out["arguments"].append({"name": a["name"], "type": a.get("type", "string"), "required": bool(a.get("required"))})
        for b in o.get("block_types", []):
            inner = body(b)
            max_items = b.get("max_items") or None
            out["blocks"].append({"name": b["type_name"], "min_items": b.get("min_items", 0), "max_items": max_items, **inner})
        return out

    top = body(obj)
    attrs = []
    args = []
    for a, src in zip(top["arguments"], obj.get("attributes", [])):
        if src.get("computed") and not src.get("optional") and not src.get("required"):
            attrs.append({"name": a["name"], "type": a["type"]})
        else:
            args.append(a)
    return parse_schema_dump({"resource_name": resource_name, "arguments": args, "blocks": top["blocks"], "attributes": attrs})


# ---------------------------------------------------------------------------
# Documentation pages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Section:
    heading_level: int
    title: str
    body: str


@dataclass
class DocPage:
    resource_name: str
    raw_markdown: str
    sections: list[Section]
    description: str = ""


_HEADING = re.compile(r"^(#{1,4}) +(.*?)\s*$")
_RESOURCE_TITLE = re.compile(r"^Resource:\s*`?([A-Za-z0-9_]+)`?\s*$")
_FENCE = re.compile(r"^\s*(```|~~~)")


def _iter_lines_outside_fences(lines: list[str]) -> Iterator[tuple[int, str, bool]]:
    in_fence = False
    for i, line in enumerate(lines):
        fence = bool(_FENCE.match(line))
        yield i, line, in_fence or fence
        if fence:
            in_fence = not in_fence


def parse_doc_page(md: str) -> DocPage:
    if not md.strip():
        raise IngestError("empty documentation page")
    lines = md.splitlines()
    sections: list[Section] = []
    title: Optional[tuple[int, str]] = None
    body: list[str] = []
    preamble: list[str] = []
    for _, line, fenced in _iter_lines_outside_fences(lines):
        m = None if fenced else _HEADING.match(line)
        if m:
            if title is not None:
                sections.append(Section(title[0], title[1], "\n".join(body)))
            title, body = (len(m.group(1)), m.group(2)), []
        elif title is None:
            preamble.append(line)
        else:
            body.append(line)
    if title is not None:
        sections.append(Section(title[0], title[1], "\n".join(body)))

    resource_name = None
    description = ""
    for i, s in enumerate(sections):
        m = _RESOURCE_TITLE.match(s.title) if s.heading_level == 1 else None
        if m:
            resource_name = m.group(1)
            # text up to the first level-2 section belongs to the description
            parts = [s.body]
            for nxt in sections[i + 1:]:
                if nxt.heading_level <= 2:
                    break
                parts.append(nxt.body)
            description = clean_description("\n".join(parts))
            break
    if resource_name is None:
        raise IngestError("no '# Resource: <name>' heading")
    return DocPage(resource_name, md, sections, description)


@dataclass(frozen=True)
class ArgDoc:
    section_context: str
    name: str
    text: str
    position: int  # line number in the page, defines document order


@dataclass(frozen=True)
class AttrDoc:
    name: str
    text: str
    position: int


@dataclass(frozen=True)
class ExampleDoc:
    title: str
    code: str
    index: int


@dataclass
class DocElements:
    arg_descriptions: list[ArgDoc] = field(default_factory=list)
    attr_descriptions: list[AttrDoc] = field(default_factory=list)
    examples: list[ExampleDoc] = field(default_factory=list)


_BULLET = re.compile(r"^\s*[-*]\s+`([^`]+)`\s*(?:[-–—:]\s*)?(.*)$")


def _section_kind(title: str) -> Optional[str]:
    t = title.strip().lower()
    if t.startswith("argument") and "reference" in t:
        return "arguments"
    if t.startswith("attribute") and "reference" in t:
        return "attributes"
    if t.startswith("example"):
        return "examples"
    return None


def extract_doc_elements(page: DocPage) -> DocElements:
    out = DocElements()
    lines = page.raw_markdown.splitlines()
    kind: Optional[str] = None
    context = TOP_LEVEL
    pending_title: Optional[str] = None
    current: Optional[list] = None  # [kind, context, name, text_lines, position]
    code: Optional[list[str]] = None

    def flush() -> None:
        nonlocal current
        if current is None:
            return
        k, ctx, name, text, pos = current
        joined = clean_description(" ".join(text))
        if k == "arguments":
            out.arg_descriptions.append(ArgDoc(ctx, name, joined, pos))
        else:
            out.attr_descriptions.append(AttrDoc(name, joined, pos))
        current = None

    for i, line, fenced in _iter_lines_outside_fences(lines):
        if kind == "examples" and fenced:
            if code is None:
                code = []
            elif _FENCE.match(line):
                idx = len(out.examples)
                if pending_title:
                    title = pending_title
                else:
                    title = "Basic Usage" if idx == 0 else f"Example {idx + 1}"
                out.examples.append(ExampleDoc(title, "\n".join(code), idx))
                code, pending_title = None, None
            else:
                code.append(line)
            continue
        m = None if fenced else _HEADING.match(line)
        if m:
            flush()
            level, title = len(m.group(1)), m.group(2)
            if level <= 2:
                kind = _section_kind(title) if level == 2 else None
                context, pending_title = TOP_LEVEL, None
            elif kind == "arguments":
                context = title
            elif kind == "examples":
                pending_title = title
            continue
        if kind not in ("arguments", "attributes") or fenced:
            continue
        b = _BULLET.match(line)
        if b:
            flush()
            current = [kind, context, b.group(1), [b.group(2)], i]
        elif current is not None:
            if line.strip():
                current[3].append(line)
            else:
                flush()
    flush()
    return out


# ---------------------------------------------------------------------------
# Enrichment
# ---------------------------------------------------------------------------

_PROTECTED = re.compile(r"`[^`]*`|\((?:Required|Optional)[^)]*\)")


def clean_description(text: str) -> str:
    """Trim and collapse whitespace, leaving backtick spans and
    requirement markers untouched."""
    parts = []
    last = 0
    for m in _PROTECTED.finditer(text):
        parts.append(re.sub(r"\s+", " ", text[last:m.start()]))
        parts.append(m.group(0))
        last = m.end()
    parts.append(re.sub(r"\s+", " ", text[last:]))
    return "".join(parts).strip()


def normalize_section(name: str) -> str:
    s = name.lower()
    s = re.sub(r"\bblocks?\b", " ", s)
    s = s.replace(":", " ")
    s = re.sub(r"\s+", " ", s).strip()
    return s.replace(" ", "_")


@dataclass
class ArgumentSpec:
    name: str
    value_type: str
    required: bool
    id: str
    owning_resource: str
    description: str = ""


@dataclass
class BlockSpec:
    name: str
    min_items: int
    max_items: Optional[int]
    id: str
    owning_resource: str
    description: str = ""
    nested_arguments: list[ArgumentSpec] = field(default_factory=list)
    nested_blocks: list["BlockSpec"] = field(default_factory=list)

    @property
    def required(self) -> bool:
        return self.min_items >= 1

    @property
    def cardinality(self) -> tuple[int, Optional[int]]:
        return (self.min_items, self.max_items)


@dataclass
class AttributeSpec:
    name: str
    value_type: str
    description: str = ""


@dataclass
class ExampleSpec:
    title: str
    code: str
    index: int


@dataclass(frozen=True)
class Orphan:
    kind: str  # "argument" or "attribute"
    section_context: str
    name: str
    text: str
    reason: str


@dataclass
class EnrichedResourceSchema:
    resource_name: str
    description: str = ""
    arguments: list[ArgumentSpec] = field(default_factory=list)
    blocks: list[BlockSpec] = field(default_factory=list)
    attributes: list[AttributeSpec] = field(default_factory=list)
    examples: list[ExampleSpec] = field(default_factory=list)
    orphans: list[Orphan] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def iter_blocks(self) -> Iterator[BlockSpec]:
        stack = list(reversed(self.blocks))
        while stack:
            b = stack.pop()
            yield b
            stack.extend(reversed(b.nested_blocks))

    def skeleton(self) -> tuple:
        """Structure without descriptions; equal skeletons mean equal shape."""

        def blk(b: BlockSpec) -> tuple:
            return (
                b.name, b.id, b.min_items, b.max_items,
                tuple((a.name, a.id, a.value_type, a.required) for a in b.nested_arguments),
                tuple(blk(c) for c in b.nested_blocks),
            )

        return (
            self.resource_name,
            tuple((a.name, a.id, a.value_type, a.required) for a in self.arguments),
            tuple(blk(b) for b in self.blocks),
            tuple((a.name, a.value_type) for a in self.attributes),
        )

    def to_dict(self) -> dict:
        def arg(a: ArgumentSpec) -> dict:
            return {"name": a.name, "type": a.value_type, "required": a.required, "id": a.id, "description": a.description}

        def blk(b: BlockSpec) -> dict:
            return {
                "name": b.name, "min_items": b.min_items, "max_items": b.max_items, "id": b.id,
                "description": b.description,
                "arguments": [arg(a) for a in b.nested_arguments],
                "blocks": [blk(c) for c in b.nested_blocks],
            }

        return {
            "resource_name": self.resource_name,
            "description": self.description,
            "arguments": [arg(a) for a in self.arguments],
            "blocks": [blk(b) for b in self.blocks],
            "attributes": [{"name": a.name, "type": a.value_type, "description": a.description} for a in self.attributes],
            "examples": [{"title": e.title, "code": e.code, "index": e.index} for e in self.examples],
            "orphans": [o.__dict__ for o in self.orphans],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnrichedResourceSchema":
        res = d["resource_name"]

        def arg(a: dict) -> ArgumentSpec:
            return ArgumentSpec(a["name"], a["type"], a["required"], a["id"], res, a.get("description", ""))

        def blk(b: dict) -> BlockSpec:
            return BlockSpec(
                b["name"], b["min_items"], b["max_items"], b["id"], res, b.get("description", ""),
                [arg(a) for a in b.get("arguments", [])], [blk(c) for c in b.get("blocks", [])],
            )

        return cls(
            res, d.get("description", ""),
            [arg(a) for a in d.get("arguments", [])],
            [blk(b) for b in d.get("blocks", [])],
            [AttributeSpec(a["name"], a["type"], a.get("description", "")) for a in d.get("attributes", [])],
            [ExampleSpec(e["title"], e["code"], e["index"]) for e in d.get("examples", [])],
            [Orphan(**o) for o in d.get("orphans", [])],
            list(d.get("warnings", [])),
        )


def skeleton_of(schema: RawSchemaDump) -> EnrichedResourceSchema:
    """Enriched schema with ids assigned and every description empty."""
    res = schema.resource_name

    def args(raw: tuple[RawArgument, ...], prefix: str) -> list[ArgumentSpec]:
        return [ArgumentSpec(a.name, a.value_type, a.required, prefix + a.name, res) for a in raw]

    def blocks(raw: tuple[RawBlock, ...], prefix: str) -> list[BlockSpec]:
        out = []
        for b in raw:
            bid = prefix + b.name
            out.append(BlockSpec(b.name, b.min_items, b.max_items, bid, res, "",
                                 args(b.arguments, bid + "."), blocks(b.blocks, bid + ".")))
        return out

    return EnrichedResourceSchema(
        res,
        arguments=args(schema.arguments, ""),
        blocks=blocks(schema.blocks, ""),
        attributes=[AttributeSpec(a.name, a.value_type) for a in schema.attributes],
    )


_Target = Union[ArgumentSpec, BlockSpec]


def _lookup(args: list[ArgumentSpec], blocks: list[BlockSpec], name: str) -> Optional[_Target]:
    for a in args:
        if a.name == name:
            return a
    for b in blocks:
        if b.name == name:
            return b
    return None


def _block_paths(schema: EnrichedResourceSchema) -> list[tuple[BlockSpec, list[BlockSpec]]]:
    """(block, ancestors) in depth-first schema order."""
    out = []

    def walk(bs: list[BlockSpec], anc: list[BlockSpec]) -> None:
        for b in bs:
            out.append((b, anc))
            walk(b.nested_blocks, anc + [b])

    walk(schema.blocks, [])
    return out


def _cascade(schema: EnrichedResourceSchema, entry: ArgDoc,
             paths: list[tuple[BlockSpec, list[BlockSpec]]]) -> Optional[_Target]:
    name = entry.name
    if entry.section_context == TOP_LEVEL:
        hit = _lookup(schema.arguments, schema.blocks, name)
        if hit is not None:
            return hit
    else:
        norm = normalize_section(entry.section_context)
        # block argument matching: section names a block
        named = [(b, anc) for b, anc in paths if b.name == norm]
        for b, _ in named:
            hit = _lookup(b.nested_arguments, b.nested_blocks, name)
            if hit is not None:
                return hit
        # parent block context
        for b, anc in named:
            for parent in reversed(anc):
                hit = _lookup(parent.nested_arguments, parent.nested_blocks, name)
                if hit is not None:
                    return hit
        # combined section paths / path-based matching for nested blocks
        for b, anc in paths:
            chain = [x.name for x in anc] + [b.name]
            combos = {"_".join(chain[i:]) for i in range(len(chain))} | {".".join(chain)}
            if norm in combos and b.name != norm:
                hit = _lookup(b.nested_arguments, b.nested_blocks, name)
                if hit is not None:
                    return hit
        hit = _lookup(schema.arguments, schema.blocks, name)
        if hit is not None:
            return hit
    # name-based: first block anywhere that holds the name
    for b, _ in paths:
        hit = _lookup(b.nested_arguments, b.nested_blocks, name)
        if hit is not None:
            return hit
    return None


_MARKER = re.compile(r"^\((Required|Optional)\b")


def match_and_enrich(schema: RawSchemaDump, elements: DocElements,
                     description: str = "") -> EnrichedResourceSchema:
    out = skeleton_of(schema)
    out.description = clean_description(description)
    paths = _block_paths(out)
    taken: set[int] = set()

    for entry in sorted(elements.arg_descriptions, key=lambda e: (e.position, e.section_context, e.name, e.text)):
        target = _cascade(out, entry, paths)
        if target is None:
            out.orphans.append(Orphan("argument", entry.section_context, entry.name, entry.text, "no match"))
            continue
        if id(target) in taken:
            out.orphans.append(Orphan("argument", entry.section_context, entry.name, entry.text, f"duplicate for {target.id}"))
            continue
        taken.add(id(target))
        target.description = clean_description(entry.text)
        m = _MARKER.match(target.description)
        if m:
            doc_required = m.group(1) == "Required"
            schema_required = target.required
            if doc_required != schema_required:
                out.warnings.append(
                    f"{out.resource_name}.{target.id}: documentation says {m.group(1)}, "
                    f"schema says {'required' if schema_required else 'optional'}"
                )

    by_name = {a.name: a for a in out.attributes}
    for entry in sorted(elements.attr_descriptions, key=lambda e: (e.position, e.name, e.text)):
        attr = by_name.get(entry.name)
        if attr is None or attr.description:
            reason = "no match" if attr is None else "duplicate"
            out.orphans.append(Orphan("attribute", TOP_LEVEL, entry.name, entry.text, reason))
            continue
        attr.description = clean_description(entry.text)

    out.examples = [ExampleSpec(e.title, e.code, e.index) for e in elements.examples]
    for w in out.warnings:
        log.warning(w)
    return out


def enrich(schema: RawSchemaDump, page: Optional[DocPage]) -> EnrichedResourceSchema:
    if page is None:
        return skeleton_of(schema)
    if page.resource_name != schema.resource_name:
        raise IngestError(f"doc page {page.resource_name!r} does not describe {schema.resource_name!r}")
    return match_and_enrich(schema, extract_doc_elements(page), page.description)


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ratio:
    matched: int
    total: int

    @property
    def percent(self) -> Optional[float]:
        if self.total == 0:
            return None
        return round(100.0 * self.matched / self.total, 1)

    def __str__(self) -> str:
        pct = self.percent
        return f"{self.matched}/{self.total} ({'n/a' if pct is None else f'{pct:.1f}%'})"


@dataclass(frozen=True)
class CoverageReport:
    top_level_args: Ratio
    block_level_args: Ratio
    attributes: Ratio
    overall: Ratio

    def to_dict(self) -> dict:
        return {
            k: {"matched": r.matched, "total": r.total, "percent": r.percent}
            for k, r in (("top_level_args", self.top_level_args), ("block_level_args", self.block_level_args),
                         ("attributes", self.attributes), ("overall", self.overall))
        }

    def to_markdown(self) -> str:
        rows = [
            ("Top-level arguments", self.top_level_args),
            ("Block-level arguments", self.block_level_args),
            ("Attributes", self.attributes),
            ("Overall", self.overall),
        ]
        lines = ["# Documentation coverage", "", "| Field | Matched | Total | Coverage |", "|---|---:|---:|---:|"]
        for label, r in rows:
            pct = "n/a" if r.percent is None else f"{r.percent:.1f}%"
            lines.append(f"| {label} | {r.matched} | {r.total} | {pct} |")
        return "\n".join(lines) + "\n"


def compute_coverage(schemas: list[EnrichedResourceSchema]) -> CoverageReport:
    top = [0, 0]
    nested = [0, 0]
    attrs = [0, 0]
    for s in schemas:
        for a in s.arguments:
            top[1] += 1
            top[0] += bool(a.description)
        for b in s.iter_blocks():
            for a in b.nested_arguments:
                nested[1] += 1
                nested[0] += bool(a.description)
        for a in s.attributes:
            attrs[1] += 1
            attrs[0] += bool(a.description)
    overall = Ratio(top[0] + nested[0] + attrs[0], top[1] + nested[1] + attrs[1])
    return CoverageReport(Ratio(*top), Ratio(*nested), Ratio(*attrs), overall)


DOC_SUFFIXES = (".md", ".markdown")


def doc_files(doc_dir) -> list:
    """Documentation pages under ``doc_dir`` in name order."""
    from pathlib import Path

    return sorted(p for p in Path(doc_dir).iterdir() if p.is_file() and p.name.endswith(DOC_SUFFIXES))


def ingest_corpus(schema_dir, doc_dir) -> list[EnrichedResourceSchema]:
    """Pair ``<resource>.json`` schema dumps with documentation pages.

    Pages are paired by the resource named in their title, so doc file names
    do not matter. Pages without a resource heading are skipped.
    """
    from pathlib import Path

    pages: dict[str, DocPage] = {}
    for path in doc_files(doc_dir):
        try:
            page = parse_doc_page(path.read_text(encoding="utf-8"))
        except IngestError as exc:
            log.warning("skipping %s: %s", path.name, exc)
            continue
        if page.resource_name in pages:
            log.warning("skipping %s: second page for %s", path.name, page.resource_name)
            continue
        pages[page.resource_name] = page

    out = []
    for path in sorted(Path(schema_dir).glob("*.json")):
        text = path.read_text(encoding="utf-8")
        obj = json.loads(text)
        entries = obj if isinstance(obj, list) else [obj]
        for entry in entries:
            schema = parse_schema_dump(entry)
            page = pages.get(schema.resource_name)
            if page is None:
                log.warning("no documentation for %s", schema.resource_name)
            out.append(enrich(schema, page))
    names = [s.resource_name for s in out]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate resource in schema corpus")
    return out


def dump_enriched(schemas: list[EnrichedResourceSchema]) -> str:
    return json.dumps([s.to_dict() for s in schemas], indent=2, sort_keys=True) + "\n"


def load_enriched(text: str) -> list[EnrichedResourceSchema]:
    return [EnrichedResourceSchema.from_dict(d) for d in json.loads(text)]
