"""Deterministic synthetic provider corpora for tests.

``write_corpus`` lays out schema dumps and registry-style documentation
pages so that a chosen number of top-level arguments, nested block
arguments and attributes carry documentation. Coverage is then measured by
running the real ingest pipeline over the files, never by counting here.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class CorpusShape:
    resources: int
    top_total: int
    top_documented: int
    nested_total: int
    nested_documented: int
    attr_total: int
    attr_documented: int


# the provider-wide figures the coverage criterion is stated against
PROVIDER_SHAPE = CorpusShape(
    resources=120,
    top_total=1875, top_documented=1531,
    nested_total=5563, nested_documented=4139,
    attr_total=527, attr_documented=503,
)


def _spread(total: int, parts: int) -> list[int]:
    q, r = divmod(total, parts)
    return [q + (i < r) for i in range(parts)]


def _documented_mask(total: int, documented: int, rng: random.Random) -> list[bool]:
    mask = [True] * documented + [False] * (total - documented)
    rng.shuffle(mask)
    return mask


def write_corpus(root: Path, shape: CorpusShape = PROVIDER_SHAPE, seed: int = 7) -> tuple[Path, Path]:
    """Write ``schemas/`` and ``docs/`` under ``root``; return both dirs."""
    rng = random.Random(seed)
    schema_dir, doc_dir = Path(root, "schemas"), Path(root, "docs")
    schema_dir.mkdir(parents=True, exist_ok=True)
    doc_dir.mkdir(parents=True, exist_ok=True)
    n = shape.resources
    tops = _spread(shape.top_total, n)
    nesteds = _spread(shape.nested_total, n)
    attrs = _spread(shape.attr_total, n)
    top_doc = iter(_documented_mask(shape.top_total, shape.top_documented, rng))
    nested_doc = iter(_documented_mask(shape.nested_total, shape.nested_documented, rng))
    attr_doc = iter(_documented_mask(shape.attr_total, shape.attr_documented, rng))

    for r in range(n):
        name = f"synth_res{r:03d}"
        args, blocks, attributes = [], [], []
        doc_args, doc_blocks, doc_attrs = [], [], []
        for i in range(tops[r]):
            a = f"arg_{i:02d}"
            required = i == 0
            args.append({"name": a, "type": "string", "required": required})
            if next(top_doc):
                doc_args.append(f"* `{a}` - ({'Required' if required else 'Optional'}) Setting {a} of {name}.")
        # nested arguments split over two blocks, the second nested in the first
        k = nesteds[r]
        outer_n, inner_n = k - k // 3, k // 3
        outer_args = [{"name": f"opt_{i:02d}", "type": "string", "required": False} for i in range(outer_n)]
        inner_args = [{"name": f"leaf_{i:02d}", "type": "number", "required": False} for i in range(inner_n)]
        blocks.append({"name": "settings", "min_items": 0, "max_items": 1, "arguments": outer_args,
                       "blocks": [{"name": "limits", "min_items": 0, "max_items": None,
                                   "arguments": inner_args, "blocks": []}]})
        for sect, items in (("settings", outer_args), ("limits", inner_args)):
            lines = [f"* `{a['name']}` - (Optional) Nested value {a['name']}."
                     for a in items if next(nested_doc)]
            doc_blocks.append((sect, lines))
        for i in range(attrs[r]):
            a = f"attr_{i:02d}"
            attributes.append({"name": a, "type": "string"})
            if next(attr_doc):
                doc_attrs.append(f"* `{a}` - Exported value {a}.")

        dump = {"resource_name": name, "arguments": args, "blocks": blocks, "attributes": attributes}
        (schema_dir / f"{name}.json").write_text(json.dumps(dump, indent=1) + "\n", encoding="utf-8")

        page = [f"# Resource: {name}", "", f"Manages a synthetic {name} object.", "",
                "## Example Usage", "", "```terraform", f'resource "{name}" "example" {{',
                '  arg_00 = "value"', "}", "```", "", "## Argument Reference", ""]
        page += doc_args
        for sect, lines in doc_blocks:
            page += ["", f"### {sect}", ""] + lines
        page += ["", "## Attribute Reference", ""] + doc_attrs
        (doc_dir / f"{name}.html.markdown").write_text("\n".join(page) + "\n", encoding="utf-8")
    return schema_dir, doc_dir
