"""The 4-level universal named-entity hierarchy and external tagset mappings.

A taxonomy is a tree rooted at "TOP" (level 0) with at most four levels of
named nodes below it. Annotation labels are dotted paths ("TagPath") starting
at a level-1 node, e.g. ``Name.Person.Name``; any node at level 1-4 is a valid
label, so coarse external schemes can map onto inner nodes.

Taxonomies are immutable after load and safe to share across workers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import (
    DepthExceeded,
    DuplicateSibling,
    IllegalName,
    LevelOutOfRange,
    MissingRoot,
    SchemaViolation,
    UnknownPath,
    UnmappedLabel,
)

MAX_LEVEL = 4
ROOT_NAME = "TOP"

#: Per-level node counts of the bundled UNER hierarchy, levels 0-4.
UNER_LEVEL_COUNTS = (1, 3, 29, 95, 129)
#: Per-level node counts of the bundled reference reconstruction it derives from.
SEKINE_LEVEL_COUNTS = (1, 3, 28, 87, 125)


@dataclass(frozen=True)
class TagPath:
    """Canonical dotted label path, from a level-1 node downward."""

    segments: tuple[str, ...]

    def __post_init__(self):
        if not self.segments or len(self.segments) > MAX_LEVEL:
            raise LevelOutOfRange(f"a tag path has 1-{MAX_LEVEL} segments, got {len(self.segments)}")
        for seg in self.segments:
            if not seg or "." in seg:
                raise IllegalName(f"illegal path segment {seg!r}")

    @classmethod
    def parse(cls, text: str) -> "TagPath":
        if not text:
            raise UnknownPath(text)
        return cls(tuple(text.split(".")))

    @property
    def depth(self) -> int:
        return len(self.segments)

    def __str__(self) -> str:
        return ".".join(self.segments)

    def coarsen(self, level: int) -> "TagPath":
        """Truncate to at most ``level`` segments (1-4); idempotent."""
        if not 1 <= level <= MAX_LEVEL:
            raise LevelOutOfRange(f"level must be 1-{MAX_LEVEL}, got {level}")
        if level >= self.depth:
            return self
        return TagPath(self.segments[:level])

    def is_descendant_of(self, other: "TagPath") -> bool:
        """True when ``self`` lies strictly below ``other``."""
        return self.depth > other.depth and self.segments[: other.depth] == other.segments

    def lca(self, other: "TagPath") -> "TagPath | None":
        """Deepest common prefix, or None when even the first segments differ."""
        common = 0
        for a, b in zip(self.segments, other.segments):
            if a != b:
                break
            common += 1
        if common == 0:
            return None
        return TagPath(self.segments[:common])


def coarsen(path: TagPath, level: int) -> TagPath:
    return path.coarsen(level)


def lca(a: TagPath, b: TagPath) -> TagPath | None:
    return a.lca(b)


@dataclass
class TaxonomyNode:
    name: str
    level: int
    children: tuple["TaxonomyNode", ...] = ()
    path: TagPath | None = field(default=None, repr=False)  # None only for the root

    def __iter__(self) -> Iterator["TaxonomyNode"]:
        yield self
        for child in self.children:
            yield from child


class Taxonomy:
    """Indexed, read-only view of a loaded hierarchy."""

    def __init__(self, root: TaxonomyNode):
        self.root = root
        self._by_path: dict[str, TaxonomyNode] = {}
        self._parent: dict[str, str | None] = {}
        for node in root:
            if node.path is None:
                continue
            key = str(node.path)
            self._by_path[key] = node
            parent = node.path.segments[:-1]
            self._parent[key] = ".".join(parent) if parent else None

    def __contains__(self, path: "str | TagPath") -> bool:
        return str(path) in self._by_path

    def node(self, path: "str | TagPath") -> TaxonomyNode:
        return self._by_path[str(path)]

    def nodes(self) -> Iterator[TaxonomyNode]:
        """All nodes below the root, in document order."""
        for node in self.root:
            if node.path is not None:
                yield node

    def resolve(self, path: "str | TagPath") -> TagPath:
        """Validate a dotted path against the tree.

        Raises UnknownPath carrying the deepest valid prefix when it fails.
        """
        text = str(path)
        node = self._by_path.get(text)
        if node is not None:
            return node.path  # type: ignore[return-value]
        segments = text.split(".") if text else []
        valid = []
        for seg in segments:
            if ".".join(valid + [seg]) in self._by_path:
                valid.append(seg)
            else:
                break
        raise UnknownPath(text, ".".join(valid))

    def level_counts(self) -> tuple[int, ...]:
        counts = [0] * (MAX_LEVEL + 1)
        for node in self.root:
            counts[node.level] += 1
        return tuple(counts)

    def siblings(self, path: "str | TagPath") -> list[TagPath]:
        key = str(path)
        parent_key = self._parent[key]
        if parent_key is None:
            peers = self.root.children
        else:
            peers = self._by_path[parent_key].children
        return [p.path for p in peers if str(p.path) != key]  # type: ignore[misc]

    def ancestors(self, path: "str | TagPath") -> list[TagPath]:
        resolved = self.resolve(path)
        return [TagPath(resolved.segments[:k]) for k in range(1, resolved.depth)]

    def to_dict(self) -> dict:
        def node_to_dict(node: TaxonomyNode) -> dict:
            out: dict = {"name": node.name}
            if node.children:
                out["children"] = [node_to_dict(c) for c in node.children]
            return out

        return node_to_dict(self.root)


def _build_node(obj: Mapping, level: int, prefix: tuple[str, ...]) -> TaxonomyNode:
    if not isinstance(obj, Mapping) or "name" not in obj:
        raise SchemaViolation(f"taxonomy node at level {level} must be an object with a 'name'")
    name = obj["name"]
    if not isinstance(name, str) or not name:
        raise IllegalName(f"node name must be a non-empty string, got {name!r}")
    if "." in name:
        raise IllegalName(f"node name {name!r} contains the reserved '.' separator")
    if level > MAX_LEVEL:
        raise DepthExceeded(f"node {name!r} exceeds the maximum depth of {MAX_LEVEL}")
    path = prefix + (name,) if level > 0 else ()
    raw_children = obj.get("children", [])
    if not isinstance(raw_children, list):
        raise SchemaViolation(f"'children' of {name!r} must be a list")
    children = []
    seen = set()
    for raw in raw_children:
        child = _build_node(raw, level + 1, path)
        if child.name in seen:
            raise DuplicateSibling(f"node {name!r} has two children named {child.name!r}")
        seen.add(child.name)
        children.append(child)
    return TaxonomyNode(
        name=name,
        level=level,
        children=tuple(children),
        path=TagPath(path) if level > 0 else None,
    )


def load_taxonomy(source: "str | Mapping") -> Taxonomy:
    """Load a taxonomy from JSON text or an already-parsed tree object.

    The tree object is ``{"name": "TOP", "children": [...]}``; a root-level
    "notes" list is tolerated and ignored.
    """
    if isinstance(source, str):
        try:
            obj = json.loads(source)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"taxonomy file is not valid JSON: {exc}") from exc
    else:
        obj = source
    if not isinstance(obj, Mapping) or obj.get("name") != ROOT_NAME:
        raise MissingRoot(f"taxonomy root must be named {ROOT_NAME!r}")
    root = _build_node(obj, 0, ())
    return Taxonomy(root)


def load_taxonomy_file(path: "str | Path") -> Taxonomy:
    return load_taxonomy(Path(path).read_text(encoding="utf-8"))


def load_bundled_taxonomy(name: str = "uner") -> Taxonomy:
    """Load a taxonomy shipped with the package: "uner" or "sekine"."""
    filenames = {
        "uner": "uner_hierarchy.json",
        "sekine": "sekine_v710_reconstruction.json",
    }
    try:
        filename = filenames[name]
    except KeyError:
        raise KeyError(f"no bundled taxonomy named {name!r}; choose from {sorted(filenames)}")
    text = resources.files("uner.data").joinpath(filename).read_text(encoding="utf-8")
    return load_taxonomy(text)


def level_counts(taxonomy: Taxonomy) -> tuple[int, ...]:
    return taxonomy.level_counts()


def resolve(taxonomy: Taxonomy, path: str) -> TagPath:
    return taxonomy.resolve(path)


@dataclass(frozen=True)
class SchemeMapping:
    """Total map from one external tagset into the hierarchy."""

    scheme_id: str
    entries: Mapping[str, TagPath]

    def map_label(self, external: str) -> TagPath:
        try:
            return self.entries[external]
        except KeyError:
            raise UnmappedLabel(
                f"label {external!r} is not mapped by scheme {self.scheme_id!r}"
            ) from None

    def labels(self) -> list[str]:
        return sorted(self.entries)


def map_label(mapping: SchemeMapping, external: str) -> TagPath:
    return mapping.map_label(external)


def parse_scheme_mappings(text: str, taxonomy: Taxonomy | None = None) -> dict[str, SchemeMapping]:
    """Parse the scheme-mapping TSV: ``scheme_id<TAB>external_label<TAB>uner_path``.

    Lines starting with "#" are comments. When a taxonomy is given, every
    target path is resolved against it (raising UnknownPath otherwise).
    """
    tables: dict[str, dict[str, TagPath]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise SchemaViolation(f"scheme mapping line {lineno}: expected 3 tab-separated fields")
        scheme_id, external, target = (p.strip() for p in parts)
        path = taxonomy.resolve(target) if taxonomy is not None else TagPath.parse(target)
        table = tables.setdefault(scheme_id, {})
        if external in table:
            raise SchemaViolation(
                f"scheme mapping line {lineno}: duplicate label {external!r} in scheme {scheme_id!r}"
            )
        table[external] = path
    return {sid: SchemeMapping(sid, entries) for sid, entries in tables.items()}


def load_scheme_mappings(path: "str | Path", taxonomy: Taxonomy | None = None) -> dict[str, SchemeMapping]:
    return parse_scheme_mappings(Path(path).read_text(encoding="utf-8"), taxonomy)


def load_bundled_scheme_mappings(taxonomy: Taxonomy | None = None) -> dict[str, SchemeMapping]:
    text = resources.files("uner.data").joinpath("scheme_mappings.tsv").read_text(encoding="utf-8")
    return parse_scheme_mappings(text, taxonomy)
