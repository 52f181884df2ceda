"""Extract conditional-compilation variability from C source files.

The scanner is line oriented: comments and string/char literals are blanked
(newlines kept, so line numbers survive), backslash continuations are joined,
and only ``#if``/``#ifdef``/``#ifndef``/``#elif``/``#else``/``#endif`` and
``#include`` are interpreted.  ``#define``/``#undef`` are ignored; every macro
tested in a conditional is a free boolean option.
"""

from __future__ import annotations

import dataclasses
import logging
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

from .formula import (
    TRUE, Formula, Var, conj, neg, opaque_name, parse_formula, print_formula,
    variables,
)

log = logging.getLogger(__name__)

__all__ = [
    "ConditionalBlock", "FileVariabilityModel", "BuildManifest", "Include", "ScanError",
    "UnbalancedDirectives", "Diagnostic", "scan_file", "resolve_headers",
    "apply_build_manifest", "merge_global", "parse_manifest", "strip_comments",
    "model_to_dict", "model_from_dict",
]


class ScanError(ValueError):
    pass


class UnbalancedDirectives(ScanError):
    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # unsupported-expression, unresolved-include, include-cycle, unbalanced
    path: str
    line: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}: {self.kind}: {self.message}"


@dataclass(frozen=True)
class ConditionalBlock:
    file: str
    start: int
    end: int
    local_condition: Formula
    presence_condition: Formula
    depth: int
    origin: str = "source"  # or "header"

    @property
    def line_span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def label(self) -> str:
        return f"{self.file}:{self.start}-{self.end}"


@dataclass(frozen=True)
class Include:
    name: str
    angled: bool
    line: int


@dataclass(frozen=True)
class FileVariabilityModel:
    file: str
    options: frozenset[str]
    blocks: tuple[ConditionalBlock, ...] = ()
    file_pc: Formula = TRUE
    header_options: frozenset[str] = frozenset()
    includes: tuple[Include, ...] = ()
    diagnostics: tuple[Diagnostic, ...] = ()
    opaque: Mapping[str, str] = field(default_factory=dict)

    def effective_pc(self, block: ConditionalBlock) -> Formula:
        return conj(self.file_pc, block.presence_condition)

    @property
    def sorted_options(self) -> tuple[str, ...]:
        return tuple(sorted(self.options))

    def source_blocks(self) -> tuple[ConditionalBlock, ...]:
        return tuple(b for b in self.blocks if b.origin == "source")


# ---------------------------------------------------------------------------
# Lexical preparation


_NON_NEWLINE = re.compile(r"[^\n]")


def strip_comments(text: str) -> str:
    """Blank out comments and string/char literals, keeping every newline."""
    out: list[str] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if c == "/" and nxt == "*":
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            out.append(_NON_NEWLINE.sub(" ", text[i:j]))
            i = j
        elif c == "/" and nxt == "/":
            j = i
            # a line comment ends at an unescaped newline
            while j < n and text[j] != "\n":
                if text[j] == "\\" and j + 1 < n and text[j + 1] == "\n":
                    out.append(" \n")
                    j += 2
                    continue
                out.append(" ")
                j += 1
            i = j
        elif c in "\"'":
            j = i + 1
            while j < n and text[j] != c and text[j] != "\n":
                j += 2 if text[j] == "\\" else 1
            closed = j < n and text[j] == c
            out.append(c + _NON_NEWLINE.sub(" ", text[i + 1:j]) + (c if closed else ""))
            i = j + 1 if closed else j
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _logical_lines(text: str) -> list[tuple[int, str]]:
    """(first physical line number, joined text) for backslash-continued lines."""
    lines = text.split("\n")
    result = []
    i = 0
    while i < len(lines):
        start = i + 1
        buf = lines[i]
        while buf.endswith("\\") and i + 1 < len(lines):
            i += 1
            buf = buf[:-1] + " " + lines[i]
        result.append((start, buf))
        i += 1
    return result


_DIRECTIVE_RE = re.compile(r"^\s*#\s*([A-Za-z_]+)\b\s*(.*)$")
_INCLUDE_RE = re.compile(r'^\s*(?:"([^"]+)"|<([^>]+)>)')
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass
class _Frame:
    start: int
    depth: int
    parent_pc: Formula
    earlier: list[Formula]
    local: Formula
    branch_start: int
    seen_else: bool = False


def scan_file(text: str, path: str | Path, origin: str = "source") -> FileVariabilityModel:
    """Build the variability model of one file.

    Raises :class:`UnbalancedDirectives` when ``#else``/``#elif``/``#endif``
    do not match an open conditional or a conditional is left open.
    """
    path = _norm(path)
    clean = strip_comments(text)
    # string stripping keeps the quotes, so recover include names from raw text
    raw_lines = dict(_logical_lines(text))
    blocks: list[ConditionalBlock] = []
    includes: list[Include] = []
    diagnostics: list[Diagnostic] = []
    opaque: dict[str, str] = {}
    stack: list[_Frame] = []

    def current_pc() -> Formula:
        if not stack:
            return TRUE
        fr = stack[-1]
        return conj(fr.parent_pc, *(neg(e) for e in fr.earlier), fr.local)

    def close_branch(end_line: int) -> None:
        fr = stack[-1]
        pc = conj(fr.parent_pc, *(neg(e) for e in fr.earlier), fr.local)
        blocks.append(ConditionalBlock(path, fr.branch_start, end_line, fr.local, pc, fr.depth, origin))

    def condition(expr: str, line: int) -> Formula:
        def abstract(sub: str) -> Formula:
            name = opaque_name(sub)
            if name not in opaque:
                log.warning("%s:%d: abstracting unsupported expression %r as %s", path, line, sub, name)
                diagnostics.append(Diagnostic("unsupported-expression", path, line,
                                              f"{sub!r} abstracted as {name}"))
            opaque[name] = " ".join(sub.split())
            return Var(name)

        try:
            return parse_formula(expr, opaque=abstract)
        except ValueError:
            # not even a well-formed C expression: abstract the whole condition
            return abstract(expr)

    for lineno, line in _logical_lines(clean):
        m = _DIRECTIVE_RE.match(line)
        if not m:
            continue
        kw, rest = m.group(1), m.group(2).strip()
        if kw in ("if", "ifdef", "ifndef"):
            if kw == "if":
                local = condition(rest, lineno)
            else:
                nm = _NAME_RE.match(rest)
                if not nm:
                    raise UnbalancedDirectives(path, lineno, f"#{kw} without a macro name")
                local = Var(nm.group()) if kw == "ifdef" else neg(Var(nm.group()))
            stack.append(_Frame(lineno, len(stack) + 1, current_pc(), [], local, lineno))
        elif kw in ("elif", "elifdef", "elifndef"):
            if not stack:
                raise UnbalancedDirectives(path, lineno, f"#{kw} without #if")
            fr = stack[-1]
            if fr.seen_else:
                raise UnbalancedDirectives(path, lineno, f"#{kw} after #else")
            close_branch(lineno)
            fr.earlier.append(fr.local)
            if kw == "elif":
                fr.local = condition(rest, lineno)
            else:
                nm = _NAME_RE.match(rest)
                if not nm:
                    raise UnbalancedDirectives(path, lineno, f"#{kw} without a macro name")
                fr.local = Var(nm.group()) if kw == "elifdef" else neg(Var(nm.group()))
            fr.branch_start = lineno
        elif kw == "else":
            if not stack:
                raise UnbalancedDirectives(path, lineno, "#else without #if")
            fr = stack[-1]
            if fr.seen_else:
                raise UnbalancedDirectives(path, lineno, "duplicate #else")
            close_branch(lineno)
            fr.earlier.append(fr.local)
            fr.local = TRUE
            fr.branch_start = lineno
            fr.seen_else = True
        elif kw == "endif":
            if not stack:
                raise UnbalancedDirectives(path, lineno, "#endif without #if")
            close_branch(lineno)
            stack.pop()
        elif kw == "include":
            raw = raw_lines.get(lineno, "")
            im = _DIRECTIVE_RE.match(raw)
            target = _INCLUDE_RE.match(im.group(2)) if im else None
            if target:
                name = target.group(1) or target.group(2)
                includes.append(Include(name, target.group(2) is not None, lineno))
    if stack:
        raise UnbalancedDirectives(path, stack[-1].start, "conditional not closed by #endif")

    blocks.sort(key=lambda b: (b.start, b.end))
    options: set[str] = set()
    for b in blocks:
        options |= variables(b.presence_condition)
    return FileVariabilityModel(path, frozenset(options), tuple(blocks), TRUE, frozenset(),
                                tuple(includes), tuple(diagnostics), opaque)


def _norm(path: str | Path) -> str:
    return PurePosixPath(str(path).replace("\\", "/")).as_posix()


# ---------------------------------------------------------------------------
# Header files


def resolve_headers(model: FileVariabilityModel, include_paths: Sequence[str | Path],
                    depth_limit: int = 8, root: str | Path | None = None) -> FileVariabilityModel:
    """Add options from transitively included headers.

    Quoted includes are looked up next to the including file first, then in
    ``include_paths``; angle includes only in ``include_paths``.  Relative
    model paths are resolved against ``root`` (default: current directory).
    Each header is scanned at most once; unresolvable includes and cycles are
    recorded as diagnostics.
    """
    if depth_limit < 0:
        raise ValueError("depth_limit must be non-negative")
    base = Path(root) if root is not None else Path(".")
    dirs = [Path(p) for p in include_paths]
    start = Path(model.file)
    if not start.is_absolute():
        start = base / start
    diagnostics = list(model.diagnostics)
    header_blocks: list[ConditionalBlock] = []
    header_opts: set[str] = set()
    opaque = dict(model.opaque)
    seen: set[Path] = {start.resolve()}

    def find(inc: Include, from_dir: Path) -> Path | None:
        candidates = ([] if inc.angled else [from_dir]) + dirs
        for d in candidates:
            p = d / inc.name
            if p.is_file():
                return p
        return None

    def display(p: Path) -> str:
        try:
            return _norm(p.resolve().relative_to(base.resolve()))
        except ValueError:
            return _norm(p)

    def visit(includes: Sequence[Include], from_file: Path, origin_label: str, depth: int,
              chain: tuple[Path, ...]) -> None:
        for inc in includes:
            target = find(inc, from_file.parent)
            if target is None:
                log.info("%s:%d: cannot resolve include %s", origin_label, inc.line, inc.name)
                diagnostics.append(Diagnostic("unresolved-include", origin_label, inc.line, inc.name))
                continue
            key = target.resolve()
            if key in chain:
                diagnostics.append(Diagnostic("include-cycle", origin_label, inc.line,
                                              f"{inc.name} already on the include chain"))
                continue
            if key in seen:
                continue
            seen.add(key)
            label = display(target)
            try:
                sub = scan_file(target.read_text(encoding="utf-8", errors="replace"), label, origin="header")
            except UnbalancedDirectives as exc:
                diagnostics.append(Diagnostic("unbalanced", label, exc.line, str(exc)))
                continue
            header_blocks.extend(sub.blocks)
            header_opts.update(sub.options)
            opaque.update(sub.opaque)
            diagnostics.extend(sub.diagnostics)
            if depth + 1 < depth_limit:
                visit(sub.includes, target, label, depth + 1, chain + (key,))

    if depth_limit > 0:
        visit(model.includes, start, model.file, 0, (start.resolve(),))
    if not header_blocks and not header_opts and len(diagnostics) == len(model.diagnostics):
        return model
    return dataclasses.replace(
        model,
        options=model.options | header_opts,
        header_options=model.header_options | frozenset(header_opts),
        blocks=model.blocks + tuple(header_blocks),
        diagnostics=tuple(diagnostics),
        opaque=opaque,
    )


# ---------------------------------------------------------------------------
# Build manifest


@dataclass(frozen=True)
class BuildManifest:
    """Per-file presence conditions contributed by the build system.

    Text format: ``path :: formula`` per line, ``option NAME ...`` lines to
    declare extra options, ``#`` comments.
    """

    entries: Mapping[str, Formula] = field(default_factory=dict)
    options: frozenset[str] = frozenset()

    def pc_for(self, path: str) -> Formula:
        return self.entries.get(_norm(path), TRUE)

    def to_text(self) -> str:
        lines = []
        if self.options:
            lines.append("option " + " ".join(sorted(self.options)))
        for p in sorted(self.entries):
            lines.append(f"{p} :: {print_formula(self.entries[p])}")
        return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> BuildManifest:
    entries: dict[str, Formula] = {}
    options: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "::" not in line:
            head, _, rest = line.partition(" ")
            if head == "option" and rest.strip():
                options.update(rest.split())
                continue
            raise ScanError(f"manifest line {lineno}: expected 'path :: formula'")
        path, _, expr = line.partition("::")
        path = _norm(path.strip())
        if not path or not expr.strip():
            raise ScanError(f"manifest line {lineno}: empty path or formula")
        if path in entries:
            raise ScanError(f"manifest line {lineno}: duplicate entry for {path}")
        try:
            entries[path] = parse_formula(expr.strip())
        except ValueError as exc:
            raise ScanError(f"manifest line {lineno}: {exc}") from exc
    return BuildManifest(entries, frozenset(options))


def apply_build_manifest(model: FileVariabilityModel, manifest: BuildManifest) -> FileVariabilityModel:
    pc = manifest.pc_for(model.file)
    if pc == TRUE:
        return model
    return dataclasses.replace(model, file_pc=pc, options=model.options | variables(pc))


def merge_global(models: Sequence[FileVariabilityModel],
                 extra_options: Iterable[str] = ()) -> FileVariabilityModel:
    """One model over the union option space; blocks carry their effective PCs."""
    if not models:
        raise ValueError("merge_global needs at least one model")
    if len(models) == 1 and not extra_options:
        return models[0]
    options: set[str] = set(extra_options)
    header: set[str] = set()
    blocks: list[ConditionalBlock] = []
    diagnostics: list[Diagnostic] = []
    opaque: dict[str, str] = {}
    for m in sorted(models, key=lambda m: m.file):
        options |= m.options
        header |= m.header_options
        diagnostics.extend(m.diagnostics)
        opaque.update(m.opaque)
        for b in m.blocks:
            blocks.append(dataclasses.replace(b, presence_condition=m.effective_pc(b)))
    return FileVariabilityModel("global", frozenset(options), tuple(blocks), TRUE,
                                frozenset(header), (), tuple(diagnostics), opaque)


# ---------------------------------------------------------------------------
# Serialisation


def model_to_dict(model: FileVariabilityModel) -> dict:
    return {
        "file": model.file,
        "options": sorted(model.options),
        "header_options": sorted(model.header_options),
        "file_pc": print_formula(model.file_pc),
        "blocks": [
            {
                "file": b.file,
                "start": b.start,
                "end": b.end,
                "depth": b.depth,
                "origin": b.origin,
                "local_condition": print_formula(b.local_condition),
                "presence_condition": print_formula(b.presence_condition),
                "effective_pc": print_formula(model.effective_pc(b)),
            }
            for b in model.blocks
        ],
        "includes": [{"name": i.name, "angled": i.angled, "line": i.line} for i in model.includes],
        "opaque": dict(sorted(model.opaque.items())),
        "diagnostics": [str(d) for d in model.diagnostics],
    }


def model_from_dict(data: Mapping) -> FileVariabilityModel:
    blocks = tuple(
        ConditionalBlock(b["file"], b["start"], b["end"], parse_formula(b["local_condition"]),
                         parse_formula(b["presence_condition"]), b["depth"], b.get("origin", "source"))
        for b in data.get("blocks", ())
    )
    includes = tuple(Include(i["name"], i["angled"], i["line"]) for i in data.get("includes", ()))
    return FileVariabilityModel(
        data["file"], frozenset(data["options"]), blocks, parse_formula(data.get("file_pc", "1")),
        frozenset(data.get("header_options", ())), includes, (), dict(data.get("opaque", {})),
    )
