"""CIF reading, the periodic crystal model, supercells and minimum-image geometry."""
from __future__ import annotations

import math
import re
import shlex
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np

from . import elements
from .constants import AMU_G, A3_CM3


class StructureError(ValueError):
    """Base class for structure input problems."""


class MissingCellParameters(StructureError):
    pass


class UnknownElement(StructureError):
    def __init__(self, symbol):
        super().__init__(f"unknown element {symbol!r}")
        self.symbol = symbol


class EmptyAtomLoop(StructureError):
    pass


class MalformedLoop(StructureError):
    def __init__(self, line, msg="malformed loop"):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class UnsupportedSymmetry(StructureError):
    pass


class DisorderedSite(StructureError):
    pass


class DegenerateCell(StructureError):
    pass


class NonNeutralCell(StructureError):
    pass


def wrap(frac):
    """Map fractional coordinates into [0, 1)."""
    w = np.mod(np.asarray(frac, dtype=float), 1.0)
    # np.mod(-1e-17, 1) rounds to exactly 1.0
    w[w >= 1.0] = 0.0
    return w


def cell_matrix(lengths, angles) -> np.ndarray:
    """Lattice vectors as rows: a along x, b in the xy plane."""
    a, b, c = lengths
    al, be, ga = np.radians(angles)
    cos_al, cos_be, cos_ga = np.cos(al), np.cos(be), np.cos(ga)
    sin_ga = np.sin(ga)
    cx = c * cos_be
    cy = c * (cos_al - cos_be * cos_ga) / sin_ga
    cz2 = c * c - cx * cx - cy * cy
    if cz2 <= 0:
        raise DegenerateCell(f"cell angles {angles} give non-positive volume")
    m = np.array([[a, 0.0, 0.0],
                  [b * cos_ga, b * sin_ga, 0.0],
                  [cx, cy, math.sqrt(cz2)]])
    # kill -0.0 and 1e-16 noise for right angles
    m[np.abs(m) < 1e-12] = 0.0
    return m


def perpendicular_widths(matrix) -> np.ndarray:
    """Distances between opposite cell faces, V/|b x c| etc."""
    a, b, c = matrix
    vol = abs(np.dot(a, np.cross(b, c)))
    return vol / np.array([np.linalg.norm(np.cross(b, c)),
                           np.linalg.norm(np.cross(a, c)),
                           np.linalg.norm(np.cross(a, b))])


@dataclass(frozen=True, eq=False)
class CrystalStructure:
    """Periodic unit cell with element sites in fractional coordinates."""

    name: str
    cell_lengths: tuple
    cell_angles: tuple
    symbols: tuple
    frac: np.ndarray
    charges: np.ndarray = None
    labels: tuple = None

    def __post_init__(self):
        if any(x <= 0 for x in self.cell_lengths):
            raise DegenerateCell(f"non-positive cell length {self.cell_lengths}")
        if any(not 0 < x < 180 for x in self.cell_angles):
            raise DegenerateCell(f"cell angle out of (0, 180): {self.cell_angles}")
        frac = wrap(np.asarray(self.frac, dtype=float).reshape(-1, 3))
        frac.setflags(write=False)
        object.__setattr__(self, "frac", frac)
        table = elements.element_table()
        for s in self.symbols:
            if s not in table:
                raise UnknownElement(s)
        n = len(self.symbols)
        if len(frac) != n:
            raise StructureError("symbols and coordinates differ in length")
        q = np.zeros(n) if self.charges is None else np.asarray(self.charges, dtype=float)
        q.setflags(write=False)
        object.__setattr__(self, "charges", q)
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(f"{s}{i + 1}" for i, s in enumerate(self.symbols)))
        self.matrix  # validates volume

    @property
    def matrix(self) -> np.ndarray:
        return cell_matrix(self.cell_lengths, self.cell_angles)

    @property
    def volume(self) -> float:
        # abc times an angle-only factor, so a 2x2x2 replica has exactly 8x the volume
        a, b, c = self.cell_lengths
        ca, cb, cg = np.cos(np.radians(self.cell_angles))
        return float(a * b * c * math.sqrt(1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg))

    @property
    def cartesian(self) -> np.ndarray:
        return self.frac @ self.matrix

    @property
    def mass(self) -> float:
        """Cell mass in amu."""
        table = elements.element_table()
        return math.fsum(table[s].mass for s in self.symbols)

    @property
    def density(self) -> float:
        """g/cm^3."""
        return self.mass * AMU_G / (self.volume * A3_CM3)

    @property
    def total_charge(self) -> float:
        return float(self.charges.sum())

    def __len__(self):
        return len(self.symbols)

    def check_neutral(self, tol: float = 1e-3):
        if abs(self.total_charge) > tol:
            raise NonNeutralCell(f"{self.name}: net charge {self.total_charge:.4g} e")

    def translated(self, shift) -> "CrystalStructure":
        return CrystalStructure(self.name, self.cell_lengths, self.cell_angles, self.symbols,
                                self.frac + np.asarray(shift), self.charges, self.labels)

    def with_charges(self, charges) -> "CrystalStructure":
        return CrystalStructure(self.name, self.cell_lengths, self.cell_angles, self.symbols,
                                self.frac, charges, self.labels)

    def replicated(self, reps) -> "CrystalStructure":
        """The (na, nb, nc) replication expressed as a new unit cell."""
        reps = tuple(int(n) for n in reps)
        shifts = np.array(list(product(*(range(n) for n in reps))), dtype=float)
        frac = ((self.frac[None, :, :] + shifts[:, None, :]) / np.array(reps)).reshape(-1, 3)
        k = len(shifts)
        return CrystalStructure(
            self.name,
            tuple(x * n for x, n in zip(self.cell_lengths, reps)),
            self.cell_angles,
            self.symbols * k,
            frac,
            np.tile(self.charges, k),
            tuple(f"{lab}_{i}" for i in range(k) for lab in self.labels),
        )


# ---------------------------------------------------------------- CIF parsing

_NUM = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)(?:\(\d+\))?$")


def _cif_float(text: str) -> float:
    m = _NUM.match(text.strip())
    if not m:
        raise ValueError(text)
    return float(m.group(1))


def _tokenize(text: str):
    """Yield (line_number, token) for a CIF document; handles ; text fields."""
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        lineno = i + 1
        if line.startswith(";"):
            buf = [line[1:]]
            i += 1
            while i < len(lines) and not lines[i].startswith(";"):
                buf.append(lines[i])
                i += 1
            yield lineno, "\n".join(buf).strip()
            i += 1
            continue
        stripped = line.split("#", 1)[0] if "'" not in line and '"' not in line else line
        try:
            toks = shlex.split(stripped, comments=True, posix=True)
        except ValueError as exc:
            raise MalformedLoop(lineno, str(exc)) from None
        for t in toks:
            yield lineno, t
        i += 1


def _parse_blocks(text: str):
    """Return (items: dict tag -> value, loops: list of (tags, rows, line))."""
    items, loops = {}, []
    toks = list(_tokenize(text))
    i = 0
    while i < len(toks):
        lineno, tok = toks[i]
        low = tok.lower()
        if low.startswith("data_"):
            i += 1
        elif low == "loop_":
            tags = []
            i += 1
            while i < len(toks) and toks[i][1].startswith("_"):
                tags.append(toks[i][1].lower())
                i += 1
            values = []
            while i < len(toks):
                t = toks[i][1]
                if t.startswith("_") or t.lower() == "loop_" or t.lower().startswith("data_"):
                    break
                values.append(t)
                i += 1
            if not tags:
                raise MalformedLoop(lineno, "loop_ without tags")
            if len(values) % len(tags):
                raise MalformedLoop(lineno, f"{len(values)} values for {len(tags)} columns")
            rows = [values[k:k + len(tags)] for k in range(0, len(values), len(tags))]
            loops.append((tags, rows, lineno))
        elif tok.startswith("_"):
            if i + 1 >= len(toks):
                raise MalformedLoop(lineno, f"tag {tok} without value")
            items[low] = toks[i + 1][1]
            i += 2
        else:
            i += 1
    return items, loops


def parse_symop(op: str) -> tuple[np.ndarray, np.ndarray]:
    """'-x+1/2, y, z-1/2' -> (3x3 rotation, translation)."""
    parts = [p.strip().lower().replace(" ", "") for p in op.split(",")]
    if len(parts) != 3:
        raise StructureError(f"bad symmetry operator {op!r}")
    rot = np.zeros((3, 3))
    trans = np.zeros(3)
    for row, expr in enumerate(parts):
        for sign, body in re.findall(r"([+-]?)([^+-]+)", expr):
            s = -1.0 if sign == "-" else 1.0
            m = re.fullmatch(r"(\d*\.?\d*(?:/\d+)?)\*?([xyz])", body)
            if m:
                coef = float(Fraction(m.group(1))) if m.group(1) else 1.0
                rot[row, "xyz".index(m.group(2))] += s * coef
            else:
                m = re.fullmatch(r"([xyz])(?:/(\d+))", body)
                if m:
                    rot[row, "xyz".index(m.group(1))] += s / float(m.group(2))
                else:
                    try:
                        trans[row] += s * float(Fraction(body))
                    except ValueError:
                        raise StructureError(f"bad symmetry operator {op!r}") from None
    return rot, trans


_SYMOP_TAGS = ("_symmetry_equiv_pos_as_xyz", "_space_group_symop_operation_xyz")


def parse_cif(text: str, name: str | None = None, merge_tol: float = 0.1) -> CrystalStructure:
    """Parse a CIF 1.1 document into a P1 :class:`CrystalStructure`.

    Explicit symmetry operators are applied and sites closer than
    ``merge_tol`` angstrom after wrapping are merged (first one wins).
    """
    items, loops = _parse_blocks(text)
    try:
        lengths = tuple(_cif_float(items[f"_cell_length_{x}"]) for x in "abc")
        angles = tuple(_cif_float(items[f"_cell_angle_{x}"]) for x in ("alpha", "beta", "gamma"))
    except KeyError as exc:
        raise MissingCellParameters(f"missing {exc.args[0]}") from None
    except ValueError as exc:
        raise MissingCellParameters(f"unreadable cell parameter {exc}") from None
    if name is None:
        m = re.search(r"^\s*data_(\S+)", text, re.M | re.I)
        name = m.group(1) if m else "structure"

    atom_loop = next(((t, r, ln) for t, r, ln in loops if "_atom_site_fract_x" in t), None)
    if atom_loop is None or not atom_loop[1]:
        raise EmptyAtomLoop(f"{name}: no atom_site loop with fractional coordinates")
    tags, rows, lineno = atom_loop
    col = {t: k for k, t in enumerate(tags)}

    ops = None
    for t, r, _ in loops:
        for tag in _SYMOP_TAGS:
            if tag in t:
                ops = [parse_symop(row[t.index(tag)]) for row in r]
    if ops is None:
        for tag in _SYMOP_TAGS:
            if tag in items:
                ops = [parse_symop(items[tag])]
    if ops is None:
        hm = (items.get("_symmetry_space_group_name_h-m") or items.get("_space_group_name_h-m_alt") or "P 1")
        num = items.get("_symmetry_int_tables_number") or items.get("_space_group_it_number") or "1"
        if hm.replace(" ", "").upper() != "P1" or num.strip() not in ("1", "?", "."):
            raise UnsupportedSymmetry(
                f"{name}: space group {hm!r} given without explicit symmetry operators")
        ops = [(np.eye(3), np.zeros(3))]

    symbols, fracs, charges, labels = [], [], [], []
    for k, row in enumerate(rows):
        line = lineno + k + 1
        try:
            xyz = np.array([_cif_float(row[col[f"_atom_site_fract_{a}"]]) for a in "xyz"])
        except (ValueError, KeyError):
            raise MalformedLoop(line, f"bad coordinates {row}") from None
        label = row[col["_atom_site_label"]] if "_atom_site_label" in col else f"X{k + 1}"
        raw = row[col["_atom_site_type_symbol"]] if "_atom_site_type_symbol" in col else label
        sym = elements.normalize_symbol(raw)
        if sym not in elements.element_table():
            raise UnknownElement(raw)
        if "_atom_site_occupancy" in col and row[col["_atom_site_occupancy"]] not in ("?", "."):
            occ = _cif_float(row[col["_atom_site_occupancy"]])
            if abs(occ - 1.0) > 1e-6:
                raise DisorderedSite(f"{name}: site {label} has occupancy {occ}")
        q = 0.0
        if "_atom_site_charge" in col and row[col["_atom_site_charge"]] not in ("?", "."):
            q = _cif_float(row[col["_atom_site_charge"]])
        symbols.append(sym)
        fracs.append(xyz)
        charges.append(q)
        labels.append(label)

    matrix = cell_matrix(lengths, angles)
    out_sym, out_frac, out_q, out_lab = [], [], [], []
    for rot, trans in ops:
        for sym, xyz, q, lab in zip(symbols, fracs, charges, labels):
            f = wrap(rot @ xyz + trans)
            if out_frac:
                d = np.asarray(out_frac) - f
                d -= np.rint(d)
                if np.min(np.linalg.norm(d @ matrix, axis=1)) < merge_tol:
                    continue
            out_sym.append(sym)
            out_frac.append(f)
            out_q.append(q)
            out_lab.append(lab)
    return CrystalStructure(name, lengths, angles, tuple(out_sym), np.array(out_frac),
                            np.array(out_q), tuple(out_lab))


def read_cif(path: str | Path) -> CrystalStructure:
    path = Path(path)
    return parse_cif(path.read_text(), name=path.stem)


def write_cif(s: CrystalStructure) -> str:
    """Serialize a structure as a P1 CIF (used for fixtures and round trips)."""
    out = [f"data_{s.name}"]
    for tag, v in zip(("a", "b", "c"), s.cell_lengths):
        out.append(f"_cell_length_{tag} {v:.6f}")
    for tag, v in zip(("alpha", "beta", "gamma"), s.cell_angles):
        out.append(f"_cell_angle_{tag} {v:.6f}")
    out += ["_symmetry_space_group_name_H-M 'P 1'", "_symmetry_Int_Tables_number 1",
            "loop_", "_atom_site_label", "_atom_site_type_symbol",
            "_atom_site_fract_x", "_atom_site_fract_y", "_atom_site_fract_z", "_atom_site_charge"]
    for lab, sym, f, q in zip(s.labels, s.symbols, s.frac, s.charges):
        out.append(f"{lab} {sym} {f[0]:.6f} {f[1]:.6f} {f[2]:.6f} {q:.5f}")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------------ supercells

@dataclass(frozen=True, eq=False)
class Supercell:
    parent: CrystalStructure
    replication: tuple
    matrix: np.ndarray = field(repr=False)
    cartesian: np.ndarray = field(repr=False)
    symbols: tuple = field(repr=False)
    charges: np.ndarray = field(repr=False)

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    @property
    def volume(self) -> float:
        return float(abs(np.linalg.det(self.matrix)))

    @property
    def widths(self) -> np.ndarray:
        return perpendicular_widths(self.matrix)

    @property
    def mass(self) -> float:
        return self.parent.mass * int(np.prod(self.replication))

    def __len__(self):
        return len(self.symbols)


def replication_for(matrix, cutoff: float) -> tuple:
    widths = perpendicular_widths(matrix)
    return tuple(int(math.floor(2.0 * cutoff / w)) + 1 for w in widths)


def build_supercell(s: CrystalStructure, cutoff: float = 12.0) -> Supercell:
    """Smallest replication whose perpendicular widths all exceed 2*cutoff."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    matrix = s.matrix
    if np.linalg.det(matrix) <= 0:
        raise DegenerateCell(s.name)
    reps = replication_for(matrix, cutoff)
    big = s.replicated(reps)
    cart = big.cartesian
    cart.setflags(write=False)
    m = big.matrix
    m.setflags(write=False)
    return Supercell(parent=s, replication=reps, matrix=m, cartesian=cart,
                     symbols=big.symbols, charges=big.charges)


def minimum_image(delta, matrix, inverse=None) -> np.ndarray:
    """Reduce displacement vectors by rounding their fractional components.

    Exact for every pair closer than half the smallest perpendicular width.
    """
    if inverse is None:
        inverse = np.linalg.inv(matrix)
    f = np.asarray(delta) @ inverse
    f -= np.rint(f)
    return f @ matrix


_SHIFTS27 = np.array(list(product((-1, 0, 1), repeat=3)), dtype=float)


def min_image_distance(p, q, cell) -> float:
    """Shortest |p - q + L| over lattice translations L of ``cell``.

    ``cell`` is a :class:`Supercell`, a :class:`CrystalStructure` or a 3x3
    matrix with lattice vectors as rows.
    """
    matrix = cell if isinstance(cell, np.ndarray) else cell.matrix
    d = minimum_image(np.asarray(p, float) - np.asarray(q, float), matrix)
    cands = d[None, :] + _SHIFTS27 @ matrix
    return float(np.min(np.linalg.norm(cands, axis=1)))
